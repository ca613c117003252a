#pragma once

// Covariant derivative along geodesics (D W = W' + N W), linear parallel
// transport, Jacobi fields, and the osculating-metric cross-check.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "finsler/geodesic.hpp"

namespace finsler {

struct ParallelFrame {
  GeodesicTrace trace;  // carries the transported columns
  std::vector<Vector> initial;
  // norm_history[k][i] = F(gamma(t_i), W_k(t_i)) at trace nodes
  std::vector<std::vector<double>> norm_history;

  int size() const { return static_cast<int>(initial.size()); }
  const std::vector<double>& times() const { return trace.times(); }
  Vector column(int k, double t) const { return trace.transported(k, t); }
  Vector node_column(std::size_t node, int k) const { return trace.node_transported(node, k); }
  // Columns W_1(t) .. W_m(t).
  Matrix matrix(double t) const;
  Matrix node_matrix(std::size_t node) const;

  // Frame export: t, W_k components (W<k>_<i>), F(W_k)
  void write_csv(const std::string& path) const;
};

// Transports the vectors w0 along gamma_{(x0, v0)} on [0, T] jointly with
// the geodesic.
ParallelFrame parallel_transport(const Metric& metric, const Vector& x0, const Vector& v0, double T,
                                 const std::vector<Vector>& w0, const IntegratorOptions& options = {});

// Same, re-using the initial data and tolerances of an existing trace.
ParallelFrame parallel_transport(const Metric& metric, const GeodesicTrace& trace, const std::vector<Vector>& w0);

// Vector field along a trace: either samples at every trace node, or a
// callable with optional derivative.
struct FieldAlong {
  std::vector<Vector> node_values;
  std::function<Vector(double)> value;
  std::function<Vector(double)> derivative;
};

// (D W)(t_i) at trace nodes. Node samples are differentiated with 5-point
// finite-difference weights on the (nonuniform) node grid; a callable without
// derivative is differentiated by Richardson-extrapolated central
// differences. Throws InputError for a mismatched sampling grid.
std::vector<Vector> covariant_derivative(const Metric& metric, const GeodesicTrace& trace, const FieldAlong& w);

struct JacobiFieldData {
  GeodesicTrace trace;
  std::string construction;  // "variation" or "ode"
  std::vector<double> t;     // trace nodes
  std::vector<Vector> J;
  std::vector<Vector> DJ;
  // Dense evaluation (both constructions).
  std::function<Vector(double)> J_at;
  std::function<Vector(double)> DJ_at;
};

// J(t) = d/ds gamma_{v0 + s w}(t) by integrating the linearized flow.
JacobiFieldData jacobi_by_variation(const Metric& metric, const Vector& x0, const Vector& v0, const Vector& w,
                                    double T, const IntegratorOptions& options = {});

// Jacobi field with J(0) = J0, D J(0) = DJ0, again by variation of the flow
// (initial variation (J0, DJ0 - N J0)).
JacobiFieldData jacobi_field(const Metric& metric, const Vector& x0, const Vector& v0, const Vector& J0,
                             const Vector& DJ0, double T, const IntegratorOptions& options = {});

// Integrates D D J = -R(J) in a parallel frame along the trace's geodesic.
JacobiFieldData jacobi_by_ode(const Metric& metric, const GeodesicTrace& trace, const Vector& J0, const Vector& DJ0);

// D D J at time t for a field produced by variation (exact in the state).
Vector second_covariant_derivative(const Metric& metric, const GeodesicTrace& trace, int variation, double t);

// max over nodes of |D D J + R J| / max(1, |J|), for a variation field.
double jacobi_residual(const Metric& metric, const GeodesicTrace& trace, int variation);

// R recovered from Jacobi fields J_k(0) = e_k, D J_k(0) = 0 at time t:
// R = -[D D J_1 .. D D J_n] [J_1 .. J_n]^{-1}. Returns (R_hat, R_formula).
std::pair<Matrix, Matrix> reconstruct_curvature(const Metric& metric, const Vector& x0, const Vector& v0, double t,
                                                const IntegratorOptions& options = {});

struct ExpansionFit {
  bool exact = false;  // e(t) below the noise floor everywhere
  double slope = 0.0;
  std::vector<double> t;
  std::vector<double> e;
};

// e(t) = |J(t) - t W(t)| for J(0) = 0, D J(0) = w and W the transport of w,
// at log-spaced t in [1e-3, 1e-1]; returns the log-log slope.
ExpansionFit small_time_expansion_check(const Metric& metric, const Vector& x0, const Vector& v0, const Vector& w,
                                        int points = 9);

struct OsculatingCheck {
  double max_discrepancy = 0.0;  // max_i |Gamma_{g_V}(gamma', .) - N|
  double reference_scale = 0.0;  // max_i |N|
  std::vector<double> t;
  std::vector<double> discrepancy;
};

// Builds the extension V(Phi(s, y)) = d/ds Phi(s, y), Phi(s, y) =
// gamma_{(x0 + y, v0)}(s) with y in the g_{v0}-orthogonal complement of v0,
// forms g_V(z) = g_{V(z)}(z), and compares its Levi-Civita connection along
// gamma with N at sample_count interior times. Throws DomainError when the
// construction leaves the chart.
OsculatingCheck osculating_cross_check(const Metric& metric, const GeodesicTrace& trace, int sample_count);

}  // namespace finsler
