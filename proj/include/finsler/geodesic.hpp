#pragma once

// Geodesic initial-value problems, variational (Jacobi) and transported
// columns integrated alongside, the exponential map and the shooting solver
// for the forward distance.

#include <optional>
#include <string>
#include <vector>

#include "finsler/metric.hpp"
#include "finsler/ode.hpp"

namespace finsler {

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  int max_steps = 200000;
  // Include variational/transported columns in the step-size control.
  bool control_all = false;
};

// Initial data for a joint integration. State layout:
//   [x, v, (dx_1, dv_1), ..., (dx_k, dv_k), W_1, ..., W_m]
// with dx_j' = dv_j, dv_j' = -2 dG[(dx_j, dv_j)] (linearized geodesic flow)
// and W_i' = -N(x, v) W_i (linear parallel transport).
struct GeodesicRequest {
  Vector x0;
  Vector v0;
  double T = 1.0;
  std::vector<std::pair<Vector, Vector>> variations;
  std::vector<Vector> transported;
  std::vector<double> stop_times;
  IntegratorOptions options;
};

class GeodesicTrace {
 public:
  GeodesicTrace(const Metric& metric, GeodesicRequest request, OdeSolution solution);

  const Metric& metric() const { return *metric_; }
  int dim() const { return n_; }
  const GeodesicRequest& request() const { return req_; }
  const Vector& x0() const { return req_.x0; }
  const Vector& v0() const { return req_.v0; }
  double T() const { return req_.T; }
  // Last integrated time; below T when the trace left the chart.
  double t_end() const { return sol_.t_end(); }
  bool exited_chart() const { return sol_.left_region(); }
  int variation_count() const { return static_cast<int>(req_.variations.size()); }
  int transported_count() const { return static_cast<int>(req_.transported.size()); }

  const std::vector<double>& times() const { return sol_.times(); }
  const OdeSolution& solution() const { return sol_; }
  const OdeStats& stats() const { return sol_.stats(); }

  Vector state(double t) const { return sol_(t); }
  Vector x(double t) const;
  Vector v(double t) const;
  // Variation j: (dx_j, dv_j); dx_j is the Jacobi field of the variation.
  Vector variation_x(int j, double t) const;
  Vector variation_v(int j, double t) const;
  Vector transported(int i, double t) const;

  // Node-wise accessors (exact integrator values).
  Vector node_x(std::size_t k) const { return sol_.states()[k].head(n_); }
  Vector node_v(std::size_t k) const { return sol_.states()[k].segment(n_, n_); }
  Vector node_variation_x(std::size_t k, int j) const { return sol_.states()[k].segment(2 * n_ + 2 * n_ * j, n_); }
  Vector node_variation_v(std::size_t k, int j) const {
    return sol_.states()[k].segment(3 * n_ + 2 * n_ * j, n_);
  }
  Vector node_transported(std::size_t k, int i) const {
    return sol_.states()[k].segment(transport_offset() + n_ * i, n_);
  }

  // Trace export: t, x1..xn, v1..vn, F
  void write_csv(const std::string& path) const;

 private:
  int transport_offset() const { return 2 * n_ + 2 * n_ * variation_count(); }

  const Metric* metric_;
  GeodesicRequest req_;
  OdeSolution sol_;
  int n_;
};

// Joint integration; validates v0 != 0 and x0 in the chart. Leaving the
// chart truncates the trace (exited_chart()).
GeodesicTrace integrate(const Metric& metric, const GeodesicRequest& request);

GeodesicTrace integrate_geodesic(const Metric& metric, const Vector& x0, const Vector& v0, double T,
                                 const IntegratorOptions& options = {});

// Endpoint of the unit-time geodesic. Throws DomainError if the geodesic
// leaves the chart first.
Vector exp_map(const Metric& metric, const Vector& x0, const Vector& v0, const IntegratorOptions& options = {});

struct BvpOptions {
  double tol = 1e-10;  // |exp(p, v) - q| <= tol * max(1, |q - p|)
  int max_iterations = 30;
  // Warm start: initial velocity and optionally d exp/d v at that velocity.
  std::optional<Vector> v_guess;
  std::optional<Matrix> jacobian_guess;
  IntegratorOptions integrator;
};

struct DistanceResult {
  Vector p;
  Vector q;
  Vector v;              // exp(p, v) = q
  double distance = 0.0;  // F(p, v)
  Matrix jacobian;       // d exp(p, .)/dv at v (possibly a Broyden estimate)
  int iterations = 0;
  int integrations = 0;
  double residual = 0.0;
};

// Forward distance d_F(p, q) by damped Newton shooting. Throws BvpError on
// non-convergence, DomainError when p or q is outside the chart.
DistanceResult local_distance(const Metric& metric, const Vector& p, const Vector& q, const BvpOptions& options = {});

}  // namespace finsler
