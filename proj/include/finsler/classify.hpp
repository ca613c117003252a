#pragma once

// Rigidity tests: transport norm preservation, the Binet-Legendre metric and
// kappa-defect, holonomy loops, sampled Busemann convexity, the convexity
// witness from a positive Jacobi eigenvalue, and the aggregated report.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finsler/curvature.hpp"
#include "finsler/geodesic.hpp"

namespace finsler {

// ---------------------------------------------------------------------------
// Auxiliary Riemannian metric fields

class AuxMetricField {
 public:
  virtual ~AuxMetricField() = default;
  virtual std::string name() const = 0;
  virtual Matrix g(const Vector& x) const = 0;
  // dg[k] = d g / d x^k
  virtual std::vector<Matrix> dg(const Vector& x) const = 0;
  // gamma[i](j, k) = Gamma^i_{jk}
  std::vector<Matrix> christoffel(const Vector& x) const;
};

// Inverse of the second moment of the F-unit ball at x, normalized so the
// Euclidean norm gives the identity. Quadrature starts at `order` nodes per
// angular direction and doubles until the relative change is below tol.
// Dimensions 2 and 3 only. AccuracyError on non-convergence.
Matrix binet_legendre_metric(const Metric& m, const Vector& x, int order = 32, double tol = 1e-6);

std::unique_ptr<AuxMetricField> binet_legendre_field(const Metric& m, int order = 32, double tol = 1e-6);
// g itself, for the riemannian family; InputError otherwise.
std::unique_ptr<AuxMetricField> riemannian_field(const Metric& m);

struct KappaDefect {
  Vector kappa;       // -2G + Gamma_aux(v, v)
  Vector transverse;  // aux-orthogonal to v
  double norm = 0.0;  // |kappa|_aux
  double transverse_norm = 0.0;
  double along_v = 0.0;  // <kappa, v>_aux / |v|_aux^2
};

// InputError when the aux metric is not positive definite at x.
KappaDefect kappa_defect(const Metric& m, const AuxMetricField& aux, const Vector& x, const Vector& v);

// ---------------------------------------------------------------------------
// Sampled transport tests

struct GeodesicWitness {
  std::uint64_t seed = 0;
  Vector x, v, w;
  double t = 0.0;
  double value = 0.0;
};

struct PreservationReport {
  double max_deviation = 0.0;  // sup_t |F(W(t)) - F(W(0))| / F(W(0))
  GeodesicWitness witness;
  int evaluated = 0;
  int skipped = 0;  // geodesics leaving the chart
};

PreservationReport norm_preservation_test(const Metric& m, const Region& region, int n_geodesics, int n_vectors,
                                          double T, std::uint64_t seed, const IntegratorOptions& io = {});

struct AuxInvarianceReport {
  double max_drift = 0.0;  // max |W^T g_aux W - I| over aux-orthonormal frames
  GeodesicWitness witness;
  double max_kappa_along_v = 0.0;  // |<kappa(v), v>_aux| / |v|_aux^2 at the start points
  int evaluated = 0;
  int skipped = 0;
};

AuxInvarianceReport transport_invariance_of_aux(const Metric& m, const AuxMetricField& aux, const Region& region,
                                                int samples, std::uint64_t seed, double T = 1.0,
                                                const IntegratorOptions& io = {});

// ---------------------------------------------------------------------------
// Holonomy

// Transport along the piecewise geodesic p -> q_1 -> ... -> q_k, followed by
// the inverse of the transport along the geodesic p -> q_k. vertices[0] = p.
// BvpError / DomainError propagate.
Matrix loop_map(const Metric& m, const std::vector<Vector>& vertices, const IntegratorOptions& io = {});

struct HolonomyLoop {
  std::uint64_t seed = 0;
  std::vector<Vector> vertices;  // vertices[0] = p
  Matrix map;
  double operator_norm = 0.0;  // largest singular value
  double min_singular = 0.0;
  double f_deviation = 0.0;  // max over test directions |F(Mu) - F(u)| / F(u)
  double composition_error = -1.0;  // quadrilaterals: |M - M_B M_A| for the two sub-triangles
};

struct HolonomySample {
  Vector p;
  std::vector<HolonomyLoop> loops;
  int skipped = 0;
  double max_f_deviation = 0.0;
  double max_identity_deviation = 0.0;  // max |M - I|
  double max_composition_error = 0.0;
  int witness = -1;  // loop with max_f_deviation
};

HolonomySample holonomy_sample(const Metric& m, const Vector& p, int n_loops, double loop_scale, std::uint64_t seed,
                               const IntegratorOptions& io = {});

// ---------------------------------------------------------------------------
// Busemann convexity

struct ConvexityPair {
  std::uint64_t seed = 0;
  int kind = 0;  // 0: independent geodesics, 1: common start, 2: nearby geodesics
  Vector x1, v1, x2, v2;
  std::vector<double> h_forward;  // d(g1(t), g2(t))
  std::vector<double> h_reverse;  // d(g2(t), g1(t))
  double margin = 0.0;  // worst midpoint margin over both orderings
  int t1 = 0, t2 = 0;   // grid indices of the worst triple
  bool reverse = false;
};

struct ConvexityReport {
  std::uint64_t seed = 0;
  int n_pairs = 0;
  int grid = 0;
  double tol = 0.0;
  bool both_orders = true;
  int evaluated = 0;
  int skipped = 0;
  double worst_margin = 0.0;
  int witness = -1;  // index into pairs
  bool violated = false;
  std::vector<ConvexityPair> pairs;  // evaluated pairs only

  std::string summary() const;
  // columns pair, kind, ordering, then h at each grid time
  void write_csv(const std::string& path) const;
};

// SamplingError when more than 20% of the pairs are skipped.
ConvexityReport busemann_convexity_sample(const Metric& m, const Region& region, int n_pairs, int grid, double tol,
                                          std::uint64_t seed, bool both_orders = true,
                                          const IntegratorOptions& io = {});

// ---------------------------------------------------------------------------
// Convexity witness from a positive Jacobi eigenvalue

struct ConvexityWitness {
  std::uint64_t seed = 0;
  Vector x, v, w;  // v is F-unit, w a g_v-unit eigenvector
  double lambda = 0.0;
  double expected = 0.0;           // -lambda F(x, w)
  double second_difference = 0.0;  // of F(x, Jbar(t)) at t = 0
  double raw_second_difference = 0.0;  // of F(gamma(t), J(t))
};

std::optional<ConvexityWitness> jacobi_convexity_witness(const Metric& m, const Vector& x, const Vector& v,
                                                         std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Report

struct ClassifyConfig {
  std::uint64_t seed = 1;
  double rtol = 1e-9;
  double atol = 1e-11;
  int berwald_samples = 200;
  double berwald_rel_tol = 1e-7;
  double berwald_abs_floor = 1e-14;
  int preservation_geodesics = 100;
  int preservation_vectors = 5;
  double preservation_T = 1.0;
  double preservation_tol = 1e-6;
  int scan_samples = 1000;
  double nonpositive_rel_tol = 1e-7;
  int busemann_pairs = 10000;
  int busemann_grid = 5;
  double busemann_tol = 1e-7;
  bool busemann_both_orders = true;
  int holonomy_loops = 50;
  double loop_scale = 0.0;  // 0: half the probe length
  int kappa_samples = 100;
  int quadrature_order = 32;
  double quadrature_tol = 1e-6;

  nlohmann::ordered_json to_json() const;
  // Unknown keys and non-positive tolerances or counts are InputErrors.
  static ClassifyConfig from_json(const nlohmann::json& j);
};

struct ClassificationReport {
  MetricSpec spec;
  ClassifyConfig config;
  bool complete = true;
  std::string failed_stage;
  std::string failure;

  std::optional<bool> berwald;
  std::optional<bool> flag_nonpositive;
  std::optional<bool> busemann_pass;
  std::optional<bool> verdict_consistent;  // (berwald && flag_nonpositive) == busemann_pass

  // evidence
  double berwald_norm_max = 0.0;
  double berwald_scale = 0.0;
  GeodesicWitness berwald_witness;  // x, v; value = berwald_norm
  std::optional<PreservationReport> preservation;
  std::optional<ScanReport> scan;
  std::optional<ConvexityReport> convexity;
  std::optional<HolonomySample> holonomy;
  double kappa_transverse_max = 0.0;
  double kappa_max = 0.0;
  GeodesicWitness kappa_witness;
  std::optional<ConvexityWitness> convexity_witness;

  bool verdict_ok() const;  // all three verdicts favourable
  nlohmann::ordered_json to_json() const;
};

ClassificationReport classify_report(const Metric& m, const ClassifyConfig& config);

}  // namespace finsler
