#pragma once

// Finsler norm families on a single coordinate chart.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "finsler/expression.hpp"

namespace finsler {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Largest supported chart dimension. Internal jet kernels use fixed-size
// buffers of this length.
inline constexpr int kMaxDim = 4;

enum class Family { riemannian, minkowski_quartic, randers, berwald_product, custom_expression };

std::string to_string(Family f);
std::optional<Family> family_from_string(const std::string& s);

// Axis-aligned chart box. Samplers draw base points from the box shrunk by
// `margin` on every side and keep probe geodesics at F-length <=
// `probe_length`, which the fixtures choose so that probes stay in the chart.
struct ChartBox {
  Vector lower;
  Vector upper;
  double margin = 0.0;
  double probe_length = 0.5;

  bool contains(const Vector& x) const;
  Vector sample_lower() const { return lower.array() + margin; }
  Vector sample_upper() const { return upper.array() - margin; }
  bool in_sample_region(const Vector& x) const;
  friend bool operator==(const ChartBox&, const ChartBox&);
};

// Axis-aligned sampling box.
struct Region {
  Vector lower;
  Vector upper;
  bool contains(const Vector& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
};

// Named Riemannian metric fields: euclidean (delta), poincare
// (4 delta / (1 - |x|^2)^2), sphere (stereographic round sphere,
// 4 delta / (1 + |x|^2)^2).
enum class RiemannianPreset { euclidean, poincare, sphere };
std::string to_string(RiemannianPreset p);
std::optional<RiemannianPreset> riemannian_preset_from_string(const std::string& s);

struct RiemannianParams {
  // Either a preset or an explicit symmetric matrix of expressions in x.
  std::optional<RiemannianPreset> preset = RiemannianPreset::euclidean;
  std::vector<std::vector<Expr>> g;
};

// F^4 = sum v_i^4 + c (sum v_i^2)^2, x-independent.
struct MinkowskiQuarticParams {
  double c = 1.0;
};

// F = sqrt(a(x)(v, v)) + b(x) . v with a euclidean or poincare.
struct RandersParams {
  RiemannianPreset a = RiemannianPreset::euclidean;
  std::vector<Expr> b;  // one expression in x per coordinate
};

// Poincare disk in (x1, x2) times a flat factor in the remaining coordinates,
// combined as F^4 = F1^4 + F2^4 + c (F1^2 + F2^2)^2.
struct BerwaldProductParams {
  double c = 1.0;
};

// F^2 given directly as an expression in (x, v).
struct CustomParams {
  Expr f2;
};

using FamilyParams =
    std::variant<RiemannianParams, MinkowskiQuarticParams, RandersParams, BerwaldProductParams, CustomParams>;

struct MetricSpec {
  Family family = Family::riemannian;
  int dimension = 2;
  FamilyParams params = RiemannianParams{};
  ChartBox chart;
  std::string name;  // informational label, e.g. fixture name

  // Structural equality through the canonical JSON form.
  friend bool operator==(const MetricSpec& a, const MetricSpec& b);
};

// Compiled, immutable Finsler metric. All evaluation entry points are pure
// and safe to call concurrently.
class Metric {
 public:
  explicit Metric(MetricSpec spec);

  const MetricSpec& spec() const { return spec_; }
  int dim() const { return spec_.dimension; }
  const ChartBox& chart() const { return spec_.chart; }
  Region sampling_region() const { return {spec_.chart.sample_lower(), spec_.chart.sample_upper()}; }

  // F(x, v) with chart-domain and finiteness checks; exactly 0 for v = 0.
  double norm(const Vector& x, const Vector& v) const;

  // F(x, v) without domain checks (x may sit anywhere the expression is
  // defined). Used by integrators and quadrature.
  double norm_unchecked(const double* x, const double* v) const;

  // F^2 on any scalar type (double or Taylor jets); no domain checks.
  template <class S>
  S f2(const S* x, const S* v) const {
    std::array<S, 2 * kMaxDim> z;
    const int n = dim();
    for (int i = 0; i < n; ++i) {
      z[i] = x[i];
      z[n + i] = v[i];
    }
    return f2_tape_.evaluate<S>(std::span<const S>(z.data(), 2 * n));
  }

  // F itself on any scalar type; for randers this is sqrt(a) + b.v, which can
  // be negative when |b|_a >= 1.
  template <class S>
  S f(const S* x, const S* v) const {
    std::array<S, 2 * kMaxDim> z;
    const int n = dim();
    for (int i = 0; i < n; ++i) {
      z[i] = x[i];
      z[n + i] = v[i];
    }
    return norm_tape_.evaluate<S>(std::span<const S>(z.data(), 2 * n));
  }

  const Expr& f2_expression() const { return f2_expr_; }
  const Tape& f2_tape() const { return f2_tape_; }

  // For randers: |b(x)|_a. Empty for other families.
  std::optional<double> drift_norm(const Vector& x) const;

  // True when F^2 is quadratic in v by construction (riemannian family).
  bool is_riemannian() const { return spec_.family == Family::riemannian; }

 private:
  MetricSpec spec_;
  Expr f2_expr_;
  Expr norm_expr_;
  Tape f2_tape_;
  Tape norm_tape_;
  Tape drift_norm_tape_;  // randers |b|_a^2
};

// eval_norm(spec, x, v)
double eval_norm(const Metric& metric, const Vector& x, const Vector& v);

struct ValidationIssue {
  std::string property;  // homogeneity | positivity | definiteness | drift | evaluation
  Vector x;
  Vector v;
  std::string detail;
};

struct ValidationReport {
  bool passed = true;
  int samples = 0;
  std::vector<ValidationIssue> issues;
};

// Samples (x, v) pairs (plus fixed probe directions: coordinate axes and
// diagonals) and checks homogeneity, positivity, and positive definiteness of
// g_v with smallest eigenvalue >= pd_floor * largest. Deterministic in seed.
ValidationReport validate_spec(const Metric& metric, int sample_count, std::uint64_t seed, double pd_floor = 1e-8);

// Builders for the built-in families.
namespace families {
MetricSpec euclidean(int n = 2);
MetricSpec poincare_disk();
MetricSpec sphere_chart();
MetricSpec minkowski_quartic(double c = 1.0, int n = 2);
MetricSpec randers_constant(double b1 = 0.5, double b2 = 0.0);
MetricSpec randers_sine(double amplitude = 0.3);
MetricSpec berwald_product(double c = 1.0);
// F^2 = q(A v) for a norm given by an F^2 expression over variables
// 0..n-1 (the vector components), composed with a linear map.
MetricSpec linear_pullback(const MetricSpec& base, const Matrix& a);
}  // namespace families

}  // namespace finsler
