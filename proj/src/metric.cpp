#include "finsler/metric.hpp"

#include <cmath>

#include "finsler/metric_io.hpp"

namespace finsler {

std::string to_string(Family f) {
  switch (f) {
    case Family::riemannian: return "riemannian";
    case Family::minkowski_quartic: return "minkowski_quartic";
    case Family::randers: return "randers";
    case Family::berwald_product: return "berwald_product";
    case Family::custom_expression: return "custom_expression";
  }
  return "unknown";
}

std::optional<Family> family_from_string(const std::string& s) {
  for (Family f : {Family::riemannian, Family::minkowski_quartic, Family::randers, Family::berwald_product,
                   Family::custom_expression})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

std::string to_string(RiemannianPreset p) {
  switch (p) {
    case RiemannianPreset::euclidean: return "euclidean";
    case RiemannianPreset::poincare: return "poincare";
    case RiemannianPreset::sphere: return "sphere";
  }
  return "unknown";
}

std::optional<RiemannianPreset> riemannian_preset_from_string(const std::string& s) {
  for (auto p : {RiemannianPreset::euclidean, RiemannianPreset::poincare, RiemannianPreset::sphere})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

bool ChartBox::contains(const Vector& x) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  return true;
}

bool ChartBox::in_sample_region(const Vector& x) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower[i] + margin && x[i] <= upper[i] - margin)) return false;
  return true;
}

bool operator==(const ChartBox& a, const ChartBox& b) {
  return a.lower.size() == b.lower.size() && a.lower == b.lower && a.upper == b.upper && a.margin == b.margin &&
         a.probe_length == b.probe_length;
}

bool operator==(const MetricSpec& a, const MetricSpec& b) { return spec_to_json(a) == spec_to_json(b); }

namespace {

std::vector<Expr> coords(int n, int offset) {
  std::vector<Expr> out;
  for (int i = 0; i < n; ++i) out.push_back(Expr::variable(offset + i));
  return out;
}

Expr sum_squares(const std::vector<Expr>& xs, int begin, int end) {
  Expr acc = Expr::constant(0.0);
  for (int i = begin; i < end; ++i) acc = acc + xs[i] * xs[i];
  return acc;
}

// Conformal factor phi(x) with g = phi(x) * delta.
Expr conformal_factor(RiemannianPreset p, const std::vector<Expr>& x, int begin, int end) {
  switch (p) {
    case RiemannianPreset::euclidean:
      return Expr::constant(1.0);
    case RiemannianPreset::poincare:
      return 4.0 / pow(1.0 - sum_squares(x, begin, end), 2);
    case RiemannianPreset::sphere:
      return 4.0 / pow(1.0 + sum_squares(x, begin, end), 2);
  }
  return Expr::constant(1.0);
}

void check_dimension(const MetricSpec& s) {
  if (s.dimension < 1 || s.dimension > kMaxDim)
    throw InputError("dimension must be in [1, " + std::to_string(kMaxDim) + "], got " +
                     std::to_string(s.dimension));
  if (s.chart.lower.size() != s.dimension || s.chart.upper.size() != s.dimension)
    throw InputError("chart box dimension does not match metric dimension");
}

}  // namespace

Metric::Metric(MetricSpec spec) : spec_(std::move(spec)) {
  check_dimension(spec_);
  const int n = spec_.dimension;
  const auto x = coords(n, 0);
  const auto v = coords(n, n);
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) names.push_back("v" + std::to_string(i + 1));

  switch (spec_.family) {
    case Family::riemannian: {
      const auto& p = std::get<RiemannianParams>(spec_.params);
      if (p.preset) {
        f2_expr_ = conformal_factor(*p.preset, x, 0, n) * sum_squares(v, 0, n);
      } else {
        if (static_cast<int>(p.g.size()) != n) throw InputError("riemannian metric matrix must be n x n");
        Expr acc = Expr::constant(0.0);
        for (int i = 0; i < n; ++i) {
          if (static_cast<int>(p.g[i].size()) != n) throw InputError("riemannian metric matrix must be n x n");
          acc = acc + p.g[i][i] * v[i] * v[i];
          for (int j = i + 1; j < n; ++j) acc = acc + 2.0 * p.g[i][j] * v[i] * v[j];
        }
        f2_expr_ = acc;
      }
      norm_expr_ = sqrt(f2_expr_);
      break;
    }
    case Family::minkowski_quartic: {
      const auto& p = std::get<MinkowskiQuarticParams>(spec_.params);
      Expr quartic = Expr::constant(0.0);
      for (int i = 0; i < n; ++i) quartic = quartic + pow(v[i], 4);
      const Expr s = sum_squares(v, 0, n);
      f2_expr_ = sqrt(quartic + p.c * s * s);
      norm_expr_ = sqrt(f2_expr_);
      break;
    }
    case Family::randers: {
      const auto& p = std::get<RandersParams>(spec_.params);
      if (static_cast<int>(p.b.size()) != n) throw InputError("randers one-form must have n components");
      const Expr phi = conformal_factor(p.a, x, 0, n);
      Expr drift = Expr::constant(0.0);
      for (int i = 0; i < n; ++i) drift = drift + p.b[i] * v[i];
      norm_expr_ = sqrt(phi * sum_squares(v, 0, n)) + drift;
      f2_expr_ = norm_expr_ * norm_expr_;
      // |b|_a^2 = |b|^2 / phi for a = phi * delta
      drift_norm_tape_ = Tape(sum_squares(p.b, 0, n) / phi, 2 * n, names);
      break;
    }
    case Family::berwald_product: {
      const auto& p = std::get<BerwaldProductParams>(spec_.params);
      if (n < 3) throw InputError("berwald_product needs dimension >= 3 (disk factor plus flat factor)");
      const Expr f1sq = conformal_factor(RiemannianPreset::poincare, x, 0, 2) * sum_squares(v, 0, 2);
      const Expr f2sq = sum_squares(v, 2, n);
      const Expr sum = f1sq + f2sq;
      f2_expr_ = sqrt(f1sq * f1sq + f2sq * f2sq + p.c * sum * sum);
      norm_expr_ = sqrt(f2_expr_);
      break;
    }
    case Family::custom_expression: {
      const auto& p = std::get<CustomParams>(spec_.params);
      f2_expr_ = p.f2;
      norm_expr_ = sqrt(f2_expr_);
      break;
    }
  }
  f2_tape_ = Tape(f2_expr_, 2 * n, names);
  norm_tape_ = Tape(norm_expr_, 2 * n, names);
}

double Metric::norm_unchecked(const double* x, const double* v) const {
  bool zero = true;
  for (int i = 0; i < dim(); ++i) zero = zero && v[i] == 0.0;
  if (zero) return 0.0;
  return f<double>(x, v);
}

double Metric::norm(const Vector& x, const Vector& v) const {
  if (x.size() != dim() || v.size() != dim()) throw InputError("point/vector dimension mismatch");
  if (!x.allFinite() || !v.allFinite()) throw InputError("non-finite input to eval_norm");
  if (!chart().contains(x)) throw DomainError("point outside the chart domain");
  return norm_unchecked(x.data(), v.data());
}

std::optional<double> Metric::drift_norm(const Vector& x) const {
  if (spec_.family != Family::randers) return std::nullopt;
  std::array<double, 2 * kMaxDim> z{};
  for (int i = 0; i < dim(); ++i) z[i] = x[i];
  return std::sqrt(drift_norm_tape_(std::span<const double>(z.data(), 2 * dim())));
}

double eval_norm(const Metric& metric, const Vector& x, const Vector& v) { return metric.norm(x, v); }

// ---------------------------------------------------------------------------
// Built-in families

namespace families {

namespace {
ChartBox box(int n, double lo, double hi, double margin, double probe) {
  ChartBox b;
  b.lower = Vector::Constant(n, lo);
  b.upper = Vector::Constant(n, hi);
  b.margin = margin;
  b.probe_length = probe;
  return b;
}
}  // namespace

MetricSpec euclidean(int n) {
  MetricSpec s;
  s.name = "euclidean";
  s.family = Family::riemannian;
  s.dimension = n;
  s.params = RiemannianParams{RiemannianPreset::euclidean, {}};
  s.chart = box(n, -1.0, 1.0, 0.5, 0.5);
  return s;
}

MetricSpec poincare_disk() {
  MetricSpec s;
  s.name = "poincare";
  s.family = Family::riemannian;
  s.dimension = 2;
  s.params = RiemannianParams{RiemannianPreset::poincare, {}};
  // The box corners reach |x| = 0.99; samples stay within |x| <= 0.5 and
  // probes of hyperbolic length 0.4 move at most 0.2 in coordinates.
  s.chart = box(2, -0.7, 0.7, 0.35, 0.4);
  return s;
}

MetricSpec sphere_chart() {
  MetricSpec s;
  s.name = "sphere_chart";
  s.family = Family::riemannian;
  s.dimension = 2;
  s.params = RiemannianParams{RiemannianPreset::sphere, {}};
  s.chart = box(2, -2.5, 2.5, 2.0, 1.0);
  return s;
}

MetricSpec minkowski_quartic(double c, int n) {
  MetricSpec s;
  s.name = "minkowski_quartic";
  s.family = Family::minkowski_quartic;
  s.dimension = n;
  s.params = MinkowskiQuarticParams{c};
  s.chart = box(n, -1.0, 1.0, 0.5, 0.5);
  return s;
}

MetricSpec randers_constant(double b1, double b2) {
  MetricSpec s;
  s.name = "randers_const";
  s.family = Family::randers;
  s.dimension = 2;
  s.params = RandersParams{RiemannianPreset::euclidean, {Expr::constant(b1), Expr::constant(b2)}};
  s.chart = box(2, -3.0, 3.0, 2.5, 1.0);
  return s;
}

MetricSpec randers_sine(double amplitude) {
  MetricSpec s;
  s.name = "randers_sine";
  s.family = Family::randers;
  s.dimension = 2;
  s.params = RandersParams{RiemannianPreset::euclidean,
                           {Expr::constant(0.0), amplitude * sin(Expr::variable(0))}};
  s.chart = box(2, -1.5, 1.5, 0.9, 0.6);
  return s;
}

MetricSpec berwald_product(double c) {
  MetricSpec s;
  s.name = "berwald_product";
  s.family = Family::berwald_product;
  s.dimension = 3;
  s.params = BerwaldProductParams{c};
  ChartBox b;
  b.lower = Vector::Constant(3, -0.7);
  b.upper = Vector::Constant(3, 0.7);
  b.margin = 0.35;
  b.probe_length = 0.4;
  s.chart = b;
  return s;
}

MetricSpec linear_pullback(const MetricSpec& base, const Matrix& a) {
  const Metric m(base);
  const int n = base.dimension;
  if (a.rows() != n || a.cols() != n) throw InputError("pullback matrix must be n x n");
  std::vector<Expr> repl;
  for (int i = 0; i < n; ++i) repl.push_back(Expr::variable(i));
  for (int i = 0; i < n; ++i) {
    Expr row = Expr::constant(0.0);
    for (int j = 0; j < n; ++j)
      if (a(i, j) != 0.0) row = row + a(i, j) * Expr::variable(n + j);
    repl.push_back(row);
  }
  MetricSpec s;
  s.name = base.name + "_pullback";
  s.family = Family::custom_expression;
  s.dimension = n;
  s.params = CustomParams{substitute(m.f2_expression(), repl)};
  s.chart = base.chart;
  return s;
}

}  // namespace families

}  // namespace finsler
