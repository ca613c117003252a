#include <cmath>
#include <sstream>

#include "finsler/metric.hpp"
#include "finsler/sampling.hpp"
#include "finsler/spray.hpp"

namespace finsler {

namespace {

// Coordinate axes and diagonals, both signs.
std::vector<Vector> probe_directions(int n) {
  std::vector<Vector> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(Vector::Unit(n, i));
    out.push_back(-Vector::Unit(n, i));
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (double si : {1.0, -1.0})
        for (double sj : {1.0, -1.0})
          out.push_back((si * Vector::Unit(n, i) + sj * Vector::Unit(n, j)) / std::sqrt(2.0));
  return out;
}

std::string fmt(double a) {
  std::ostringstream os;
  os.precision(17);
  os << a;
  return os.str();
}

}  // namespace

ValidationReport validate_spec(const Metric& metric, int sample_count, std::uint64_t seed, double pd_floor) {
  if (sample_count < 1) throw InputError("sample_count must be at least 1");
  const int n = metric.dim();
  const ChartBox& box = metric.chart();
  Rng rng(seed);
  ValidationReport rep;
  constexpr std::size_t kMaxIssues = 50;
  auto issue = [&](const char* prop, const Vector& x, const Vector& v, const std::string& detail) {
    rep.passed = false;
    if (rep.issues.size() < kMaxIssues) rep.issues.push_back({prop, x, v, detail});
  };

  auto check_pair = [&](const Vector& x, const Vector& v) {
    ++rep.samples;
    double f = 0.0;
    try {
      f = metric.norm(x, v);
    } catch (const EvaluationError& e) {
      issue("evaluation", x, v, e.what());
      return;
    }
    if (!(f > 0.0) || !std::isfinite(f)) {
      issue("positivity", x, v, "F = " + fmt(f));
      return;
    }
    for (double lambda : {0.5, 2.0, 10.0}) {
      const double fl = metric.norm(x, Vector(lambda * v));
      if (!(std::fabs(fl - lambda * f) <= 1e-12 * lambda * f))
        issue("homogeneity", x, v, "F(" + fmt(lambda) + " v) = " + fmt(fl) + " but " + fmt(lambda) + " F(v) = " +
                                       fmt(lambda * f));
    }
    try {
      const Matrix g = fundamental_matrix(metric, x, v);
      Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues()[0];
      const double hi = es.eigenvalues()[n - 1];
      if (!(lo > 0.0) || lo < pd_floor * hi)
        issue("definiteness", x, v, "g_v eigenvalues in [" + fmt(lo) + ", " + fmt(hi) + "]");
    } catch (const EvaluationError& e) {
      issue("evaluation", x, v, e.what());
    }
  };

  auto check_drift = [&](const Vector& x) {
    const auto b = metric.drift_norm(x);
    if (!b || *b < 1.0) return;
    // Witness along -b, where F = |v|_a (1 - |b|_a) <= 0.
    const auto& rp = std::get<RandersParams>(metric.spec().params);
    std::vector<double> z(2 * n, 0.0);
    for (int i = 0; i < n; ++i) z[i] = x[i];
    Vector dir(n);
    for (int i = 0; i < n; ++i) dir[i] = -Tape(rp.b[i], 2 * n)(z);
    issue("drift", x, dir / dir.norm(), "|b|_a = " + fmt(*b) + " >= 1");
  };

  const Vector center = 0.5 * (box.lower + box.upper);
  const auto probes = probe_directions(n);
  for (const auto& v : probes) check_pair(center, v);
  check_drift(center);
  for (int s = 0; s < sample_count; ++s) {
    const Vector x = rng.in_box(box.sample_lower(), box.sample_upper());
    const Vector v = rng.unit_vector(n) * rng.uniform(0.1, 3.0);
    check_pair(x, v);
    check_drift(x);
    check_pair(x, probes[s % probes.size()]);
  }
  return rep;
}

}  // namespace finsler
