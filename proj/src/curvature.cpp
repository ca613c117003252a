#include "finsler/curvature.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "finsler/sampling.hpp"
#include "finsler/spray.hpp"

namespace finsler {

FlagData flag_data(const Metric& m, const Vector& x, const Vector& v, const Vector& w) {
  if (w.size() != m.dim()) throw InputError("w has the wrong dimension");
  FlagData f;
  f.x = x;
  f.v = v;
  f.w = w;
  f.g = fundamental_matrix(m, x, v);
  f.R = berwald_curvature_operator(m, x, v);
  const double vv = v.dot(f.g * v), ww = w.dot(f.g * w), vw = v.dot(f.g * w);
  f.wedge2 = vv * ww - vw * vw;
  if (!(f.wedge2 > 1e-12 * vv * ww)) throw InputError("v and w are linearly dependent");
  f.K = w.dot(f.g * (f.R * w)) / f.wedge2;
  return f;
}

double flag_curvature(const Metric& m, const Vector& x, const Vector& v, const Vector& w) {
  return flag_data(m, x, v, w).K;
}

double JacobiSpectrum::max_transverse() const {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < eigenvalues.size(); ++i)
    if (i != flagpole) best = std::max(best, eigenvalues[i]);
  return eigenvalues.size() > 1 ? best : 0.0;
}

JacobiSpectrum jacobi_spectrum(const Metric& m, const Vector& x, const Vector& v, double rel_tol) {
  const int n = m.dim();
  const Matrix g = fundamental_matrix(m, x, v);
  const Matrix r = berwald_curvature_operator(m, x, v);
  const double f2 = v.dot(g * v);
  const Matrix s = g * r;
  const double gscale = g.cwiseAbs().maxCoeff() * f2;

  JacobiSpectrum out;
  out.asymmetry = (s - s.transpose()).cwiseAbs().maxCoeff() / gscale;
  if (out.asymmetry > 1e-6) {
    std::ostringstream msg;
    msg << "g_v R is not symmetric (relative asymmetry " << out.asymmetry << ")";
    throw ConsistencyError(msg.str());
  }

  // g-orthogonal complement of v
  Eigen::HouseholderQR<Matrix> qr(g * v);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix p = q.rightCols(n - 1);
  const Matrix a = p.transpose() * (0.5 * (s + s.transpose())) * p;
  const Matrix b = p.transpose() * g * p;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, b);

  // merge the flagpole zero into the ascending list
  std::vector<std::pair<double, Vector>> pairs;
  pairs.emplace_back(0.0, Vector(v / std::sqrt(f2)));
  for (int i = 0; i < n - 1; ++i) pairs.emplace_back(es.eigenvalues()[i], Vector(p * es.eigenvectors().col(i)));
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& l, const auto& r2) { return l.first < r2.first; });
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.eigenvalues[i] = pairs[i].first;
    out.eigenvectors.col(i) = pairs[i].second;
    if (pairs[i].first == 0.0 && pairs[i].second.isApprox(v / std::sqrt(f2))) out.flagpole = i;
  }
  out.tolerance = rel_tol * f2;
  out.nonpositive = out.max_transverse() <= out.tolerance;
  return out;
}

void ScanReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  const int n = samples.empty() ? 0 : static_cast<int>(samples.front().x.size());
  out << std::setprecision(17);
  bool first = true;
  auto col = [&](const std::string& name) {
    out << (first ? "" : ",") << name;
    first = false;
  };
  for (int i = 1; i <= n; ++i) col("x" + std::to_string(i));
  for (int i = 1; i <= n; ++i) col("v" + std::to_string(i));
  for (int i = 1; i <= n; ++i) col("lambda" + std::to_string(i));
  col("verdict");
  out << "\n";
  for (const auto& s : samples) {
    for (int i = 0; i < n; ++i) out << s.x[i] << ",";
    for (int i = 0; i < n; ++i) out << s.v[i] << ",";
    for (int i = 0; i < n; ++i) out << s.eigenvalues[i] << ",";
    out << (s.nonpositive ? "nonpositive" : "positive") << "\n";
  }
}

ScanReport nonpositivity_scan(const Metric& m, const Region& region, int sample_count, std::uint64_t seed,
                              double rel_tol) {
  if (sample_count < 1) throw InputError("sample_count must be at least 1");
  if (region.lower.size() != m.dim() || region.upper.size() != m.dim())
    throw InputError("region dimension does not match the metric");
  ScanReport rep;
  rep.seed = seed;
  rep.rel_tol = rel_tol;
  rep.samples.resize(sample_count);
  std::vector<double> top(sample_count);
  parallel_for(sample_count, [&](std::size_t i) {
    ScanSample& s = rep.samples[i];
    s.seed = child_seed(seed, i);
    Rng rng(s.seed);
    s.x = rng.in_box(region.lower, region.upper);
    s.v = rng.unit_vector(m.dim());
    s.v /= m.norm(s.x, s.v);
    const JacobiSpectrum sp = jacobi_spectrum(m, s.x, s.v, rel_tol);
    s.eigenvalues = sp.eigenvalues;
    s.nonpositive = sp.nonpositive;
    top[i] = sp.max_transverse();
  });
  rep.max_eigenvalue = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < sample_count; ++i) {
    if (top[i] > rep.max_eigenvalue) {
      rep.max_eigenvalue = top[i];
      rep.witness = i;
    }
    rep.nonpositive = rep.nonpositive && rep.samples[i].nonpositive;
  }
  return rep;
}

}  // namespace finsler
