#include "finsler/classify.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "finsler/jets.hpp"
#include "finsler/metric_io.hpp"
#include "finsler/sampling.hpp"
#include "finsler/spray.hpp"
#include "finsler/taylor.hpp"
#include "finsler/transport.hpp"
#include "finsler/version.hpp"

namespace finsler {

namespace {

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Quadrature

struct GaussRule {
  std::vector<double> x, w;
};

GaussRule gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  cache.emplace(n, r);
  return r;
}

// Returns the n x n entries (row-major) of the normalized inverse metric.
template <class S>
std::array<S, 9> bl_inverse(const Metric& m, const S* x, int order) {
  using std::pow;
  const int n = m.dim();
  std::array<S, 9> acc{};
  for (auto& a : acc) a = S(0.0);
  S vol(0.0);
  std::array<S, kMaxDim> th;
  auto add = [&](double weight, const double* dir) {
    for (int i = 0; i < n; ++i) th[i] = S(dir[i]);
    const S f2 = m.f2<S>(x, th.data());
    const S moment = pow(f2, -0.5 * (n + 2)) * weight;
    vol += pow(f2, -0.5 * n) * (weight / n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) acc[i * n + j] += moment * (dir[i] * dir[j]);
  };
  if (n == 2) {
    const double w = 2.0 * kPi / order;
    for (int k = 0; k < order; ++k) {
      const double a = w * k;
      const double dir[2] = {std::cos(a), std::sin(a)};
      add(w, dir);
    }
  } else {
    const GaussRule gl = gauss_legendre(order);
    const int az = 2 * order;
    const double wa = 2.0 * kPi / az;
    for (int i = 0; i < order; ++i) {
      const double u = gl.x[i], s = std::sqrt(1.0 - u * u);
      for (int k = 0; k < az; ++k) {
        const double a = wa * k;
        const double dir[3] = {s * std::cos(a), s * std::sin(a), u};
        add(gl.w[i] * wa, dir);
      }
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      acc[i * n + j] = acc[i * n + j] / vol;
      acc[j * n + i] = acc[i * n + j];
    }
  return acc;
}

Matrix to_matrix(const std::array<double, 9>& a, int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = a[i * n + j];
  return m;
}

void check_bl_args(const Metric& m, const Vector& x, int order, double tol) {
  if (m.dim() != 2 && m.dim() != 3) throw InputError("Binet-Legendre quadrature supports dimensions 2 and 3 only");
  if (x.size() != m.dim()) throw InputError("point has the wrong dimension");
  if (order < 4) throw InputError("quadrature order must be at least 4");
  if (!(tol > 0.0)) throw InputError("quadrature tolerance must be positive");
}

// Converged inverse metric and the order that achieved it.
std::pair<Matrix, int> bl_inverse_adaptive(const Metric& m, const Vector& x, int order, double tol) {
  check_bl_args(m, x, order, tol);
  const int n = m.dim();
  const int max_order = n == 2 ? 8192 : 1024;
  Matrix prev = to_matrix(bl_inverse<double>(m, x.data(), order), n);
  for (int o = 2 * order; o <= max_order; o *= 2) {
    Matrix cur = to_matrix(bl_inverse<double>(m, x.data(), o), n);
    if (!cur.allFinite()) throw EvaluationError("Binet-Legendre quadrature produced non-finite values");
    const double change = (cur - prev).cwiseAbs().maxCoeff() / cur.cwiseAbs().maxCoeff();
    if (change < tol) return {cur, o};
    prev = std::move(cur);
  }
  std::ostringstream msg;
  msg << "Binet-Legendre quadrature did not converge to " << tol << " by order " << max_order;
  throw AccuracyError(msg.str());
}

class BinetLegendreField : public AuxMetricField {
 public:
  BinetLegendreField(const Metric& m, int order, double tol) : m_(m), order_(order), tol_(tol) {}
  std::string name() const override { return "binet_legendre"; }
  Matrix g(const Vector& x) const override { return binet_legendre_metric(m_, x, order_, tol_); }
  std::vector<Matrix> dg(const Vector& x) const override {
    const int n = m_.dim();
    const auto [ginv, used] = bl_inverse_adaptive(m_, x, order_, tol_);
    const Matrix gm = ginv.inverse();
    using T1 = Taylor<double, 1>;
    std::vector<Matrix> out(n);
    for (int k = 0; k < n; ++k) {
      std::array<T1, kMaxDim> xs;
      for (int i = 0; i < n; ++i) xs[i] = T1::variable(x[i], i == k ? 1.0 : 0.0);
      const auto jet = bl_inverse<T1>(m_, xs.data(), used);
      Matrix d(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d(i, j) = jet[i * n + j].c[1];
      out[k] = -gm * d * gm;
    }
    return out;
  }

 private:
  const Metric& m_;
  int order_;
  double tol_;
};

class RiemannianField : public AuxMetricField {
 public:
  explicit RiemannianField(const Metric& m) : m_(m) {}
  std::string name() const override { return "riemannian"; }
  Matrix g(const Vector& x) const override { return fundamental_matrix(m_, x, Vector::Unit(m_.dim(), 0)); }
  std::vector<Matrix> dg(const Vector& x) const override {
    const int n = m_.dim();
    Vector base(2 * n);
    base << x, Vector::Unit(n, 0);
    std::vector<Matrix> out(n, Matrix(n, n));
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          std::vector<int> a(2 * n, 0);
          a[k] += 1;
          a[n + i] += 1;
          a[n + j] += 1;
          out[k](i, j) = out[k](j, i) = 0.5 * partials(m_.f2_tape(), base, a);
        }
    return out;
  }

 private:
  const Metric& m_;
};

// Random point in the region and a velocity of F-length `length`.
std::pair<Vector, Vector> sample_point(const Metric& m, const Region& region, Rng& rng, double length) {
  const Vector x = rng.in_box(region.lower, region.upper);
  Vector v = rng.unit_vector(m.dim());
  v *= length / m.norm(x, v);
  return {x, v};
}

void check_region(const Metric& m, const Region& region) {
  if (region.lower.size() != m.dim() || region.upper.size() != m.dim())
    throw InputError("region dimension does not match the metric");
  if (!((region.upper.array() > region.lower.array()).all())) throw InputError("region is empty");
  if (!m.chart().contains(region.lower) || !m.chart().contains(region.upper))
    throw DomainError("region is not inside the chart");
}

}  // namespace

// ---------------------------------------------------------------------------
// Aux fields and kappa

std::vector<Matrix> AuxMetricField::christoffel(const Vector& x) const {
  const int n = static_cast<int>(x.size());
  const Matrix gi = g(x).inverse();
  const auto d = dg(x);
  std::vector<Matrix> gam(n, Matrix::Zero(n, n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += gi(i, l) * (d[j](l, k) + d[k](l, j) - d[l](j, k));
        gam[i](j, k) = 0.5 * acc;
      }
  return gam;
}

Matrix binet_legendre_metric(const Metric& m, const Vector& x, int order, double tol) {
  return bl_inverse_adaptive(m, x, order, tol).first.inverse();
}

std::unique_ptr<AuxMetricField> binet_legendre_field(const Metric& m, int order, double tol) {
  check_bl_args(m, Vector::Zero(m.dim()), order, tol);
  return std::make_unique<BinetLegendreField>(m, order, tol);
}

std::unique_ptr<AuxMetricField> riemannian_field(const Metric& m) {
  if (m.spec().family != Family::riemannian) throw InputError("metric is not of the riemannian family");
  return std::make_unique<RiemannianField>(m);
}

KappaDefect kappa_defect(const Metric& m, const AuxMetricField& aux, const Vector& x, const Vector& v) {
  const int n = m.dim();
  const Matrix ga = aux.g(x);
  if (Eigen::LLT<Matrix>(ga).info() != Eigen::Success) throw InputError("aux metric is not positive definite at x");
  const SprayData sp = spray_coefficients(m, x, v);
  const auto gam = aux.christoffel(x);
  KappaDefect k;
  k.kappa.resize(n);
  for (int i = 0; i < n; ++i) k.kappa[i] = -2.0 * sp.G[i] + v.dot(gam[i] * v);
  const double vv = v.dot(ga * v);
  k.along_v = k.kappa.dot(ga * v) / vv;
  k.transverse = k.kappa - k.along_v * v;
  k.norm = std::sqrt(std::max(0.0, k.kappa.dot(ga * k.kappa)));
  k.transverse_norm = std::sqrt(std::max(0.0, k.transverse.dot(ga * k.transverse)));
  return k;
}

// ---------------------------------------------------------------------------
// Sampled transport tests

PreservationReport norm_preservation_test(const Metric& m, const Region& region, int n_geodesics, int n_vectors,
                                          double T, std::uint64_t seed, const IntegratorOptions& io) {
  if (n_geodesics < 1 || n_vectors < 1) throw InputError("sample counts must be at least 1");
  check_region(m, region);
  const int n = m.dim();
  std::vector<std::optional<GeodesicWitness>> best(n_geodesics);
  parallel_for(n_geodesics, [&](std::size_t i) {
    const std::uint64_t s = child_seed(seed, i);
    Rng rng(s);
    const auto [x, v] = sample_point(m, region, rng, m.chart().probe_length);
    std::vector<Vector> ws;
    for (int k = 0; k < n_vectors; ++k) ws.push_back(rng.unit_vector(n));
    const ParallelFrame f = parallel_transport(m, x, v, T, ws, io);
    if (f.trace.exited_chart()) return;
    GeodesicWitness w{s, x, v, {}, 0.0, 0.0};
    for (int k = 0; k < n_vectors; ++k) {
      const auto& hist = f.norm_history[k];
      for (std::size_t node = 0; node < hist.size(); ++node) {
        const double dev = std::fabs(hist[node] - hist[0]) / hist[0];
        if (dev > w.value || w.w.size() == 0) {
          w.value = dev;
          w.w = ws[k];
          w.t = f.times()[node];
        }
      }
    }
    best[i] = w;
  });
  PreservationReport rep;
  for (const auto& b : best) {
    if (!b) {
      ++rep.skipped;
      continue;
    }
    ++rep.evaluated;
    if (rep.evaluated == 1 || b->value > rep.max_deviation) {
      rep.max_deviation = b->value;
      rep.witness = *b;
    }
  }
  return rep;
}

AuxInvarianceReport transport_invariance_of_aux(const Metric& m, const AuxMetricField& aux, const Region& region,
                                                int samples, std::uint64_t seed, double T,
                                                const IntegratorOptions& io) {
  if (samples < 1) throw InputError("sample count must be at least 1");
  check_region(m, region);
  const int n = m.dim();
  struct Out {
    GeodesicWitness w;
    double along = 0.0;
  };
  std::vector<std::optional<Out>> res(samples);
  parallel_for(samples, [&](std::size_t i) {
    const std::uint64_t s = child_seed(seed, i);
    Rng rng(s);
    const auto [x, v] = sample_point(m, region, rng, m.chart().probe_length);
    const Matrix g0 = aux.g(x);
    const Matrix l = Eigen::LLT<Matrix>(g0).matrixL();
    const Matrix e0 = l.transpose().inverse();
    std::vector<Vector> cols;
    for (int k = 0; k < n; ++k) cols.push_back(e0.col(k));
    const ParallelFrame f = parallel_transport(m, x, v, T, cols, io);
    if (f.trace.exited_chart()) return;
    Out o{{s, x, v, {}, 0.0, 0.0}, 0.0};
    for (std::size_t node = 0; node < f.times().size(); ++node) {
      const Matrix e = f.node_matrix(node);
      const Matrix gram = e.transpose() * aux.g(f.trace.node_x(node)) * e;
      const double drift = (gram - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
      if (drift >= o.w.value) {
        o.w.value = drift;
        o.w.t = f.times()[node];
      }
    }
    o.along = std::fabs(kappa_defect(m, aux, x, v).along_v);
    res[i] = o;
  });
  AuxInvarianceReport rep;
  for (const auto& r : res) {
    if (!r) {
      ++rep.skipped;
      continue;
    }
    ++rep.evaluated;
    if (rep.evaluated == 1 || r->w.value > rep.max_drift) {
      rep.max_drift = r->w.value;
      rep.witness = r->w;
    }
    rep.max_kappa_along_v = std::max(rep.max_kappa_along_v, r->along);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Holonomy

namespace {

Matrix leg_transport(const Metric& m, const Vector& a, const Vector& b, const IntegratorOptions& io) {
  BvpOptions bo;
  bo.integrator = io;
  const DistanceResult d = local_distance(m, a, b, bo);
  const int n = m.dim();
  std::vector<Vector> basis;
  for (int k = 0; k < n; ++k) basis.push_back(Vector::Unit(n, k));
  const ParallelFrame f = parallel_transport(m, a, d.v, 1.0, basis, io);
  if (f.trace.exited_chart()) throw DomainError("loop leg leaves the chart");
  return f.node_matrix(f.times().size() - 1);
}

std::vector<Vector> test_directions(int n) {
  std::vector<Vector> dirs;
  if (n == 2) {
    for (int k = 0; k < 16; ++k) dirs.push_back(Vector{{std::cos(kPi * k / 8), std::sin(kPi * k / 8)}});
  } else {
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c) {
          if (a == 0 && b == 0 && c == 0) continue;
          Vector d(3);
          d << a, b, c;
          dirs.push_back(d.normalized());
        }
  }
  return dirs;
}

}  // namespace

Matrix loop_map(const Metric& m, const std::vector<Vector>& vertices, const IntegratorOptions& io) {
  if (vertices.size() < 3) throw InputError("a loop needs at least three vertices");
  for (const auto& q : vertices)
    if (q.size() != m.dim()) throw InputError("loop vertex has the wrong dimension");
  Matrix acc = Matrix::Identity(m.dim(), m.dim());
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) acc = leg_transport(m, vertices[i], vertices[i + 1], io) * acc;
  return leg_transport(m, vertices.front(), vertices.back(), io).partialPivLu().solve(acc);
}

HolonomySample holonomy_sample(const Metric& m, const Vector& p, int n_loops, double loop_scale, std::uint64_t seed,
                               const IntegratorOptions& io) {
  if (n_loops < 1) throw InputError("n_loops must be at least 1");
  if (!(loop_scale > 0.0)) throw InputError("loop_scale must be positive");
  if (p.size() != m.dim() || !m.chart().contains(p)) throw DomainError("base point is outside the chart");
  const int n = m.dim();
  const auto dirs = test_directions(n);
  std::vector<std::optional<HolonomyLoop>> res(n_loops);
  parallel_for(n_loops, [&](std::size_t i) {
    HolonomyLoop loop;
    loop.seed = child_seed(seed, i);
    Rng rng(loop.seed);
    const int corners = i % 2 == 0 ? 2 : 3;
    loop.vertices.push_back(p);
    for (int k = 0; k < corners; ++k) loop.vertices.push_back(p + loop_scale * rng.uniform(0.5, 1.0) * rng.unit_vector(n));
    try {
      loop.map = loop_map(m, loop.vertices, io);
      if (corners == 3) {
        const Matrix a = loop_map(m, {p, loop.vertices[1], loop.vertices[2]}, io);
        const Matrix b = loop_map(m, {p, loop.vertices[2], loop.vertices[3]}, io);
        loop.composition_error = (loop.map - b * a).cwiseAbs().maxCoeff();
      }
    } catch (const BvpError&) {
      return;
    } catch (const DomainError&) {
      return;
    }
    Eigen::JacobiSVD<Matrix> svd(loop.map);
    loop.operator_norm = svd.singularValues()(0);
    loop.min_singular = svd.singularValues()(n - 1);
    for (const auto& u : dirs) {
      const double fu = m.norm(p, u);
      loop.f_deviation = std::max(loop.f_deviation, std::fabs(m.norm(p, Vector(loop.map * u)) - fu) / fu);
    }
    res[i] = std::move(loop);
  });
  HolonomySample hs;
  hs.p = p;
  for (auto& r : res) {
    if (!r) {
      ++hs.skipped;
      continue;
    }
    const double id = (r->map - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    hs.max_identity_deviation = std::max(hs.max_identity_deviation, id);
    hs.max_composition_error = std::max(hs.max_composition_error, r->composition_error);
    if (hs.witness < 0 || r->f_deviation > hs.max_f_deviation) {
      hs.max_f_deviation = r->f_deviation;
      hs.witness = static_cast<int>(hs.loops.size());
    }
    hs.loops.push_back(std::move(*r));
  }
  return hs;
}

// ---------------------------------------------------------------------------
// Busemann convexity

namespace {

// h on the grid for one ordering; BvpError / DomainError propagate.
std::vector<double> distance_profile(const Metric& m, const std::vector<Vector>& from, const std::vector<Vector>& to,
                                     const IntegratorOptions& io) {
  std::vector<double> h(from.size());
  BvpOptions opt;
  opt.integrator = io;
  for (std::size_t k = 0; k < from.size(); ++k) {
    if ((from[k] - to[k]).norm() == 0.0) {
      h[k] = 0.0;
      continue;
    }
    DistanceResult d;
    try {
      d = local_distance(m, from[k], to[k], opt);
    } catch (const BvpError&) {
      if (!opt.v_guess) throw;
      BvpOptions cold;
      cold.integrator = io;
      d = local_distance(m, from[k], to[k], cold);
    }
    h[k] = d.distance;
    opt.v_guess = d.v;
    opt.jacobian_guess = d.jacobian;
  }
  return h;
}

void worst_midpoint(const std::vector<double>& h, bool reverse, ConvexityPair& pair, bool& first) {
  const int g = static_cast<int>(h.size());
  for (int i = 0; i < g; ++i)
    for (int j = i + 2; j < g; j += 2) {
      const double margin = h[(i + j) / 2] - 0.5 * (h[i] + h[j]);
      if (first || margin > pair.margin) {
        pair.margin = margin;
        pair.t1 = i;
        pair.t2 = j;
        pair.reverse = reverse;
        first = false;
      }
    }
}

}  // namespace

namespace {
std::string shortest(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}
}  // namespace

std::string ConvexityReport::summary() const {
  if (violated) return "violation found: midpoint margin " + shortest(worst_margin) + " exceeds tolerance " + shortest(tol);
  return "no violation found at tolerance " + shortest(tol) + " over " + std::to_string(evaluated) + " samples";
}

void ConvexityReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << std::setprecision(17) << "pair,kind,ordering";
  for (int k = 0; k < grid; ++k) out << ",h" << k;
  out << "\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto row = [&](const char* ord, const std::vector<double>& h) {
      out << i << "," << p.kind << "," << ord;
      for (double v : h) out << "," << v;
      out << "\n";
    };
    row("forward", p.h_forward);
    if (!p.h_reverse.empty()) row("reverse", p.h_reverse);
  }
}

ConvexityReport busemann_convexity_sample(const Metric& m, const Region& region, int n_pairs, int grid, double tol,
                                          std::uint64_t seed, bool both_orders, const IntegratorOptions& io) {
  if (n_pairs < 1) throw InputError("n_pairs must be at least 1");
  if (grid < 3) throw InputError("grid must have at least 3 points");
  if (!(tol >= 0.0)) throw InputError("tolerance must be nonnegative");
  check_region(m, region);
  const int n = m.dim();
  const double len = m.chart().probe_length;
  std::vector<double> times(grid);
  for (int k = 0; k < grid; ++k) times[k] = static_cast<double>(k) / (grid - 1);

  std::vector<std::optional<ConvexityPair>> res(n_pairs);
  parallel_for(n_pairs, [&](std::size_t i) {
    ConvexityPair p;
    p.seed = child_seed(seed, i);
    p.kind = static_cast<int>(i % 3);
    Rng rng(p.seed);
    auto velocity = [&](const Vector& x) {
      Vector v = rng.unit_vector(n);
      return Vector(v * (len * rng.uniform(0.5, 1.0) / m.norm(x, v)));
    };
    p.x1 = rng.in_box(region.lower, region.upper);
    p.v1 = velocity(p.x1);
    if (p.kind == 0) {
      p.x2 = rng.in_box(region.lower, region.upper);
      p.v2 = velocity(p.x2);
    } else if (p.kind == 1) {
      p.x2 = p.x1;
      p.v2 = velocity(p.x2);
    } else {
      const double scale = (region.upper - region.lower).minCoeff();
      p.x2 = p.x1 + 0.1 * scale * rng.unit_vector(n);
      if (!region.contains(p.x2)) p.x2 = p.x1 - (p.x2 - p.x1);
      if (!region.contains(p.x2)) return;
      p.v2 = p.v1 + 0.3 * p.v1.norm() * rng.unit_vector(n);
    }
    try {
      GeodesicRequest r1, r2;
      r1.x0 = p.x1;
      r1.v0 = p.v1;
      r2.x0 = p.x2;
      r2.v0 = p.v2;
      r1.T = r2.T = 1.0;
      r1.options = r2.options = io;
      r1.stop_times = r2.stop_times = times;
      const GeodesicTrace g1 = integrate(m, r1), g2 = integrate(m, r2);
      if (g1.exited_chart() || g2.exited_chart()) return;
      std::vector<Vector> a, b;
      for (double t : times) {
        a.push_back(g1.x(t));
        b.push_back(g2.x(t));
      }
      p.h_forward = distance_profile(m, a, b, io);
      if (both_orders) p.h_reverse = distance_profile(m, b, a, io);
    } catch (const BvpError&) {
      return;
    } catch (const DomainError&) {
      return;
    }
    bool first = true;
    worst_midpoint(p.h_forward, false, p, first);
    if (both_orders) worst_midpoint(p.h_reverse, true, p, first);
    res[i] = std::move(p);
  });

  ConvexityReport rep;
  rep.seed = seed;
  rep.n_pairs = n_pairs;
  rep.grid = grid;
  rep.tol = tol;
  rep.both_orders = both_orders;
  for (auto& r : res) {
    if (!r) {
      ++rep.skipped;
      continue;
    }
    ++rep.evaluated;
    if (rep.witness < 0 || r->margin > rep.worst_margin) {
      rep.worst_margin = r->margin;
      rep.witness = static_cast<int>(rep.pairs.size());
    }
    rep.pairs.push_back(std::move(*r));
  }
  if (rep.skipped * 5 > n_pairs) {
    std::ostringstream msg;
    msg << "convexity sampler skipped " << rep.skipped << " of " << n_pairs << " pairs";
    throw SamplingError(msg.str());
  }
  rep.violated = rep.worst_margin > tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Witness from a positive Jacobi eigenvalue

std::optional<ConvexityWitness> jacobi_convexity_witness(const Metric& m, const Vector& x, const Vector& v,
                                                         std::uint64_t seed) {
  const int n = m.dim();
  const Vector vu = v / m.norm(x, v);
  const JacobiSpectrum sp = jacobi_spectrum(m, x, vu);
  if (sp.nonpositive) return std::nullopt;
  int top = -1;
  for (int i = 0; i < n; ++i)
    if (i != sp.flagpole && (top < 0 || sp.eigenvalues[i] > sp.eigenvalues[top])) top = i;
  ConvexityWitness w;
  w.seed = seed;
  w.x = x;
  w.v = vu;
  w.w = sp.eigenvectors.col(top);
  w.lambda = sp.eigenvalues[top];
  w.expected = -w.lambda * m.norm(x, w.w);

  // J(0) = w, D J(0) = 0; transported identity frame pulls J back to x.
  const double h = 2e-2;
  const Matrix n0 = connection(m, x, vu);
  auto run = [&](double T) {
    GeodesicRequest req;
    req.x0 = x;
    req.v0 = vu;
    req.T = T;
    req.variations.emplace_back(w.w, Vector(-n0 * w.w));
    for (int k = 0; k < n; ++k) req.transported.push_back(Vector::Unit(n, k));
    req.stop_times = {0.5 * T};
    req.options.rtol = 1e-12;
    req.options.atol = 1e-14;
    req.options.control_all = true;
    GeodesicTrace tr = integrate(m, req);
    if (tr.exited_chart()) throw DomainError("witness geodesic leaves the chart");
    return tr;
  };
  const GeodesicTrace fwd = run(h), bwd = run(-h);
  auto pulled = [&](const GeodesicTrace& tr, double t) {
    Matrix e(n, n);
    for (int k = 0; k < n; ++k) e.col(k) = tr.transported(k, t);
    return m.norm_unchecked(x.data(), Vector(e.partialPivLu().solve(tr.variation_x(0, t))).data());
  };
  auto raw = [&](const GeodesicTrace& tr, double t) {
    return m.norm_unchecked(tr.x(t).data(), tr.variation_x(0, t).data());
  };
  const double f0 = m.norm(x, w.w);
  auto second = [&](auto&& f) {
    auto d = [&](double s) { return (f(fwd, s) - 2.0 * f0 + f(bwd, -s)) / (s * s); };
    return (4.0 * d(0.5 * h) - d(h)) / 3.0;
  };
  w.second_difference = second(pulled);
  w.raw_second_difference = second(raw);
  return w;
}

// ---------------------------------------------------------------------------
// Config

nlohmann::ordered_json ClassifyConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["rtol"] = rtol;
  j["atol"] = atol;
  j["berwald_samples"] = berwald_samples;
  j["berwald_rel_tol"] = berwald_rel_tol;
  j["berwald_abs_floor"] = berwald_abs_floor;
  j["preservation_geodesics"] = preservation_geodesics;
  j["preservation_vectors"] = preservation_vectors;
  j["preservation_T"] = preservation_T;
  j["preservation_tol"] = preservation_tol;
  j["scan_samples"] = scan_samples;
  j["nonpositive_rel_tol"] = nonpositive_rel_tol;
  j["busemann_pairs"] = busemann_pairs;
  j["busemann_grid"] = busemann_grid;
  j["busemann_tol"] = busemann_tol;
  j["busemann_both_orders"] = busemann_both_orders;
  j["holonomy_loops"] = holonomy_loops;
  j["loop_scale"] = loop_scale;
  j["kappa_samples"] = kappa_samples;
  j["quadrature_order"] = quadrature_order;
  j["quadrature_tol"] = quadrature_tol;
  return j;
}

ClassifyConfig ClassifyConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("classify config must be a JSON object");
  ClassifyConfig c;
  std::vector<std::string> issues;
  auto num = [&](const std::string& key, const nlohmann::json& v, double& out, bool allow_zero) {
    if (!v.is_number()) return issues.push_back(key + ": expected a number");
    out = v.get<double>();
    if (!(out > 0.0 || (allow_zero && out == 0.0))) issues.push_back(key + ": must be positive");
  };
  auto count = [&](const std::string& key, const nlohmann::json& v, int& out) {
    if (!v.is_number_integer() || v.get<long long>() < 1) return issues.push_back(key + ": expected a positive integer");
    out = v.get<int>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        issues.push_back("seed: expected a nonnegative integer");
      else
        c.seed = v.get<std::uint64_t>();
    } else if (key == "rtol") num(key, v, c.rtol, false);
    else if (key == "atol") num(key, v, c.atol, false);
    else if (key == "berwald_samples") count(key, v, c.berwald_samples);
    else if (key == "berwald_rel_tol") num(key, v, c.berwald_rel_tol, false);
    else if (key == "berwald_abs_floor") num(key, v, c.berwald_abs_floor, true);
    else if (key == "preservation_geodesics") count(key, v, c.preservation_geodesics);
    else if (key == "preservation_vectors") count(key, v, c.preservation_vectors);
    else if (key == "preservation_T") num(key, v, c.preservation_T, false);
    else if (key == "preservation_tol") num(key, v, c.preservation_tol, false);
    else if (key == "scan_samples") count(key, v, c.scan_samples);
    else if (key == "nonpositive_rel_tol") num(key, v, c.nonpositive_rel_tol, false);
    else if (key == "busemann_pairs") count(key, v, c.busemann_pairs);
    else if (key == "busemann_grid") count(key, v, c.busemann_grid);
    else if (key == "busemann_tol") num(key, v, c.busemann_tol, true);
    else if (key == "busemann_both_orders") {
      if (!v.is_boolean()) issues.push_back(key + ": expected a boolean");
      else c.busemann_both_orders = v.get<bool>();
    } else if (key == "holonomy_loops") count(key, v, c.holonomy_loops);
    else if (key == "loop_scale") num(key, v, c.loop_scale, true);
    else if (key == "kappa_samples") count(key, v, c.kappa_samples);
    else if (key == "quadrature_order") count(key, v, c.quadrature_order);
    else if (key == "quadrature_tol") num(key, v, c.quadrature_tol, false);
    else issues.push_back(key + ": unknown key");
  }
  if (c.busemann_grid < 3) issues.push_back("busemann_grid: must be at least 3");
  if (!issues.empty()) {
    std::string msg = "invalid classify config:";
    for (const auto& s : issues) msg += "\n  " + s;
    throw InputError(msg);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Report

bool ClassificationReport::verdict_ok() const {
  return complete && berwald.value_or(false) && flag_nonpositive.value_or(false) && busemann_pass.value_or(false);
}

namespace {

nlohmann::ordered_json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::ordered_json mat_json(const Matrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

nlohmann::ordered_json opt_bool(const std::optional<bool>& b, const char* yes, const char* no) {
  if (!b) return nullptr;
  return *b ? yes : no;
}

}  // namespace

nlohmann::ordered_json ClassificationReport::to_json() const {
  using J = nlohmann::ordered_json;
  J j;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["metric"] = spec_to_json(spec);
  j["config"] = config.to_json();
  j["complete"] = complete;
  if (!complete) {
    j["failed_stage"] = failed_stage;
    j["failure"] = failure;
  }
  j["verdicts"] = {{"berwald", opt_bool(berwald, "yes", "no")},
                   {"flag_nonpositive", opt_bool(flag_nonpositive, "yes", "no")},
                   {"busemann_sampled", opt_bool(busemann_pass, "pass", "violated")},
                   {"verdict_consistent", verdict_consistent ? J(*verdict_consistent) : J(nullptr)}};
  J ev;
  ev["berwald"] = {{"norm_max", berwald_norm_max},
                   {"scale", berwald_scale},
                   {"threshold", config.berwald_rel_tol * berwald_scale + config.berwald_abs_floor},
                   {"witness",
                    {{"seed", berwald_witness.seed}, {"x", vec_json(berwald_witness.x)}, {"v", vec_json(berwald_witness.v)}}}};
  if (preservation) {
    const auto& p = *preservation;
    ev["norm_preservation"] = {{"max_deviation", p.max_deviation},
                               {"evaluated", p.evaluated},
                               {"skipped", p.skipped},
                               {"witness",
                                {{"seed", p.witness.seed},
                                 {"x", vec_json(p.witness.x)},
                                 {"v", vec_json(p.witness.v)},
                                 {"w", vec_json(p.witness.w)},
                                 {"t", p.witness.t},
                                 {"T", config.preservation_T}}}};
  }
  if (scan) {
    J w = nullptr;
    if (scan->witness >= 0) {
      const auto& s = scan->samples[scan->witness];
      w = {{"seed", s.seed}, {"x", vec_json(s.x)}, {"v", vec_json(s.v)}, {"eigenvalues", vec_json(s.eigenvalues)}};
    }
    ev["nonpositivity"] = {{"max_eigenvalue", scan->max_eigenvalue},
                           {"samples", scan->samples.size()},
                           {"rel_tol", scan->rel_tol},
                           {"witness", w}};
  }
  if (convexity) {
    const auto& c = *convexity;
    J w = nullptr;
    if (c.witness >= 0) {
      const auto& p = c.pairs[c.witness];
      w = {{"seed", p.seed},
           {"kind", p.kind},
           {"ordering", p.reverse ? "reverse" : "forward"},
           {"x1", vec_json(p.x1)},
           {"v1", vec_json(p.v1)},
           {"x2", vec_json(p.x2)},
           {"v2", vec_json(p.v2)},
           {"t1", static_cast<double>(p.t1) / (c.grid - 1)},
           {"t2", static_cast<double>(p.t2) / (c.grid - 1)},
           {"h", p.reverse ? p.h_reverse : p.h_forward},
           {"margin", p.margin}};
    }
    ev["busemann"] = {{"worst_margin", c.worst_margin},
                      {"tol", c.tol},
                      {"pairs", c.n_pairs},
                      {"evaluated", c.evaluated},
                      {"skipped", c.skipped},
                      {"both_orders", c.both_orders},
                      {"statement", c.summary()},
                      {"witness", w}};
  }
  if (holonomy) {
    const auto& h = *holonomy;
    J w = nullptr;
    if (h.witness >= 0) {
      const auto& l = h.loops[h.witness];
      J verts = J::array();
      for (const auto& q : l.vertices) verts.push_back(vec_json(q));
      w = {{"seed", l.seed}, {"vertices", verts}, {"map", mat_json(l.map)}, {"f_deviation", l.f_deviation}};
    }
    ev["holonomy"] = {{"p", vec_json(h.p)},
                      {"loops", h.loops.size()},
                      {"skipped", h.skipped},
                      {"max_f_deviation", h.max_f_deviation},
                      {"max_identity_deviation", h.max_identity_deviation},
                      {"max_composition_error", h.max_composition_error},
                      {"witness", w}};
  }
  ev["kappa_defect"] = {{"aux", "binet_legendre"},
                        {"transverse_max", kappa_transverse_max},
                        {"max", kappa_max},
                        {"witness",
                         {{"seed", kappa_witness.seed}, {"x", vec_json(kappa_witness.x)}, {"v", vec_json(kappa_witness.v)}}}};
  if (convexity_witness) {
    const auto& c = *convexity_witness;
    ev["convexity_witness"] = {{"x", vec_json(c.x)},
                               {"v", vec_json(c.v)},
                               {"w", vec_json(c.w)},
                               {"lambda", c.lambda},
                               {"second_difference", c.second_difference},
                               {"expected", c.expected},
                               {"raw_second_difference", c.raw_second_difference}};
  } else {
    ev["convexity_witness"] = nullptr;
  }
  j["evidence"] = ev;
  return j;
}

ClassificationReport classify_report(const Metric& m, const ClassifyConfig& c) {
  ClassificationReport rep;
  rep.spec = m.spec();
  rep.config = c;
  const Region region = m.sampling_region();
  const int n = m.dim();
  IntegratorOptions io;
  io.rtol = c.rtol;
  io.atol = c.atol;
  auto stage_seed = [&](int k) { return child_seed(c.seed, static_cast<std::uint64_t>(k)); };
  auto stage = [&](const char* name, auto&& body) {
    if (!rep.complete) return;
    try {
      body();
    } catch (const SamplingError& e) {
      rep.complete = false;
      rep.failed_stage = name;
      rep.failure = e.what();
    }
  };

  stage("berwald", [&] {
    const std::uint64_t seed = stage_seed(0);
    std::vector<SprayData> data(c.berwald_samples);
    std::vector<std::uint64_t> seeds(c.berwald_samples);
    parallel_for(c.berwald_samples, [&](std::size_t i) {
      seeds[i] = child_seed(seed, i);
      Rng rng(seeds[i]);
      const auto [x, v] = sample_point(m, region, rng, 1.0);
      data[i] = spray_coefficients(m, x, v);
    });
    for (int i = 0; i < c.berwald_samples; ++i) {
      rep.berwald_scale = std::max(rep.berwald_scale, data[i].scale);
      if (i == 0 || data[i].berwald_norm > rep.berwald_norm_max) {
        rep.berwald_norm_max = data[i].berwald_norm;
        rep.berwald_witness = {seeds[i], data[i].x, data[i].v, {}, 0.0, data[i].berwald_norm};
      }
    }
    rep.berwald = rep.berwald_norm_max <= c.berwald_rel_tol * rep.berwald_scale + c.berwald_abs_floor;
  });

  stage("norm_preservation", [&] {
    rep.preservation = norm_preservation_test(m, region, c.preservation_geodesics, c.preservation_vectors,
                                              c.preservation_T, stage_seed(1), io);
  });

  stage("nonpositivity", [&] {
    rep.scan = nonpositivity_scan(m, region, c.scan_samples, stage_seed(2), c.nonpositive_rel_tol);
    rep.flag_nonpositive = rep.scan->nonpositive;
    if (!rep.scan->nonpositive) {
      const auto& s = rep.scan->samples[rep.scan->witness];
      try {
        rep.convexity_witness = jacobi_convexity_witness(m, s.x, s.v, s.seed);
      } catch (const DomainError&) {
      }
    }
  });

  stage("busemann", [&] {
    rep.convexity = busemann_convexity_sample(m, region, c.busemann_pairs, c.busemann_grid, c.busemann_tol,
                                              stage_seed(3), c.busemann_both_orders, io);
    rep.busemann_pass = !rep.convexity->violated;
  });

  stage("holonomy", [&] {
    const Vector p = 0.5 * (region.lower + region.upper);
    const double scale = c.loop_scale > 0.0 ? c.loop_scale : 0.25 * (region.upper - region.lower).minCoeff();
    rep.holonomy = holonomy_sample(m, p, c.holonomy_loops, scale, stage_seed(4), io);
  });

  stage("kappa_defect", [&] {
    if (n != 2 && n != 3) return;
    const auto aux = binet_legendre_field(m, c.quadrature_order, c.quadrature_tol);
    const std::uint64_t seed = stage_seed(5);
    std::vector<KappaDefect> ks(c.kappa_samples);
    std::vector<GeodesicWitness> ws(c.kappa_samples);
    parallel_for(c.kappa_samples, [&](std::size_t i) {
      const std::uint64_t s = child_seed(seed, i);
      Rng rng(s);
      const auto [x, v] = sample_point(m, region, rng, 1.0);
      ks[i] = kappa_defect(m, *aux, x, v);
      ws[i] = {s, x, v, {}, 0.0, ks[i].transverse_norm};
    });
    for (int i = 0; i < c.kappa_samples; ++i) {
      rep.kappa_max = std::max(rep.kappa_max, ks[i].norm);
      if (i == 0 || ks[i].transverse_norm > rep.kappa_transverse_max) {
        rep.kappa_transverse_max = ks[i].transverse_norm;
        rep.kappa_witness = ws[i];
      }
    }
  });

  if (rep.berwald && rep.flag_nonpositive && rep.busemann_pass)
    rep.verdict_consistent = (*rep.berwald && *rep.flag_nonpositive) == *rep.busemann_pass;
  return rep;
}

}  // namespace finsler
