#include "finsler/transport.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>

#include "finsler/spray.hpp"

namespace finsler {

// ---------------------------------------------------------------------------
// Frames

Matrix ParallelFrame::matrix(double t) const {
  Matrix m(trace.dim(), size());
  for (int k = 0; k < size(); ++k) m.col(k) = column(k, t);
  return m;
}

Matrix ParallelFrame::node_matrix(std::size_t node) const {
  Matrix m(trace.dim(), size());
  for (int k = 0; k < size(); ++k) m.col(k) = node_column(node, k);
  return m;
}

void ParallelFrame::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  const int n = trace.dim();
  out << std::setprecision(17) << "t";
  for (int k = 1; k <= size(); ++k)
    for (int i = 1; i <= n; ++i) out << ",W" << k << "_" << i;
  for (int k = 1; k <= size(); ++k) out << ",F_W" << k;
  out << "\n";
  for (std::size_t node = 0; node < times().size(); ++node) {
    out << times()[node];
    for (int k = 0; k < size(); ++k) {
      const Vector w = node_column(node, k);
      for (int i = 0; i < n; ++i) out << "," << w[i];
    }
    for (int k = 0; k < size(); ++k) out << "," << norm_history[k][node];
    out << "\n";
  }
}

namespace {

ParallelFrame make_frame(const Metric& metric, GeodesicRequest req) {
  GeodesicTrace tr = integrate(metric, req);
  ParallelFrame f{std::move(tr), req.transported, {}};
  f.norm_history.assign(f.size(), std::vector<double>(f.times().size()));
  for (std::size_t node = 0; node < f.times().size(); ++node) {
    const Vector x = f.trace.node_x(node);
    for (int k = 0; k < f.size(); ++k) {
      const Vector w = f.node_column(node, k);
      f.norm_history[k][node] = metric.norm_unchecked(x.data(), w.data());
    }
  }
  return f;
}

}  // namespace

ParallelFrame parallel_transport(const Metric& metric, const Vector& x0, const Vector& v0, double T,
                                 const std::vector<Vector>& w0, const IntegratorOptions& options) {
  GeodesicRequest req;
  req.x0 = x0;
  req.v0 = v0;
  req.T = T;
  req.transported = w0;
  req.options = options;
  return make_frame(metric, req);
}

ParallelFrame parallel_transport(const Metric& metric, const GeodesicTrace& trace, const std::vector<Vector>& w0) {
  GeodesicRequest req = trace.request();
  req.variations.clear();
  req.transported = w0;
  return make_frame(metric, req);
}

// ---------------------------------------------------------------------------
// Covariant derivative

namespace {

// Fornberg weights for the first derivative at z0 from nodes z.
std::vector<double> first_derivative_weights(double z0, const std::vector<double>& z) {
  const int m = static_cast<int>(z.size());
  std::vector<std::vector<double>> c(m, std::vector<double>(2, 0.0));
  double c1 = 1.0, c4 = z[0] - z0;
  c[0][0] = 1.0;
  for (int i = 1; i < m; ++i) {
    const int mn = std::min(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = z[i] - z0;
    for (int j = 0; j < i; ++j) {
      const double c3 = z[i] - z[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(m);
  for (int i = 0; i < m; ++i) w[i] = c[i][1];
  return w;
}

Vector fd_derivative(const std::function<Vector(double)>& f, double t, double lo, double hi) {
  const double h = 1e-3 * std::max(1.0, std::fabs(hi - lo));
  auto d = [&](double s) -> Vector {
    if (t - s >= lo && t + s <= hi) return (f(t + s) - f(t - s)) / (2 * s);
    if (t + 2 * s <= hi) return (-3.0 * f(t) + 4.0 * f(t + s) - f(t + 2 * s)) / (2 * s);
    return (3.0 * f(t) - 4.0 * f(t - s) + f(t - 2 * s)) / (2 * s);
  };
  return (4.0 * d(0.5 * h) - d(h)) / 3.0;
}

}  // namespace

std::vector<Vector> covariant_derivative(const Metric& metric, const GeodesicTrace& trace, const FieldAlong& w) {
  const auto& ts = trace.times();
  const std::size_t count = ts.size();
  const int n = trace.dim();
  std::vector<Vector> out(count);
  const bool sampled = !w.node_values.empty();
  if (sampled && w.node_values.size() != count)
    throw InputError("vector field samples do not match the trace nodes (" + std::to_string(w.node_values.size()) +
                     " vs " + std::to_string(count) + ")");
  if (!sampled && !w.value) throw InputError("vector field has neither samples nor a callable");
  if (sampled && count < 2) throw InputError("need at least two trace nodes to differentiate samples");
  const double lo = std::min(ts.front(), ts.back()), hi = std::max(ts.front(), ts.back());

  for (std::size_t i = 0; i < count; ++i) {
    Vector wi, dwi;
    if (sampled) {
      wi = w.node_values[i];
      if (wi.size() != n) throw InputError("vector field sample dimension mismatch");
      const std::size_t width = std::min<std::size_t>(5, count);
      std::size_t first = i >= width / 2 ? i - width / 2 : 0;
      if (first + width > count) first = count - width;
      std::vector<double> z(ts.begin() + first, ts.begin() + first + width);
      const auto wts = first_derivative_weights(ts[i], z);
      dwi = Vector::Zero(n);
      for (std::size_t k = 0; k < width; ++k) dwi += wts[k] * w.node_values[first + k];
    } else {
      wi = w.value(ts[i]);
      dwi = w.derivative ? w.derivative(ts[i]) : fd_derivative(w.value, ts[i], lo, hi);
    }
    out[i] = dwi + connection(metric, trace.node_x(i), trace.node_v(i)) * wi;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Jacobi fields

namespace {

JacobiFieldData variation_data(const Metric& metric, GeodesicTrace trace) {
  JacobiFieldData d{std::move(trace), "variation", {}, {}, {}, {}, {}};
  d.t = d.trace.times();
  for (std::size_t k = 0; k < d.t.size(); ++k) {
    const Vector x = d.trace.node_x(k), v = d.trace.node_v(k);
    const Vector j = d.trace.node_variation_x(k, 0);
    d.J.push_back(j);
    d.DJ.push_back(d.trace.node_variation_v(k, 0) + connection(metric, x, v) * j);
  }
  const Metric* m = &metric;
  // shared copy: the struct is moved on return
  auto shared = std::make_shared<GeodesicTrace>(d.trace);
  d.J_at = [shared](double t) { return shared->variation_x(0, t); };
  d.DJ_at = [shared, m](double t) {
    return Vector(shared->variation_v(0, t) + connection(*m, shared->x(t), shared->v(t)) * shared->variation_x(0, t));
  };
  return d;
}

}  // namespace

JacobiFieldData jacobi_field(const Metric& metric, const Vector& x0, const Vector& v0, const Vector& J0,
                             const Vector& DJ0, double T, const IntegratorOptions& options) {
  GeodesicRequest req;
  req.x0 = x0;
  req.v0 = v0;
  req.T = T;
  req.options = options;
  if (J0.size() != metric.dim() || DJ0.size() != metric.dim()) throw InputError("Jacobi data dimension mismatch");
  req.variations.emplace_back(J0, DJ0 - connection(metric, x0, v0) * J0);
  return variation_data(metric, integrate(metric, req));
}

JacobiFieldData jacobi_by_variation(const Metric& metric, const Vector& x0, const Vector& v0, const Vector& w,
                                    double T, const IntegratorOptions& options) {
  return jacobi_field(metric, x0, v0, Vector::Zero(metric.dim()), w, T, options);
}

JacobiFieldData jacobi_by_ode(const Metric& metric, const GeodesicTrace& trace, const Vector& J0, const Vector& DJ0) {
  const int n = metric.dim();
  if (J0.size() != n || DJ0.size() != n) throw InputError("Jacobi data dimension mismatch");
  GeodesicRequest req = trace.request();
  req.variations.clear();
  req.transported.clear();
  for (int k = 0; k < n; ++k) req.transported.push_back(Vector::Unit(n, k));
  req.options.control_all = true;
  auto frame = std::make_shared<ParallelFrame>(make_frame(metric, req));
  if (frame->trace.exited_chart()) throw DomainError("geodesic leaves the chart");

  // J = E a, D J = E a', a'' = -E^{-1} R E a
  auto rhs = [&](double t, const double* y, double* dy) -> bool {
    const Matrix e = frame->matrix(t);
    const Matrix r = berwald_curvature_operator(metric, frame->trace.x(t), frame->trace.v(t));
    const Eigen::Map<const Vector> a(y, n), ad(y + n, n);
    const Vector add = -e.partialPivLu().solve(r * (e * a));
    for (int i = 0; i < n; ++i) {
      dy[i] = ad[i];
      dy[n + i] = add[i];
    }
    return true;
  };
  Vector y0(2 * n);
  y0 << J0, DJ0;
  OdeOptions opt;
  opt.rtol = req.options.rtol;
  opt.atol = req.options.atol;
  opt.max_steps = req.options.max_steps;
  auto coeffs = std::make_shared<OdeSolution>(dopri5(rhs, y0, 0.0, frame->trace.t_end(), opt));

  JacobiFieldData d{frame->trace, "ode", frame->times(), {}, {}, {}, {}};
  for (std::size_t k = 0; k < d.t.size(); ++k) {
    const Vector y = (*coeffs)(d.t[k]);
    const Matrix e = frame->node_matrix(k);
    d.J.push_back(e * y.head(n));
    d.DJ.push_back(e * y.tail(n));
  }
  d.J_at = [frame, coeffs, n](double t) { return Vector(frame->matrix(t) * (*coeffs)(t).head(n)); };
  d.DJ_at = [frame, coeffs, n](double t) { return Vector(frame->matrix(t) * (*coeffs)(t).tail(n)); };
  return d;
}

Vector second_covariant_derivative(const Metric& metric, const GeodesicTrace& trace, int j, double t) {
  const int n = metric.dim();
  const Vector x = trace.x(t), v = trace.v(t);
  const Vector dx = trace.variation_x(j, t), dv = trace.variation_v(j, t);
  Vector g(n), dg(n);
  spray_derivative(metric, x.data(), v.data(), dx.data(), dv.data(), g.data(), dg.data());
  const Matrix nm = connection(metric, x, v);
  const Matrix nd = connection_derivative(metric, x, v, v, Vector(-2.0 * g));
  const Vector dj = dv + nm * dx;
  const Vector ddt = -2.0 * dg + nd * dx + nm * dv;
  return ddt + nm * dj;
}

double jacobi_residual(const Metric& metric, const GeodesicTrace& trace, int j) {
  double worst = 0.0;
  for (std::size_t k = 0; k < trace.times().size(); ++k) {
    const double t = trace.times()[k];
    const Vector jv = trace.node_variation_x(k, j);
    const Matrix r = berwald_curvature_operator(metric, trace.node_x(k), trace.node_v(k));
    const Vector res = second_covariant_derivative(metric, trace, j, t) + r * jv;
    worst = std::max(worst, res.norm() / std::max(1.0, jv.norm()));
  }
  return worst;
}

std::pair<Matrix, Matrix> reconstruct_curvature(const Metric& metric, const Vector& x0, const Vector& v0, double t,
                                                const IntegratorOptions& options) {
  const int n = metric.dim();
  GeodesicRequest req;
  req.x0 = x0;
  req.v0 = v0;
  req.T = t;
  req.options = options;
  req.options.control_all = true;
  const Matrix n0 = connection(metric, x0, v0);
  // J_k(0) = e_k, D J_k(0) = 0  =>  initial variation (e_k, -N e_k)
  for (int k = 0; k < n; ++k) req.variations.emplace_back(Vector::Unit(n, k), Vector(-n0.col(k)));
  const GeodesicTrace tr = integrate(metric, req);
  if (tr.exited_chart()) throw DomainError("geodesic leaves the chart");
  Matrix jm(n, n), ddj(n, n);
  for (int k = 0; k < n; ++k) {
    jm.col(k) = tr.variation_x(k, t);
    ddj.col(k) = second_covariant_derivative(metric, tr, k, t);
  }
  const Matrix r_hat = -ddj * jm.inverse();
  return {r_hat, berwald_curvature_operator(metric, tr.x(t), tr.v(t))};
}

// ---------------------------------------------------------------------------
// Small-time expansion

ExpansionFit small_time_expansion_check(const Metric& metric, const Vector& x0, const Vector& v0, const Vector& w,
                                        int points) {
  const int n = metric.dim();
  if (w.size() != n || w.isZero(0.0)) throw InputError("w must be a nonzero vector of the chart dimension");
  if (points < 3) throw InputError("need at least 3 sample times");
  ExpansionFit fit;
  for (int i = 0; i < points; ++i) fit.t.push_back(std::pow(10.0, -3.0 + 2.0 * i / (points - 1)));
  GeodesicRequest req;
  req.x0 = x0;
  req.v0 = v0;
  req.T = fit.t.back();
  req.variations.emplace_back(Vector::Zero(n), w);
  req.transported.push_back(w);
  req.stop_times = fit.t;
  req.options.rtol = 1e-13;
  req.options.atol = 1e-20;
  req.options.control_all = true;
  const GeodesicTrace tr = integrate(metric, req);
  if (tr.exited_chart()) throw DomainError("geodesic leaves the chart");
  std::vector<double> lt, le;
  for (double t : fit.t) {
    const double e = (tr.variation_x(0, t) - t * tr.transported(0, t)).norm();
    fit.e.push_back(e);
    // rounding floor for J(t) ~ t |w|
    if (e > 1e-12 * t * w.norm()) {
      lt.push_back(std::log(t));
      le.push_back(std::log(e));
    }
  }
  if (lt.size() < 3) {
    fit.exact = true;
    return fit;
  }
  const double k = static_cast<double>(lt.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    sx += lt[i];
    sy += le[i];
    sxx += lt[i] * lt[i];
    sxy += lt[i] * le[i];
  }
  fit.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return fit;
}

// ---------------------------------------------------------------------------
// Osculating extension

namespace {

class Extension {
 public:
  Extension(const Metric& m, const Vector& x0, const Vector& v0, const IntegratorOptions& io)
      : m_(m), x0_(x0), v0_(v0), io_(io) {
    const int n = m.dim();
    const Vector gv = fundamental_matrix(m, x0, v0) * v0;
    Eigen::HouseholderQR<Matrix> qr(gv);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    basis_ = q.rightCols(n - 1);
  }

  // V(z); (s, c) is the starting guess and is updated in place.
  Vector velocity_at(const Vector& z, double& s, Vector& c) const {
    const int n = m_.dim();
    for (int it = 0; it < 20; ++it) {
      GeodesicRequest req;
      req.x0 = x0_ + basis_ * c;
      req.v0 = v0_;
      req.T = s;
      req.options = io_;
      for (int k = 0; k < n - 1; ++k) req.variations.emplace_back(basis_.col(k), Vector::Zero(n));
      if (!m_.chart().contains(req.x0)) throw DomainError("osculating extension leaves the chart");
      const GeodesicTrace tr = integrate(m_, req);
      if (tr.exited_chart()) throw DomainError("osculating extension leaves the chart");
      const std::size_t last = tr.times().size() - 1;
      const Vector res = tr.node_x(last) - z;
      const Vector vel = tr.node_v(last);
      if (res.norm() <= 1e-14 * std::max(1.0, z.norm())) return vel;
      Matrix jac(n, n);
      jac.col(0) = vel;
      for (int k = 0; k < n - 1; ++k) jac.col(k + 1) = tr.node_variation_x(last, k);
      const Vector step = jac.partialPivLu().solve(-res);
      s += step[0];
      c += step.tail(n - 1);
      if (step.norm() <= 1e-15 * std::max(1.0, std::fabs(s))) return vel;
    }
    throw DomainError("osculating extension could not be inverted near the geodesic");
  }

 private:
  const Metric& m_;
  Vector x0_, v0_;
  IntegratorOptions io_;
  Matrix basis_;
};

}  // namespace

OsculatingCheck osculating_cross_check(const Metric& metric, const GeodesicTrace& trace, int sample_count) {
  if (sample_count < 1) throw InputError("sample_count must be at least 1");
  const int n = metric.dim();
  IntegratorOptions io;
  io.rtol = 1e-12;
  io.atol = 1e-14;
  const Vector x0 = trace.x0(), v0 = trace.v0();
  const GeodesicTrace gamma = integrate_geodesic(metric, x0, v0, trace.T(), io);
  if (gamma.exited_chart()) throw DomainError("geodesic leaves the chart");
  const Extension ext(metric, x0, v0, io);
  const double h = 1e-3;

  OsculatingCheck out;
  for (int i = 0; i < sample_count; ++i) {
    const double t = trace.T() * (i + 1.0) / (sample_count + 1.0);
    const Vector x = gamma.x(t), v = gamma.v(t);
    const Matrix g = fundamental_matrix(metric, x, v);
    auto g_at = [&](const Vector& z) {
      double s = t;
      Vector c = Vector::Zero(n - 1);
      const Vector vel = ext.velocity_at(z, s, c);
      return fundamental_matrix(metric, z, vel);
    };
    std::vector<Matrix> dg(n);
    for (int k = 0; k < n; ++k) {
      auto central = [&](double step) {
        Vector zp = x, zm = x;
        zp[k] += step;
        zm[k] -= step;
        return Matrix((g_at(zp) - g_at(zm)) / (2 * step));
      };
      dg[k] = (4.0 * central(0.5 * h) - central(h)) / 3.0;
    }
    const Matrix ginv = g.inverse();
    // M^i_k = Gamma^i_{jk} v^j
    Matrix mat = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) acc += 0.5 * ginv(a, l) * v[j] * (dg[j](l, k) + dg[k](l, j) - dg[l](j, k));
        mat(a, k) = acc;
      }
    const Matrix nm = connection(metric, x, v);
    const double disc = (mat - nm).cwiseAbs().maxCoeff();
    out.t.push_back(t);
    out.discrepancy.push_back(disc);
    out.max_discrepancy = std::max(out.max_discrepancy, disc);
    out.reference_scale = std::max(out.reference_scale, nm.cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace finsler
