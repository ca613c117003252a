#include "finsler/geodesic.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "finsler/spray.hpp"

namespace finsler {

GeodesicTrace::GeodesicTrace(const Metric& metric, GeodesicRequest request, OdeSolution solution)
    : metric_(&metric), req_(std::move(request)), sol_(std::move(solution)), n_(metric.dim()) {}

Vector GeodesicTrace::x(double t) const {
  Vector r(n_);
  for (int i = 0; i < n_; ++i) r[i] = sol_.component(t, i);
  return r;
}

Vector GeodesicTrace::v(double t) const {
  Vector r(n_);
  for (int i = 0; i < n_; ++i) r[i] = sol_.component(t, n_ + i);
  return r;
}

Vector GeodesicTrace::variation_x(int j, double t) const {
  Vector r(n_);
  for (int i = 0; i < n_; ++i) r[i] = sol_.component(t, 2 * n_ + 2 * n_ * j + i);
  return r;
}

Vector GeodesicTrace::variation_v(int j, double t) const {
  Vector r(n_);
  for (int i = 0; i < n_; ++i) r[i] = sol_.component(t, 3 * n_ + 2 * n_ * j + i);
  return r;
}

Vector GeodesicTrace::transported(int w, double t) const {
  Vector r(n_);
  for (int i = 0; i < n_; ++i) r[i] = sol_.component(t, transport_offset() + n_ * w + i);
  return r;
}

void GeodesicTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << std::setprecision(17);
  out << "t";
  for (int i = 1; i <= n_; ++i) out << ",x" << i;
  for (int i = 1; i <= n_; ++i) out << ",v" << i;
  out << ",F\n";
  for (std::size_t k = 0; k < times().size(); ++k) {
    const Vector xk = node_x(k), vk = node_v(k);
    out << times()[k];
    for (int i = 0; i < n_; ++i) out << "," << xk[i];
    for (int i = 0; i < n_; ++i) out << "," << vk[i];
    out << "," << metric_->norm_unchecked(xk.data(), vk.data()) << "\n";
  }
}

GeodesicTrace integrate(const Metric& metric, const GeodesicRequest& req) {
  const int n = metric.dim();
  if (req.x0.size() != n || req.v0.size() != n) throw InputError("initial point/velocity dimension mismatch");
  if (!req.x0.allFinite() || !req.v0.allFinite() || !std::isfinite(req.T))
    throw InputError("non-finite geodesic initial data");
  if (req.v0.isZero(0.0)) throw InputError("initial velocity must be nonzero");
  if (!metric.chart().contains(req.x0)) throw DomainError("initial point outside the chart domain");
  const int k = static_cast<int>(req.variations.size());
  const int m = static_cast<int>(req.transported.size());
  const int dim = 2 * n + 2 * n * k + n * m;

  Vector y0(dim);
  y0.head(n) = req.x0;
  y0.segment(n, n) = req.v0;
  for (int j = 0; j < k; ++j) {
    if (req.variations[j].first.size() != n || req.variations[j].second.size() != n)
      throw InputError("variation dimension mismatch");
    y0.segment(2 * n + 2 * n * j, n) = req.variations[j].first;
    y0.segment(3 * n + 2 * n * j, n) = req.variations[j].second;
  }
  const int toff = 2 * n + 2 * n * k;
  for (int i = 0; i < m; ++i) {
    if (req.transported[i].size() != n) throw InputError("transported vector dimension mismatch");
    y0.segment(toff + n * i, n) = req.transported[i];
  }

  const ChartBox& box = metric.chart();
  auto rhs = [&](double, const double* y, double* dy) -> bool {
    const double* x = y;
    const double* v = y + n;
    std::array<double, kMaxDim> g{}, dg{}, zero{};
    try {
      if (k == 0 && m == 0) {
        spray(metric, x, v, g.data());
      }
      for (int j = 0; j < k; ++j) {
        const double* dx = y + 2 * n + 2 * n * j;
        const double* dv = dx + n;
        spray_derivative(metric, x, v, dx, dv, g.data(), dg.data());
        for (int i = 0; i < n; ++i) {
          dy[2 * n + 2 * n * j + i] = dv[i];
          dy[3 * n + 2 * n * j + i] = -2.0 * dg[i];
        }
      }
      for (int w = 0; w < m; ++w) {
        const double* wv = y + toff + n * w;
        spray_derivative(metric, x, v, zero.data(), wv, g.data(), dg.data());
        for (int i = 0; i < n; ++i) dy[toff + n * w + i] = -dg[i];
      }
    } catch (const EvaluationError&) {
      return false;
    } catch (const DegeneracyError&) {
      return false;
    }
    for (int i = 0; i < n; ++i) {
      dy[i] = v[i];
      dy[n + i] = -2.0 * g[i];
    }
    return true;
  };
  auto inside = [&](const double* y) {
    for (int i = 0; i < n; ++i)
      if (!(y[i] >= box.lower[i] && y[i] <= box.upper[i])) return false;
    return true;
  };

  OdeOptions opt;
  opt.rtol = req.options.rtol;
  opt.atol = req.options.atol;
  opt.max_steps = req.options.max_steps;
  opt.error_components = req.options.control_all ? -1 : 2 * n;
  opt.stop_times = req.stop_times;
  OdeSolution sol = dopri5(rhs, y0, 0.0, req.T, opt, inside);
  return GeodesicTrace(metric, req, std::move(sol));
}

GeodesicTrace integrate_geodesic(const Metric& metric, const Vector& x0, const Vector& v0, double T,
                                 const IntegratorOptions& options) {
  GeodesicRequest req;
  req.x0 = x0;
  req.v0 = v0;
  req.T = T;
  req.options = options;
  return integrate(metric, req);
}

Vector exp_map(const Metric& metric, const Vector& x0, const Vector& v0, const IntegratorOptions& options) {
  const GeodesicTrace tr = integrate_geodesic(metric, x0, v0, 1.0, options);
  if (tr.exited_chart()) throw DomainError("geodesic leaves the chart before t = 1");
  return tr.node_x(tr.times().size() - 1);
}

namespace {

struct Shot {
  bool ok = false;
  Vector end;
  Matrix jac;
};

Shot shoot(const Metric& metric, const Vector& p, const Vector& v, bool with_jacobian, const IntegratorOptions& io,
           int& integrations) {
  const int n = metric.dim();
  Shot s;
  if (v.isZero(0.0)) {
    s.ok = true;
    s.end = p;
    if (with_jacobian) s.jac = Matrix::Identity(n, n);
    return s;
  }
  GeodesicRequest req;
  req.x0 = p;
  req.v0 = v;
  req.T = 1.0;
  req.options = io;
  if (with_jacobian)
    for (int j = 0; j < n; ++j) req.variations.emplace_back(Vector::Zero(n), Vector::Unit(n, j));
  ++integrations;
  try {
    const GeodesicTrace tr = integrate(metric, req);
    if (tr.exited_chart()) return s;
    const std::size_t last = tr.times().size() - 1;
    s.end = tr.node_x(last);
    if (with_jacobian) {
      s.jac.resize(n, n);
      for (int j = 0; j < n; ++j) s.jac.col(j) = tr.node_variation_x(last, j);
    }
    s.ok = true;
  } catch (const IntegrationError&) {
  }
  return s;
}

}  // namespace

DistanceResult local_distance(const Metric& metric, const Vector& p, const Vector& q, const BvpOptions& o) {
  const int n = metric.dim();
  if (p.size() != n || q.size() != n) throw InputError("endpoint dimension mismatch");
  if (!p.allFinite() || !q.allFinite()) throw InputError("non-finite endpoint");
  if (!metric.chart().contains(p) || !metric.chart().contains(q)) throw DomainError("endpoint outside the chart");
  DistanceResult r;
  r.p = p;
  r.q = q;
  if (p == q) {
    r.v = Vector::Zero(n);
    r.jacobian = Matrix::Identity(n, n);
    return r;
  }
  const double tol = o.tol * std::max(1.0, (q - p).norm());

  auto attempt = [&](Vector v, std::optional<Matrix> jac) -> bool {
    Shot cur = shoot(metric, p, v, !jac.has_value(), o.integrator, r.integrations);
    if (!cur.ok) return false;
    Matrix jmat = jac ? *jac : cur.jac;
    Vector res = cur.end - q;
    double rn = res.norm();
    bool fresh = !jac.has_value();
    for (int it = 0; it < o.max_iterations; ++it) {
      r.iterations++;
      if (rn <= tol) {
        r.v = v;
        r.jacobian = jmat;
        r.residual = rn;
        return true;
      }
      const Vector dv = jmat.partialPivLu().solve(-res);
      if (!dv.allFinite()) return false;
      double lambda = 1.0;
      bool accepted = false;
      Shot trial;
      Vector vt;
      for (int ls = 0; ls < 12; ++ls) {
        vt = v + lambda * dv;
        trial = shoot(metric, p, vt, false, o.integrator, r.integrations);
        if (trial.ok && (trial.end - q).norm() <= (1.0 - 1e-4 * lambda) * rn) {
          accepted = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!accepted) {
        if (fresh) return false;
        // Broyden estimate went stale; rebuild from Jacobi fields.
        cur = shoot(metric, p, v, true, o.integrator, r.integrations);
        if (!cur.ok) return false;
        jmat = cur.jac;
        fresh = true;
        continue;
      }
      const Vector step = vt - v;
      const Vector res_new = trial.end - q;
      jmat += ((res_new - res) - jmat * step) * step.transpose() / step.squaredNorm();
      fresh = false;
      v = vt;
      res = res_new;
      rn = res.norm();
    }
    r.residual = rn;
    return false;
  };

  bool ok = false;
  if (o.v_guess) ok = attempt(*o.v_guess, o.jacobian_guess);
  if (!ok) ok = attempt(q - p, std::nullopt);
  if (!ok) {
    std::ostringstream os;
    os.precision(17);
    os << "shooting did not converge from p = [" << p.transpose() << "] to q = [" << q.transpose()
       << "], residual " << r.residual;
    throw BvpError(os.str(), r.residual);
  }
  r.distance = metric.norm_unchecked(p.data(), r.v.data());
  return r;
}

}  // namespace finsler
