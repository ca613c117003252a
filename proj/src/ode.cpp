#include "finsler/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

}  // namespace

std::size_t OdeSolution::locate(double t) const {
  const bool forward = t_.back() >= t_.front();
  const double lo = forward ? t_.front() : t_.back();
  const double hi = forward ? t_.back() : t_.front();
  const double span = std::max(1.0, std::fabs(hi - lo));
  if (t < lo - 1e-12 * span || t > hi + 1e-12 * span) {
    std::ostringstream os;
    os << "dense output queried at t = " << t << " outside [" << lo << ", " << hi << "]";
    throw InputError(os.str());
  }
  if (t_.size() < 2) return 0;
  std::size_t k;
  if (forward)
    k = std::upper_bound(t_.begin(), t_.end(), t) - t_.begin();
  else
    k = std::upper_bound(t_.begin(), t_.end(), t, std::greater<double>()) - t_.begin();
  if (k == 0) k = 1;
  if (k >= t_.size()) k = t_.size() - 1;
  return k - 1;
}

Eigen::VectorXd OdeSolution::operator()(double t) const {
  if (t_.size() < 2) return y_.front();
  const std::size_t k = locate(t);
  const double h = t_[k + 1] - t_[k];
  const double th = (t - t_[k]) / h;
  const double th1 = 1.0 - th;
  const auto& r = dense_[k];
  Eigen::VectorXd y(dim_);
  for (int i = 0; i < dim_; ++i)
    y[i] = r[i] + th * (r[dim_ + i] + th1 * (r[2 * dim_ + i] + th * (r[3 * dim_ + i] + th1 * r[4 * dim_ + i])));
  return y;
}

double OdeSolution::component(double t, int i) const {
  if (t_.size() < 2) return y_.front()[i];
  const std::size_t k = locate(t);
  const double h = t_[k + 1] - t_[k];
  const double th = (t - t_[k]) / h;
  const double th1 = 1.0 - th;
  const auto& r = dense_[k];
  return r[i] + th * (r[dim_ + i] + th1 * (r[2 * dim_ + i] + th * (r[3 * dim_ + i] + th1 * r[4 * dim_ + i])));
}

OdeSolution dopri5(const OdeRhs& f, const Eigen::VectorXd& y0, double t0, double t1, const OdeOptions& opt,
                   const OdeInside& inside) {
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw InputError("integrator tolerances must be positive");
  if (!y0.allFinite()) throw InputError("non-finite initial state");
  const int n = static_cast<int>(y0.size());
  const int ne = opt.error_components < 0 ? n : std::min(n, opt.error_components);
  OdeSolution sol;
  sol.dim_ = n;
  sol.t_.push_back(t0);
  sol.y_.push_back(y0);
  if (t1 == t0) return sol;
  const double dir = t1 > t0 ? 1.0 : -1.0;

  std::vector<double> stops;
  for (double s : opt.stop_times)
    if ((s - t0) * dir > 0.0 && (t1 - s) * dir > 0.0) stops.push_back(s);
  std::sort(stops.begin(), stops.end(), [&](double a, double b) { return a * dir < b * dir; });
  stops.push_back(t1);
  std::size_t next_stop = 0;

  Eigen::VectorXd y = y0, y1(n), ytmp(n), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), err(n);
  auto eval = [&](double t, const Eigen::VectorXd& yy, Eigen::VectorXd& out) {
    ++sol.stats_.evaluations;
    return f(t, yy.data(), out.data()) && out.allFinite();
  };
  if (!eval(t0, y, k1)) throw IntegrationError("right-hand side undefined at the initial state");

  auto scaled_norm = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& ya, const Eigen::VectorXd& yb) {
    double acc = 0.0;
    for (int i = 0; i < ne; ++i) {
      const double sk = opt.atol + opt.rtol * std::max(std::fabs(ya[i]), std::fabs(yb[i]));
      acc += (e[i] / sk) * (e[i] / sk);
    }
    return std::sqrt(acc / ne);
  };

  double h = opt.initial_step;
  if (h <= 0.0) {
    // Hairer's starting step heuristic.
    const double dnf = scaled_norm(k1, y, y);
    const double dny = scaled_norm(y, y, y);
    h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h = std::min(h, std::fabs(t1 - t0));
    ytmp = y + dir * h * k1;
    if (eval(t0 + dir * h, ytmp, k2)) {
      const double der2 = scaled_norm(Eigen::VectorXd(k2 - k1), y, y) / h;
      const double der12 = std::max(std::fabs(der2), std::sqrt(dnf));
      const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::fabs(h) * 1e-3) : std::pow(0.01 / der12, 0.2);
      h = std::min({100 * h, h1, std::fabs(t1 - t0)});
    }
  }
  h = std::fabs(h);

  const double safe = 0.9, facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0, beta = 0.04, expo1 = 0.2 - beta * 0.75;
  double facold = 1e-4;
  double t = t0;
  bool reject = false;
  int steps = 0;
  const double span = std::fabs(t1 - t0);

  while (true) {
    if (++steps > opt.max_steps) throw IntegrationError("integrator step budget exhausted");
    const double target = stops[next_stop];
    bool hits_stop = false;
    if (std::fabs(target - t) <= h * 1.0000001) {
      h = std::fabs(target - t);
      hits_stop = true;
    }
    if (h < 1e-14 * std::max(1.0, std::fabs(t)) || h < 1e-15 * span) {
      std::ostringstream os;
      os << "step size collapsed at t = " << t;
      throw IntegrationError(os.str());
    }
    const double hs = dir * h;

    bool ok = true;
    ytmp = y + hs * a21 * k1;
    ok = ok && eval(t + c2 * hs, ytmp, k2);
    if (ok) {
      ytmp = y + hs * (a31 * k1 + a32 * k2);
      ok = eval(t + c3 * hs, ytmp, k3);
    }
    if (ok) {
      ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      ok = eval(t + c4 * hs, ytmp, k4);
    }
    if (ok) {
      ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      ok = eval(t + c5 * hs, ytmp, k5);
    }
    if (ok) {
      ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      ok = eval(t + hs, ytmp, k6);
    }
    if (ok) {
      y1 = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      ok = eval(t + hs, y1, k7);
    }
    if (!ok) {
      ++sol.stats_.rejected;
      h *= 0.25;
      reject = true;
      continue;
    }
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double e = scaled_norm(err, y, y1);
    const double fac11 = std::pow(std::max(e, 1e-300), expo1);
    if (!(e <= 1.0)) {
      ++sol.stats_.rejected;
      h /= std::min(facc1, fac11 / safe);
      reject = true;
      continue;
    }
    double fac = fac11 / std::pow(facold, beta);
    fac = std::max(facc2, std::min(facc1, fac / safe));
    double hnew = h / fac;
    facold = std::max(e, 1e-4);

    std::vector<double> r(5 * n);
    for (int i = 0; i < n; ++i) {
      const double ydiff = y1[i] - y[i];
      const double bspl = hs * k1[i] - ydiff;
      r[i] = y[i];
      r[n + i] = ydiff;
      r[2 * n + i] = bspl;
      r[3 * n + i] = ydiff - hs * k7[i] - bspl;
      r[4 * n + i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }
    const double tnew = hits_stop ? target : t + hs;

    if (inside && !inside(y1.data())) {
      sol.left_region_ = true;
      break;
    }
    ++sol.stats_.accepted;
    sol.dense_.push_back(std::move(r));
    sol.t_.push_back(tnew);
    sol.y_.push_back(y1);
    t = tnew;
    y = y1;
    k1 = k7;
    if (hits_stop) {
      if (++next_stop == stops.size()) break;
    }
    if (reject) hnew = std::min(hnew, h);
    reject = false;
    h = hnew;
  }
  return sol;
}

}  // namespace finsler
