#pragma once

// Finite-difference oracles for tests. Independent of the jet engine: only
// plain double evaluation of F^2 / F is used.

#include <cmath>
#include <functional>
#include <limits>

#include "finsler/metric.hpp"

namespace oracle {

using finsler::Matrix;
using finsler::Metric;
using finsler::Vector;

// h = eps^(1/(order+2)) * max(1, |z|)
inline double step(int order, double z) {
  return std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (order + 2)) * std::max(1.0, std::fabs(z));
}

// One Richardson step for a second-order-accurate central formula.
inline double richardson(const std::function<double(double)>& d, double h) { return (4.0 * d(0.5 * h) - d(h)) / 3.0; }

inline double f2(const Metric& m, const Vector& x, const Vector& v) {
  const double f = m.norm_unchecked(x.data(), v.data());
  return f * f;
}

// Hessian of F^2 in v.
inline Matrix hessian_v(const Metric& m, const Vector& x, const Vector& v) {
  const int n = m.dim();
  Matrix h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double base = step(2, std::max(std::fabs(v[i]), std::fabs(v[j])));
      h(i, j) = richardson(
          [&](double s) {
            Vector pp = v, pm = v, mp = v, mm = v;
            pp[i] += s, pp[j] += s;
            pm[i] += s, pm[j] -= s;
            mp[i] -= s, mp[j] += s;
            mm[i] -= s, mm[j] -= s;
            return (f2(m, x, pp) - f2(m, x, pm) - f2(m, x, mp) + f2(m, x, mm)) / (4 * s * s);
          },
          base);
    }
  return h;
}

inline Matrix fundamental(const Metric& m, const Vector& x, const Vector& v) { return 0.5 * hessian_v(m, x, v); }

// Riemannian family: g(x) from polarization of the exactly quadratic F^2.
inline Matrix riemannian_g(const Metric& m, const Vector& x) {
  const int n = m.dim();
  Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vector ei = Vector::Unit(n, i), ej = Vector::Unit(n, j);
      g(i, j) = 0.5 * (f2(m, x, ei + ej) - f2(m, x, ei) - f2(m, x, ej));
    }
  return g;
}

// dg/dx^k by central differences with Richardson.
inline std::vector<Matrix> riemannian_dg(const Metric& m, const Vector& x) {
  const int n = m.dim();
  std::vector<Matrix> d(n, Matrix(n, n));
  for (int k = 0; k < n; ++k) {
    const double h = step(1, x[k]);
    auto diff = [&](double s) {
      Vector xp = x, xm = x;
      xp[k] += s;
      xm[k] -= s;
      return Matrix((riemannian_g(m, xp) - riemannian_g(m, xm)) / (2 * s));
    };
    d[k] = (4.0 * diff(0.5 * h) - diff(h)) / 3.0;
  }
  return d;
}

// Gamma^i_{jk}, returned as gamma[i](j, k).
inline std::vector<Matrix> christoffel(const Metric& m, const Vector& x) {
  const int n = m.dim();
  const Matrix ginv = riemannian_g(m, x).inverse();
  const auto dg = riemannian_dg(m, x);
  std::vector<Matrix> gamma(n, Matrix::Zero(n, n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) gamma[i](j, k) += 0.5 * ginv(i, l) * (dg[j](l, k) + dg[k](l, j) - dg[l](j, k));
  return gamma;
}

// Sectional curvature of a 2-dimensional Riemannian metric from
// Brioschi-free formula K = R_1212 / det g, via FD Christoffels.
inline double gauss_curvature(const Metric& m, const Vector& x) {
  const int n = m.dim();
  const double h = 1e-4;
  std::vector<std::vector<Matrix>> dgamma(n);  // dgamma[l][i](j,k) = d_l Gamma^i_jk
  for (int l = 0; l < n; ++l) {
    Vector xp = x, xm = x;
    xp[l] += h;
    xm[l] -= h;
    const auto gp = christoffel(m, xp), gm = christoffel(m, xm);
    dgamma[l].resize(n);
    for (int i = 0; i < n; ++i) dgamma[l][i] = (gp[i] - gm[i]) / (2 * h);
  }
  const auto gamma = christoffel(m, x);
  // R^i_{jkl} = d_k Gamma^i_lj - d_l Gamma^i_kj + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj
  auto riem = [&](int i, int j, int k, int l) {
    double r = dgamma[k][i](l, j) - dgamma[l][i](k, j);
    for (int mm = 0; mm < n; ++mm) r += gamma[i](k, mm) * gamma[mm](l, j) - gamma[i](l, mm) * gamma[mm](k, j);
    return r;
  };
  const Matrix g = riemannian_g(m, x);
  double r1212 = 0.0;
  for (int i = 0; i < n; ++i) r1212 += g(0, i) * riem(i, 1, 0, 1);
  return r1212 / g.determinant();
}

}  // namespace oracle
