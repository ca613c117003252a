#include "finsler/spray.hpp"

#include <sstream>
#include <vector>

#include "finsler/jets.hpp"
#include "finsler/spray_kernel.hpp"

namespace finsler {

namespace {

void check_args(const Metric& m, const Vector& x, const Vector& v) {
  if (x.size() != m.dim() || v.size() != m.dim()) throw InputError("point/vector dimension mismatch");
  if (!x.allFinite() || !v.allFinite()) throw InputError("non-finite point or vector");
  if (v.isZero(0.0)) throw InputError("vector must be nonzero");
}

// G along the direction (dx, dv) as a Taylor<double, K> jet.
template <int K>
std::array<Taylor<double, K>, kMaxDim> spray_jet(const Metric& m, const Vector& x, const Vector& v, const Vector& dx,
                                                 const Vector& dv) {
  using T = Taylor<double, K>;
  std::array<T, kMaxDim> xt, vt;
  for (int i = 0; i < m.dim(); ++i) {
    xt[i] = T::variable(x[i], dx[i]);
    vt[i] = T::variable(v[i], dv[i]);
  }
  return spray_kernel<T>(m, xt.data(), vt.data());
}

Vector coeff(const std::array<Taylor<double, 2>, kMaxDim>& a, int n, int k) {
  Vector r(n);
  for (int i = 0; i < n; ++i) r[i] = a[i].c[k];
  return r;
}

}  // namespace

Matrix fundamental_matrix(const Metric& m, const Vector& x, const Vector& v) {
  using J = Taylor<double, 2>;
  const int n = m.dim();
  std::array<J, kMaxDim> xj, vj;
  auto c2 = [&](const Vector& dir) {
    for (int i = 0; i < n; ++i) {
      xj[i] = J(x[i]);
      vj[i] = J::variable(v[i], dir[i]);
    }
    return m.f2<J>(xj.data(), vj.data()).c[2];
  };
  Matrix g(n, n);
  Vector d(n);
  for (int i = 0; i < n; ++i) d[i] = c2(Vector::Unit(n, i));
  for (int i = 0; i < n; ++i) {
    g(i, i) = d[i];
    for (int j = i + 1; j < n; ++j) {
      // c2(e_i + e_j) = 1/2 (H_ii + H_jj) + H_ij and g = H / 2
      g(i, j) = 0.5 * (c2(Vector::Unit(n, i) + Vector::Unit(n, j)) - d[i] - d[j]);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

FundamentalTensor fundamental_tensor(const Metric& m, const Vector& x, const Vector& v, double floor) {
  check_args(m, x, v);
  FundamentalTensor t;
  t.x = x;
  t.v = v;
  t.g = fundamental_matrix(m, x, v);
  Eigen::SelfAdjointEigenSolver<Matrix> es(t.g, Eigen::EigenvaluesOnly);
  t.min_eigenvalue = es.eigenvalues()[0];
  t.max_eigenvalue = es.eigenvalues()[m.dim() - 1];
  if (!(t.min_eigenvalue > 0.0) || t.min_eigenvalue < floor * t.max_eigenvalue) {
    std::ostringstream os;
    os.precision(17);
    os << "degenerate fundamental tensor (eigenvalues " << t.min_eigenvalue << ", " << t.max_eigenvalue
       << ") at x = [" << x.transpose() << "], v = [" << v.transpose() << "]";
    throw DegeneracyError(os.str());
  }
  t.inverse = t.g.inverse();
  return t;
}

void spray(const Metric& m, const double* x, const double* v, double* g_out) {
  const auto g = spray_kernel<double>(m, x, v);
  for (int i = 0; i < m.dim(); ++i) g_out[i] = g[i];
}

void spray_derivative(const Metric& m, const double* x, const double* v, const double* dx, const double* dv,
                      double* g_out, double* dg_out) {
  using T = Taylor<double, 1>;
  std::array<T, kMaxDim> xt, vt;
  for (int i = 0; i < m.dim(); ++i) {
    xt[i] = T::variable(x[i], dx[i]);
    vt[i] = T::variable(v[i], dv[i]);
  }
  const auto g = spray_kernel<T>(m, xt.data(), vt.data());
  for (int i = 0; i < m.dim(); ++i) {
    g_out[i] = g[i].c[0];
    dg_out[i] = g[i].c[1];
  }
}

Matrix connection(const Metric& m, const Vector& x, const Vector& v) {
  check_args(m, x, v);
  const int n = m.dim();
  Matrix nmat(n, n);
  const Vector zero = Vector::Zero(n);
  for (int k = 0; k < n; ++k) {
    const auto g = spray_jet<1>(m, x, v, zero, Vector::Unit(n, k));
    for (int i = 0; i < n; ++i) nmat(i, k) = g[i].c[1];
  }
  return nmat;
}

Matrix connection_derivative(const Metric& m, const Vector& x, const Vector& v, const Vector& dx,
                             const Vector& dv) {
  check_args(m, x, v);
  using In = Taylor<double, 1>;
  using Out = Taylor<In, 1>;
  const int n = m.dim();
  Matrix d(n, n);
  std::array<Out, kMaxDim> xt, vt;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      xt[i] = Out(In::variable(x[i], dx[i]));
      vt[i] = Out::variable(In::variable(v[i], dv[i]), In(i == j ? 1.0 : 0.0));
    }
    const auto g = spray_kernel<Out>(m, xt.data(), vt.data());
    for (int i = 0; i < n; ++i) d(i, j) = g[i].c[1].c[1];
  }
  return d;
}

SprayData spray_coefficients(const Metric& m, const Vector& x, const Vector& v) {
  check_args(m, x, v);
  const int n = m.dim();
  SprayData s;
  s.x = x;
  s.v = v;
  s.G.resize(n);
  spray(m, x.data(), v.data(), s.G.data());
  s.N = connection(m, x, v);

  const Vector zero = Vector::Zero(n);
  auto dir_coeff = [&]<int K>(const Vector& u) {
    const auto g = spray_jet<K>(m, x, v, zero, u);
    Vector r(n);
    for (int i = 0; i < n; ++i) r[i] = g[i].c[K];
    return r;
  };
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k) {
      const std::vector<Vector> u{Vector::Unit(n, j), Vector::Unit(n, k)};
      const Vector d2 = polarize(u, [&](const Vector& w) { return dir_coeff.template operator()<2>(w); });
      s.scale = std::max(s.scale, d2.cwiseAbs().maxCoeff());
      for (int l = k; l < n; ++l) {
        const std::vector<Vector> u3{Vector::Unit(n, j), Vector::Unit(n, k), Vector::Unit(n, l)};
        const Vector d3 = polarize(u3, [&](const Vector& w) { return dir_coeff.template operator()<3>(w); });
        s.berwald_norm = std::max(s.berwald_norm, d3.cwiseAbs().maxCoeff());
      }
    }
  return s;
}

Matrix berwald_curvature_operator(const Metric& m, const Vector& x, const Vector& v) {
  check_args(m, x, v);
  const int n = m.dim();
  const Vector zero = Vector::Zero(n);
  Vector g(n);
  spray(m, x.data(), v.data(), g.data());
  const Matrix nmat = connection(m, x, v);

  Matrix dgdx(n, n);
  for (int k = 0; k < n; ++k) {
    const auto jg = spray_jet<1>(m, x, v, Vector::Unit(n, k), zero);
    for (int i = 0; i < n; ++i) dgdx(i, k) = jg[i].c[1];
  }

  // Mixed second derivatives T((a, b), (0, e_k)) by polarization of order-2
  // jets, with the first direction normalized for conditioning.
  auto mixed = [&](const Vector& a, const Vector& b, int k) -> Vector {
    const double s = std::max(a.norm(), b.norm());
    if (s == 0.0) return Vector::Zero(n);
    const Vector ek = Vector::Unit(n, k);
    const auto plus = spray_jet<2>(m, x, v, a / s, b / s + ek);
    const auto minus = spray_jet<2>(m, x, v, a / s, b / s - ek);
    return 0.5 * s * (coeff(plus, n, 2) - coeff(minus, n, 2));
  };

  Matrix r = 2.0 * dgdx - nmat * nmat;
  for (int k = 0; k < n; ++k) r.col(k) += -mixed(v, zero, k) + 2.0 * mixed(zero, g, k);
  return r;
}

}  // namespace finsler
