#pragma once

// Spray coefficients on an arbitrary scalar type. S = double gives values;
// S = Taylor<double, K> gives directional derivatives of G in (x, v).

#include <array>
#include <cmath>

#include "finsler/errors.hpp"
#include "finsler/metric.hpp"
#include "finsler/taylor.hpp"

namespace finsler {

// Solves a x = b in place (a is n x n row-major, destroyed). Pivots on the
// primal part.
template <class S>
void solve_small(std::array<S, kMaxDim * kMaxDim>& a, std::array<S, kMaxDim>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(primal(a[r * n + col])) > std::fabs(primal(a[piv * n + col]))) piv = r;
    if (primal(a[piv * n + col]) == 0.0) throw DegeneracyError("singular fundamental tensor");
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    const S inv = S(1.0) / a[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const S f = a[r * n + col] * inv;
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    S acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[r * n + c] * b[c];
    b[r] = acc / a[r * n + r];
  }
}

// G^i = 1/2 H^{-1} (d^2F^2/dx^k dv^l v^k - dF^2/dx^l), H = Hess_v F^2.
template <class S>
std::array<S, kMaxDim> spray_kernel(const Metric& m, const S* x, const S* v) {
  using J = Taylor<S, 2>;
  const int n = m.dim();
  std::array<J, kMaxDim> xj, vj;
  const S zero(0.0);
  // Jet of F^2 along the direction (dx, dv); null means zero.
  auto along = [&](const S* dx, const S* dv) {
    for (int i = 0; i < n; ++i) {
      xj[i] = J::variable(x[i], dx ? dx[i] : zero);
      vj[i] = J::variable(v[i], dv ? dv[i] : zero);
    }
    return m.f2<J>(xj.data(), vj.data());
  };
  std::array<S, kMaxDim> e{};
  auto unit = [&](int i) {
    for (int k = 0; k < n; ++k) e[k] = S(k == i ? 1.0 : 0.0);
    return e.data();
  };

  std::array<S, kMaxDim * kMaxDim> h;
  std::array<S, kMaxDim> diag_c2;
  for (int i = 0; i < n; ++i) {
    diag_c2[i] = along(nullptr, unit(i)).c[2];
    h[i * n + i] = 2.0 * diag_c2[i];
  }
  std::array<S, kMaxDim> pair{};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      for (int k = 0; k < n; ++k) pair[k] = S(k == i || k == j ? 1.0 : 0.0);
      const S hij = along(nullptr, pair.data()).c[2] - diag_c2[i] - diag_c2[j];
      h[i * n + j] = hij;
      h[j * n + i] = hij;
    }

  const S c2_vv = along(v, nullptr).c[2];
  std::array<S, kMaxDim> rhs;
  for (int l = 0; l < n; ++l) {
    const S grad_x = along(unit(l), nullptr).c[1];
    const S mixed = along(v, unit(l)).c[2] - c2_vv - diag_c2[l];
    rhs[l] = mixed - grad_x;
  }
  solve_small(h, rhs, n);
  for (int l = 0; l < n; ++l) rhs[l] = 0.5 * rhs[l];
  return rhs;
}

}  // namespace finsler
