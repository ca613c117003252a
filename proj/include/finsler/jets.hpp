#pragma once

// Directional Taylor jets and mixed partial derivatives of scalar
// expressions, built on the Taylor arithmetic in taylor.hpp.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "finsler/expression.hpp"
#include "finsler/taylor.hpp"

namespace finsler {

inline constexpr int kMaxJetOrder = 8;

// coeffs[d][k] = (1/k!) d^k/dt^k f(base + t * directions[d]) at t = 0.
struct Jet {
  int order = 0;
  std::vector<std::vector<double>> coeffs;

  const std::vector<double>& along(std::size_t d) const { return coeffs.at(d); }
};

Jet jet_eval(const Tape& f, const Eigen::VectorXd& base, const std::vector<Eigen::VectorXd>& directions, int order);
Jet jet_eval(const Expr& f, const Eigen::VectorXd& base, const std::vector<Eigen::VectorXd>& directions, int order);

// d^|a| f / dz_0^a_0 ... dz_{m-1}^a_{m-1} at base, by polarization of
// directional jets.
double partials(const Tape& f, const Eigen::VectorXd& base, const std::vector<int>& multi_index);
double partials(const Expr& f, const Eigen::VectorXd& base, const std::vector<int>& multi_index);

// Symmetric k-linear derivative D^k f(base)[u_1, ..., u_k] from k-th order
// directional coefficients:
//   D^k f[u_1..u_k] = 2^{-(k-1)} sum_{e_1 = +1, e_2..e_k = +-1} e_1...e_k c_k(sum e_m u_m)
// `coeff(u)` must return c_k along u.
template <class Vec, class Coeff>
auto polarize(const std::vector<Vec>& u, Coeff&& coeff) {
  const int k = static_cast<int>(u.size());
  using R = decltype(coeff(u[0]));
  R acc{};
  bool first = true;
  for (unsigned mask = 0; mask < (1u << (k - 1)); ++mask) {
    Vec dir = u[0];
    double sign = 1.0;
    for (int m = 1; m < k; ++m) {
      if (mask & (1u << (m - 1))) {
        dir = dir - u[m];
        sign = -sign;
      } else {
        dir = dir + u[m];
      }
    }
    R term = coeff(dir);
    term = term * sign;  // R must be a value type, not an expression
    if (first) {
      acc = term;
      first = false;
    } else {
      acc = acc + term;
    }
  }
  acc = acc * std::ldexp(1.0, -(k - 1));
  return acc;
}

}  // namespace finsler
