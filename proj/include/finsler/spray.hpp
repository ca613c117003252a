#pragma once

// Fundamental tensor, geodesic spray, nonlinear connection, Berwald tensor
// and the Jacobi (Berwald curvature) operator. Conventions: geodesics solve
// x'' + 2 G(x, x') = 0, N^i_j = dG^i/dv^j, D W = W' + N W. See
// docs/conventions.md.

#include "finsler/metric.hpp"

namespace finsler {

struct FundamentalTensor {
  Vector x;
  Vector v;
  Matrix g;        // 1/2 Hess_v F^2
  Matrix inverse;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

// Throws DegeneracyError when the smallest eigenvalue is below
// floor * largest (or nonpositive).
FundamentalTensor fundamental_tensor(const Metric& m, const Vector& x, const Vector& v, double floor = 1e-12);

// Just the matrix, no eigen-analysis.
Matrix fundamental_matrix(const Metric& m, const Vector& x, const Vector& v);

struct SprayData {
  Vector x;
  Vector v;
  Vector G;
  Matrix N;
  double berwald_norm = 0.0;  // max |d^3 G^i / dv^j dv^k dv^l|
  double scale = 0.0;         // max |d^2 G^i / dv^j dv^k|
};

SprayData spray_coefficients(const Metric& m, const Vector& x, const Vector& v);

// G only, on raw arrays (hot path for integrators).
void spray(const Metric& m, const double* x, const double* v, double* g_out);

// G and its directional derivative dG[(dx, dv)] in one jet evaluation.
void spray_derivative(const Metric& m, const double* x, const double* v, const double* dx, const double* dv,
                      double* g_out, double* dg_out);

// N^i_j = dG^i/dv^j.
Matrix connection(const Metric& m, const Vector& x, const Vector& v);

// d/ds N(x + s dx, v + s dv) at s = 0.
Matrix connection_derivative(const Metric& m, const Vector& x, const Vector& v, const Vector& dx, const Vector& dv);

// R^i_k = 2 dG^i/dx^k - v^j d2G^i/dx^j dv^k + 2 G^j d2G^i/dv^j dv^k - N^i_j N^j_k.
Matrix berwald_curvature_operator(const Metric& m, const Vector& x, const Vector& v);

}  // namespace finsler
