#pragma once

// Flag curvature and the spectrum of the Jacobi operator.

#include <cstdint>
#include <string>
#include <vector>

#include "finsler/metric.hpp"

namespace finsler {

struct FlagData {
  Vector x, v, w;
  Matrix g;  // g_v
  Matrix R;  // Jacobi operator at (x, v)
  double wedge2 = 0.0;  // g(v,v) g(w,w) - g(v,w)^2
  double K = 0.0;
};

// Throws InputError when v, w are (numerically) dependent.
FlagData flag_data(const Metric& m, const Vector& x, const Vector& v, const Vector& w);
double flag_curvature(const Metric& m, const Vector& x, const Vector& v, const Vector& w);

struct JacobiSpectrum {
  Vector eigenvalues;   // ascending; includes the flagpole zero
  Matrix eigenvectors;  // columns, g_v-orthonormal
  int flagpole = 0;     // column index carrying v / F(v)
  double asymmetry = 0.0;  // max |g R - (g R)^T| relative to |g| F^2
  double tolerance = 0.0;  // absolute threshold used for the verdict
  bool nonpositive = true;
  double max_transverse() const;  // largest eigenvalue other than the flagpole one
};

// Eigenvalues of R as a g_v-symmetric operator, after splitting off the
// flagpole. The verdict counts eigenvalues <= rel_tol * F(x,v)^2 as
// nonpositive. ConsistencyError when g R is not symmetric to 1e-6.
JacobiSpectrum jacobi_spectrum(const Metric& m, const Vector& x, const Vector& v, double rel_tol = 1e-7);

struct ScanSample {
  std::uint64_t seed = 0;
  Vector x, v;  // F(x, v) = 1
  Vector eigenvalues;
  bool nonpositive = true;
};

struct ScanReport {
  std::uint64_t seed = 0;
  double rel_tol = 0.0;
  std::vector<ScanSample> samples;
  double max_eigenvalue = 0.0;  // over transverse eigenvalues
  int witness = -1;             // sample attaining max_eigenvalue
  bool nonpositive = true;

  // columns x1..xn, v1..vn, lambda1..lambdan, verdict
  void write_csv(const std::string& path) const;
};

ScanReport nonpositivity_scan(const Metric& m, const Region& region, int sample_count, std::uint64_t seed,
                              double rel_tol = 1e-7);

}  // namespace finsler
