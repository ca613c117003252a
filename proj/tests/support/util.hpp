#pragma once

#include <initializer_list>
#include <utility>

#include "finsler/metric.hpp"
#include "finsler/sampling.hpp"

namespace testutil {

inline finsler::Vector vec(std::initializer_list<double> xs) {
  finsler::Vector v(xs.size());
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Random point in the sampling region with a velocity of F-length probe_length.
inline std::pair<finsler::Vector, finsler::Vector> probe(const finsler::Metric& m, finsler::Rng& rng) {
  const finsler::Vector x = rng.in_box(m.chart().sample_lower(), m.chart().sample_upper());
  finsler::Vector v = rng.unit_vector(m.dim());
  v *= m.chart().probe_length / m.norm(x, v);
  return {x, v};
}

}  // namespace testutil
