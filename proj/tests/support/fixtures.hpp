#pragma once

#include <string>
#include <vector>

#include "finsler/metric.hpp"
#include "finsler/metric_io.hpp"

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(FINSLER_FIXTURE_DIR) + "/" + name + ".json"; }

inline finsler::Metric load(const std::string& name) { return finsler::Metric(finsler::load_spec(path(name))); }

inline const std::vector<std::string>& all() {
  static const std::vector<std::string> names{"euclidean",    "poincare",     "sphere_chart",   "minkowski_quartic",
                                              "randers_const", "randers_sine", "berwald_product"};
  return names;
}

}  // namespace fixtures
