#pragma once

// Metric spec files: JSON documents {name?, family, dimension, params,
// chart_domain}. The schema is documented in docs/metric_spec.md.

#include <string>

#include <nlohmann/json.hpp>

#include "finsler/metric.hpp"

namespace finsler {

nlohmann::ordered_json spec_to_json(const MetricSpec& spec);

// Validates the document against the schema; on failure throws SchemaError
// whose message lists every offending field path.
MetricSpec spec_from_json(const nlohmann::json& j);

// Parses a spec file. Parse errors report line and column.
MetricSpec load_spec(const std::string& path);

void save_spec(const MetricSpec& spec, const std::string& path);

}  // namespace finsler
