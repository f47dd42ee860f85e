#pragma once

// Run configuration: one JSON document per run, checked against a
// per-experiment schema (unknown keys rejected, defaults filled in) before
// anything is computed.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "collapse/fieldloc.hpp"
#include "collapse/grw.hpp"
#include "collapse/relmodel.hpp"

namespace collapse {

using json = nlohmann::json;

/// The six experiments reachable from the command line.
const std::vector<std::string>& experiment_names();

/// Parses JSON text; syntax errors become ConfigError with line and column.
json parse_config_text(const std::string& text);
json load_config_file(const std::string& path);

/// Every schema violation, one line each ("key.path: constraint").
std::vector<std::string> config_violations(const json& config);

/// Validated config with defaults filled in. Throws ConfigError listing all
/// violations.
json normalize_config(const json& config);

/// FNV-1a 64 of the canonical dump of a normalized config, as 16 hex digits.
std::string config_digest(const json& normalized);

/// Builders from normalized sub-objects.
rel::RelConfig rel_config_from_json(const json& rel);
rel::KernelSpec kernel_from_json(const json& kernel);

}  // namespace collapse
