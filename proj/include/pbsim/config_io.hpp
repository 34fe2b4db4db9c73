#pragma once

#include <map>
#include <string>

#include "pbsim/market.hpp"

namespace pbsim {

/// Flat dotted-key view of a scenario, e.g. "flow_model.delta" or
/// "builders.1.loyal_share". Vectors of integers are comma separated.
using FlatConfig = std::map<std::string, std::string>;

FlatConfig to_flat(const ScenarioConfig& config);

/// Builds a config from flat keys. Missing keys keep their defaults; unknown
/// keys and unparsable values throw ConfigError naming the key.
ScenarioConfig from_flat(const FlatConfig& flat);

/// Canonical text form: one "key = value" line per key, keys sorted.
std::string serialize(const ScenarioConfig& config);

/// Parses the text form; '#' starts a comment, blank lines are ignored.
ScenarioConfig parse_config(const std::string& text);

/// Applies "key=value" to `config`; the key must name a known field.
ScenarioConfig apply_override(const ScenarioConfig& config, const std::string& assignment);

/// SHA-256 hex digest of the canonical serialization.
std::string config_digest(const ScenarioConfig& config);

/// SHA-256 hex digest of arbitrary bytes.
std::string sha256_hex(const std::string& bytes);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

}  // namespace pbsim
