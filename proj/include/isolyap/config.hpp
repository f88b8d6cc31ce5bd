#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "isolyap/experiments.hpp"

namespace isolyap {

/// Parses `key = value` text. Several pairs may share a line; `#` starts a
/// comment. Strings may be quoted; lists use brackets.
///
/// Required: seed, field, d, ensemble, n_grid, replications.
/// Optional: mc_samples (100000), threads (1), out (""), format (jsonl),
/// estimators (chosen from the ensemble).
///
/// Throws ConfigError naming the key and line for unknown or duplicate
/// keys, malformed values and constraint violations.
ExperimentConfig parse_config(std::string_view text);

/// Keys present in the text, sorted. Throws ConfigError on malformed syntax.
std::vector<std::string> config_keys(std::string_view text);

/// Canonical text; parse_config(canonical_config(c)) == c.
std::string canonical_config(const ExperimentConfig& config);

}  // namespace isolyap
