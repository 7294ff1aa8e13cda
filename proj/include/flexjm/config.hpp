#pragma once

#include <string>

#include "flexjm/estimation.hpp"
#include "flexjm/model.hpp"

namespace flexjm {

// Everything a fit run needs besides the data: the model declaration and the
// sampler/mode-finder settings.
struct RunConfig {
  JointModelSpec model;
  FitOptions fit;
};

// Parse a JSON model configuration (syntax documented in the README).
// Strict: unknown keys, missing required sections, or an empty association
// section raise ConfigError naming the offending location.
RunConfig parse_model_config(const std::string& path);
RunConfig parse_model_config_text(const std::string& text,
                                  const std::string& origin);

// Canonical serialization of a parsed configuration with all defaults
// materialized and keys sorted; semantically equal files serialize to
// identical text.
std::string config_canonical(const RunConfig& cfg);

// 16-hex-digit FNV-1a stamp of the canonical form, excluding the seed (the
// seed identifies a run, not a configuration, and lives in the manifest).
std::string config_hash(const RunConfig& cfg);

// FNV-1a 64-bit over raw bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace flexjm
