#pragma once

// Canonical text configuration: flat `key = value` lines, `#` starts a
// comment (at line start or after whitespace). Unknown keys are rejected.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntrr/model.hpp"
#include "ntrr/train_config.hpp"

namespace ntrr::data {

struct RunConfig {
  model::ModelConfig model;
  training::TrainConfig train;
};

struct ConfigKey {
  std::string key;
  std::string section;  // "model" or "train"
  std::string type;
  std::string default_value;
  std::string description;
};

/// Every accepted key with its default, in canonical order.
const std::vector<ConfigKey>& config_schema();

RunConfig parse_run_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);
/// Applies one `key=value` override (CLI --set). Type-checked only; call
/// validate_run_config once all overrides are in.
void apply_override(RunConfig& config, std::string_view assignment);
/// All overrides in order, then the cross-key checks.
void apply_overrides(RunConfig& config, std::span<const std::string> assignments);
/// Range and cross-key checks (num_heads divides model_dim, ...).
void validate_run_config(const RunConfig& config);
void set_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& config, std::string_view key);
/// All keys, canonical order; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& config);
/// Model-section keys only.
std::string model_config_text(const model::ModelConfig& config);
/// Markdown page describing every key and default.
std::string config_reference();

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace ntrr::data
