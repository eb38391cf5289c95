#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "padrl/trainer.hpp"

namespace padrl {

// Every problem found in a config document, reported together.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> problems);
  std::vector<std::string> problems;
};

/// Reads a config document, filling every absent field with its default.
/// Unknown keys, wrong types and violated constraints all raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const StageConfig& cfg);
StageConfig stage_from_json(const nlohmann::json& doc, std::string_view path = "stage");

std::vector<std::string> violations(const StageConfig& cfg, std::string_view path = "stage");
std::vector<std::string> violations(const ExperimentConfig& cfg);

std::uint64_t fnv1a(std::string_view text);

/// FNV-1a over the canonical JSON of a resolved stage.
std::uint64_t config_hash(const StageConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Library version string.
std::string_view version() noexcept;

/// Applies "dotted.path=value". Paths rooted at seed, policy or stages address
/// the document directly; any other path is applied to every stage
/// (e.g. "pad.rho=0.25"). The value is parsed as JSON, falling back to a
/// plain string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

}  // namespace padrl
