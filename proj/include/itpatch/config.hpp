// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "itpatch/attack.hpp"
#include "itpatch/evalsuite.hpp"
#include "itpatch/oracle.hpp"
#include "json.hpp"

namespace itpatch {

struct RenderConfig {
  double l1 = 1.05;
  double l2 = 1.35;
  std::vector<ShapeKind> shapes{ShapeKind::Circle};
  PatchBounds bounds;
  RegionVariant region = RegionVariant::Whole;
  std::optional<std::array<int, 4>> position_block;
};

struct DefenseConfig {
  enum class Kind { GaussianSmoothing, InputRandomization };
  Kind kind = Kind::GaussianSmoothing;
  double sigma = 0.05;
  int draws = 8;
  int from_size = 32;
  int to_size = 36;
  std::uint64_t seed = 0;
};

struct OracleConfig {
  // "toy-classifier", "toy-detector" or "external".
  std::string backend = "toy-classifier";
  std::string endpoint;
  // Toy weights file; empty uses the built-in synthetic templates.
  std::string weights;
  int timeout_ms = 10000;
  std::size_t classes = 0;
  // Applied outermost first.
  std::vector<DefenseConfig> defenses;
};

struct AttackSection {
  int eot_samples_per_eval = 4;
  int holdout_samples = 16;
  double holdout_success_rate = 0.8;
};

struct GlobalConfig {
  LocalizerConfig localizer;
  RenderConfig render;
  TransformSpec transforms;
  LossConfig loss;
  PsoConfig pso;
  OracleConfig oracle;
  EvalConfig eval;
  AttackSection attack;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  AttackConfig attack_config() const;
};

// Every field, defaults included.
nlohmann::ordered_json to_json(const GlobalConfig& c);
// Missing keys keep their defaults; unknown keys throw ConfigError.
GlobalConfig config_from_json(const nlohmann::json& j);
// Also loads transform backgrounds. Throws ConfigError / IoError.
GlobalConfig load_config(const std::filesystem::path& path);

// Backend kind from a --backend value: toy-classifier, toy-detector or
// external:ADDR. An empty "external" address falls back to the
// ITPATCH_ORACLE_ADDR environment variable.
void apply_backend_flag(OracleConfig& cfg, const std::string& flag);
BackendPtr make_backend(const OracleConfig& cfg);

}  // namespace itpatch
