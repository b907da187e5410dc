// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "itpatch/fluorescence.hpp"
#include "itpatch/localization.hpp"
#include "itpatch/objectives.hpp"
#include "itpatch/oracle.hpp"
#include "itpatch/pso.hpp"
#include "itpatch/transforms.hpp"
#include "json.hpp"

namespace itpatch {

struct AttackConfig {
  LocalizerConfig localizer;
  RegionVariant region = RegionVariant::Whole;
  std::vector<ShapeKind> shapes{ShapeKind::Circle};
  PatchBounds bounds;
  double l1 = 1.05;
  double l2 = 1.35;
  // Optional [x0, x1) x [y0, y1) pixel box further confining shape points.
  std::optional<std::array<int, 4>> position_block;

  TransformSpec transforms;
  LossConfig loss;
  PsoConfig pso;
  int eot_samples_per_eval = 4;
  int holdout_samples = 16;
  double holdout_success_rate = 0.8;
  // Master seed; PSO, EOT and hold-out seeds are derived from it.
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Throws ConfigError when the backend cannot answer the goal's task.
void check_backend(const AttackGoal& goal, const Backend& backend);

struct SampleOutcome {
  TransformSample transform;
  // Classification: argmax labels. Detection: class of the most confident
  // detection overlapping the goal box, or -1.
  int untriggered_label = -1;
  int triggered_label = -1;
  bool untriggered_ok = false;
  bool triggered_ok = false;
  double triggered_loss = 0;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<SampleOutcome> samples;
  double triggered_rate = 0;
  bool untriggered_all_correct = false;
  bool success = false;
};

// Renders the patch triggered and untriggered over `samples` transforms drawn
// from `seed` and applies the hold-out rule. Throws ContractViolation when
// samples < 1.
VerifyReport verify(const PatchParams& patch, const ImageBuffer& img, const SignRegion& whole,
                    const SignRegion& region, const AttackGoal& goal, const AttackConfig& cfg,
                    Backend& backend, std::uint64_t seed, int samples);
// Localizes first.
VerifyReport verify(const PatchParams& patch, const ImageBuffer& img, const AttackGoal& goal,
                    const AttackConfig& cfg, Backend& backend, std::uint64_t seed, int samples);

struct AttackResult {
  AttackGoal goal;
  PatchParams best;
  std::vector<double> best_theta;
  double final_loss = 0;
  bool search_success = false;
  bool success = false;
  // Predictions on the untransformed renders.
  int untriggered_prediction = -1;
  int triggered_prediction = -1;
  VerifyReport verification;
  std::vector<OptimizationTrace> traces;
  double wall_seconds = 0;
  std::uint64_t seed = 0;
  std::uint64_t pso_seed = 0;
  std::uint64_t eot_seed = 0;
  std::uint64_t holdout_seed = 0;
  // Set when the search stopped on a backend error.
  std::string error;
};

struct AttackSeeds {
  std::uint64_t pso, eot, holdout;
};
AttackSeeds attack_seeds(std::uint64_t master);

// Localize, search, verify. NoRegionFound propagates; backend failures end
// the search and are reported in `error` with the traces so far.
AttackResult run_attack(const ImageBuffer& img, const AttackGoal& goal, const AttackConfig& cfg,
                        Backend& backend);

// Triggered, untriggered and amplified |difference| renders of a patch.
struct AttackRenders {
  ImageBuffer triggered;
  ImageBuffer untriggered;
  ImageBuffer difference;
};
AttackRenders render_states(const ImageBuffer& img, const SignRegion& region,
                            const PatchParams& patch, double residual_alpha);

void to_json(nlohmann::json& j, const AttackGoal& g);
void from_json(const nlohmann::json& j, AttackGoal& g);
void to_json(nlohmann::json& j, const VerifyReport& r);
void to_json(nlohmann::json& j, const AttackResult& r);
// Reads back the patch, flags and seeds (traces are not part of the JSON).
void from_json(const nlohmann::json& j, AttackResult& r);

// result.json, trace.jsonl and triggered/untriggered/difference PNGs.
void write_attack_outputs(const AttackResult& result, const ImageBuffer& img,
                          const AttackConfig& cfg, const std::filesystem::path& dir);

}  // namespace itpatch
