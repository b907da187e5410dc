// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "itpatch/attack.hpp"
#include "itpatch/synth.hpp"
#include "json.hpp"

namespace itpatch {

inline constexpr int kReportSchemaVersion = 1;

// One item's outcome in both states.
struct AsrRecord {
  std::string item;
  int label = -1;
  int untriggered_label = -1;
  int triggered_label = -1;
  bool untriggered_ok = false;
  bool triggered_ok = false;
  std::string error;

  bool success() const { return untriggered_ok && triggered_ok; }
  bool operator==(const AsrRecord&) const = default;
};

// Classification record: untriggered correct when it equals y, triggered
// fooled when it differs from y.
AsrRecord classification_record(std::string item, int y, int untriggered, int triggered);

struct AsrReport {
  std::size_t n = 0;
  std::size_t successes = 0;
  double asr = 0;
  std::vector<AsrRecord> records;
};

// Throws ContractViolation on an empty record set.
AsrReport asr(std::vector<AsrRecord> records);

// Record for one attacked item: untriggered_ok = every hold-out sample
// correct, triggered_ok = hold-out triggered rate reached success_rate.
AsrRecord attack_record(std::string item, const AttackResult& r, double success_rate = 0.8);

enum class SweepParam { Radius, Color, CircleCount, PositionBlock, Shape };

const char* to_string(SweepParam p);
SweepParam parse_sweep_param(const std::string& name);

struct SweepValue {
  std::string label;
  std::vector<double> numbers;
  bool operator==(const SweepValue&) const = default;
};

// Default grids: radius 1..15, 27 colors from {0,128,255}^3, 1..5 circles,
// 64 position blocks (8x8 grid), and circle/line/curve.
std::vector<SweepValue> default_grid(SweepParam p);

struct EvalConfig {
  // Reduced per-cell PSO budget unless full_budget is set.
  int iterations = 15;
  int restarts = 2;
  bool full_budget = false;
  int corpus_size = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SweepSpec {
  SweepParam param = SweepParam::Radius;
  std::vector<SweepValue> grid;
  AttackConfig attack;
  EvalConfig eval;
};

struct SweepCell {
  SweepValue value;
  AsrReport report;
  std::size_t errors = 0;
};

struct SweepTable {
  SweepParam param = SweepParam::Radius;
  std::uint64_t seed = 0;
  std::vector<SweepCell> cells;
};

// Attack config with one parameter pinned to `value`; throws ConfigError on
// a malformed value. image_size scales position blocks.
AttackConfig pin_parameter(const AttackConfig& base, SweepParam p, const SweepValue& value,
                           int image_width, int image_height);

// Applies the reduced or full PSO budget.
AttackConfig budgeted(const AttackConfig& base, const EvalConfig& eval);

// Seed used for corpus item i in every cell, so cells are paired.
std::uint64_t item_seed(std::uint64_t base, std::size_t item);

// Misclassify attacks per corpus item and grid value. Backend failures are
// recorded in the cell and the sweep continues.
SweepTable run_sweep(const SweepSpec& spec, const std::vector<SynthItem>& corpus, Backend& backend,
                     int jobs = 1);

struct SourcePatches {
  std::string name;
  // Aligned with the corpus.
  std::vector<AttackResult> results;
};

struct NamedBackend {
  std::string name;
  BackendPtr backend;
};

struct TransferMatrix {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  // cells[source][target]
  std::vector<std::vector<AsrReport>> cells;
};

// Re-verifies every source patch against every target with the patch's own
// hold-out seed.
TransferMatrix transfer_matrix(const std::vector<SourcePatches>& sources,
                               const std::vector<NamedBackend>& targets,
                               const std::vector<SynthItem>& corpus, const AttackConfig& cfg);

// Stable-column CSV; the header is always written.
std::string sweep_csv(const SweepTable& t);
nlohmann::ordered_json sweep_json(const SweepTable& t);
SweepTable sweep_from_json(const nlohmann::json& j);
std::string transfer_csv(const TransferMatrix& m);
nlohmann::ordered_json transfer_json(const TransferMatrix& m);

// <stem>.csv and <stem>.json under dir. Throws IoError.
void write_report(const std::string& csv, const nlohmann::ordered_json& json,
                  const std::filesystem::path& dir, const std::string& stem);

}  // namespace itpatch
