// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "itpatch/fluorescence.hpp"
#include "itpatch/image.hpp"

namespace itpatch {

struct Bounds {
  double lo = 0;
  double hi = 0;
  // Rounded to the nearest integer before every evaluation.
  bool integer = false;
};

using Objective = std::function<double(const std::vector<double>&)>;
// Moves a clamped position onto the feasible set (in place).
using Projection = std::function<void(std::vector<double>&)>;
using Predicate = std::function<bool(const std::vector<double>&)>;

struct SearchSpace {
  std::vector<Bounds> bounds;
  Projection project;

  std::size_t dims() const { return bounds.size(); }
  // Clamp, project, then round integer dimensions.
  std::vector<double> feasible(std::vector<double> x) const;
};

struct PsoConfig {
  int swarm_size = 30;
  int iterations = 30;
  int restarts = 5;
  double inertia = 0.729;
  double cognitive = 1.49445;
  double social = 1.49445;
  std::uint64_t seed = 0;
  // Threads for objective evaluation; <= 0 uses all cores.
  int jobs = 0;

  void validate() const;
};

struct OptimizationTrace {
  int restart = 0;
  std::uint64_t seed = 0;
  // Global best after initialisation (entry 0) and after every iteration.
  std::vector<double> best_loss;
  std::vector<double> best_theta;
  std::size_t evaluations = 0;
  // Set when an objective evaluation threw; the restart stopped there.
  std::string error;

  double final_loss() const;
};

// One PSO run. Objective failures are caught and recorded in the trace.
OptimizationTrace optimize(const Objective& objective, const SearchSpace& space,
                           const PsoConfig& cfg, std::uint64_t seed, int restart = 0);

struct RestartResult {
  std::vector<double> best_theta;
  double best_loss = 0;
  bool success = false;
  std::vector<OptimizationTrace> traces;
};

// Up to cfg.restarts runs with seeds derived from cfg.seed; stops once
// `success` holds for a run's best point. The objective factory is called
// once per restart with the restart index. With stop_on_error a failed
// restart ends the loop instead of moving on.
RestartResult optimize_with_restarts(const std::function<Objective(int)>& make_objective,
                                     const SearchSpace& space, const PsoConfig& cfg,
                                     const Predicate& success, bool stop_on_error = false);
RestartResult optimize_with_restarts(const Objective& objective, const SearchSpace& space,
                                     const PsoConfig& cfg, const Predicate& success,
                                     bool stop_on_error = false);

// One JSON object per line: restart, iteration, best_loss.
std::string traces_to_jsonl(const std::vector<OptimizationTrace>& traces);

// Nearest set pixel of `mask` to (x, y) by Euclidean distance (ties: first in
// raster order). Throws ContractViolation on an empty mask.
std::array<int, 2> nearest_in_mask(const Mask& mask, double x, double y);

// Search bounds for patch parameters. Zero-width ranges pin a parameter.
struct PatchBounds {
  double radius_lo = 0;
  double radius_hi = 15;
  double alpha_lo = 0.7;
  double alpha_hi = 0.9;
  std::array<double, 3> color_lo{0, 0, 0};
  std::array<double, 3> color_hi{255, 255, 255};
};

// Flat layout of K shapes: circle (x, y, r, R, G, B, alpha); line (x0, y0, x1,
// y1, w, R, G, B, alpha); curve (x0, y0, cx, cy, x1, y1, w, R, G, B, alpha).
class PatchSpace {
 public:
  // Shape points are confined to `feasible` (usually the sign mask).
  PatchSpace(std::vector<ShapeKind> kinds, Mask feasible, PatchBounds bounds, double l1,
             double l2);

  static std::size_t dims_of(ShapeKind kind);

  std::size_t dims() const { return space_.dims(); }
  const SearchSpace& space() const { return space_; }
  const std::vector<ShapeKind>& kinds() const { return kinds_; }
  const Mask& feasible_mask() const { return feasible_; }

  std::vector<double> encode(const PatchParams& patch) const;
  // Clamps into bounds and rounds coordinates and colors. Throws
  // ContractViolation on a length mismatch.
  PatchParams decode(std::span<const double> x) const;

 private:
  std::vector<ShapeKind> kinds_;
  Mask feasible_;
  double l1_, l2_;
  SearchSpace space_;
};

}  // namespace itpatch
