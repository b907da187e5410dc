// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "itpatch/fluorescence.hpp"
#include "itpatch/oracle_types.hpp"

namespace itpatch {

enum class GoalKind { Hide, Generate, Misclassify };

const char* to_string(GoalKind kind);
GoalKind parse_goal(const std::string& name);

struct AttackGoal {
  GoalKind kind = GoalKind::Misclassify;
  // Original label (Misclassify).
  int label = 0;
  // Ground-truth sign box (Hide) or blank-sign target area (Generate).
  BBox box;

  static AttackGoal hide(BBox truth) { return {GoalKind::Hide, 0, truth}; }
  static AttackGoal generate(BBox target) { return {GoalKind::Generate, 0, target}; }
  static AttackGoal misclassify(int y) { return {GoalKind::Misclassify, y, {}}; }

  Task task() const { return kind == GoalKind::Misclassify ? Task::Classify : Task::Detect; }
};

struct LossConfig {
  double lambda = 0.05;
  double beta = 1.0;
  double iou_match_threshold = 0.3;
  double prob_floor = 1e-9;
  // Generate counts as achieved when a detection over the target reaches this.
  double generate_threshold = 0.5;

  void validate() const;
};

// Intersection over union with continuous box areas; 0 for degenerate boxes.
double iou(const BBox& a, const BBox& b);

// max confidence + beta * max IoU over detections matching the truth box.
double hiding_loss(const std::vector<Detection>& dets, const BBox& truth, const LossConfig& cfg);
// -max confidence over detections overlapping the target.
double generative_loss(const std::vector<Detection>& dets, const BBox& target);
// -log(max(p_y, floor)). Throws ContractViolation when y is out of range.
double misclassification_loss(std::span<const double> probs, int y, const LossConfig& cfg);
// Sum of shape areas divided by the sign-region area.
double area_loss(const PatchParams& patch, double region_area);

// The goal's loss on one oracle answer.
double goal_loss(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg);

// The per-sample term the search minimizes: goal_loss for Hide and Generate,
// -goal_loss = log(max(p_y, floor)) for Misclassify so that p_y is driven down.
double search_loss(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg);

// mean(opt_losses) + lambda * area.
double total_loss(std::span<const double> opt_losses, double area, const LossConfig& cfg);

// Goal condition on one triggered answer.
bool goal_achieved(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg);
// Untriggered answer still matches the clean behaviour.
bool untriggered_correct(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg);

}  // namespace itpatch
