// SPDX-License-Identifier: Apache-2.0

#include "itpatch/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "itpatch/error.hpp"

namespace itpatch {

const char* to_string(Task task) { return task == Task::Classify ? "classify" : "detect"; }

Task parse_task(const std::string& name) {
  if (name == "classify") return Task::Classify;
  if (name == "detect") return Task::Detect;
  throw ValidationError("unknown task: " + name);
}

double Detection::max_class_score() const {
  if (class_scores.empty()) return 0.0;
  return *std::max_element(class_scores.begin(), class_scores.end());
}

int OracleResponse::argmax() const {
  if (probs.empty()) throw ContractViolation("argmax of an empty probability vector");
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

void validate_response(const OracleResponse& r, std::size_t classes) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (r.task == Task::Classify) {
    if (r.probs.empty()) throw ValidationError("classify response without probs");
    if (classes != 0 && r.probs.size() != classes) {
      throw ValidationError("expected " + std::to_string(classes) + " classes, got " +
                            std::to_string(r.probs.size()));
    }
    double sum = 0;
    for (double p : r.probs) {
      if (!unit(p)) throw ValidationError("probability outside [0, 1]");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-4) throw ValidationError("probabilities do not sum to 1");
    return;
  }
  for (const auto& d : r.detections) {
    if (!unit(d.object_score)) throw ValidationError("object score outside [0, 1]");
    if (classes != 0 && d.class_scores.size() != classes) {
      throw ValidationError("detection class count mismatch");
    }
    for (double s : d.class_scores) {
      if (!unit(s)) throw ValidationError("class score outside [0, 1]");
    }
    if (!d.bbox.valid()) throw ValidationError("detection box has inverted corners");
  }
}

const char* to_string(GoalKind kind) {
  switch (kind) {
    case GoalKind::Hide:
      return "hide";
    case GoalKind::Generate:
      return "generate";
    case GoalKind::Misclassify:
      return "misclassify";
  }
  return "?";
}

GoalKind parse_goal(const std::string& name) {
  if (name == "hide") return GoalKind::Hide;
  if (name == "generate") return GoalKind::Generate;
  if (name == "misclassify") return GoalKind::Misclassify;
  throw ConfigError("unknown goal: " + name);
}

void LossConfig::validate() const {
  if (!(lambda >= 0) || !(beta >= 0)) throw ConfigError("loss.lambda and loss.beta must be >= 0");
  if (!(iou_match_threshold >= 0 && iou_match_threshold <= 1)) {
    throw ConfigError("loss.iou_match_threshold must lie in [0, 1]");
  }
  if (!(prob_floor > 0 && prob_floor <= 1e-3)) throw ConfigError("loss.prob_floor must lie in (0, 1e-3]");
  if (!(generate_threshold >= 0 && generate_threshold <= 1)) {
    throw ConfigError("loss.generate_threshold must lie in [0, 1]");
  }
}

double iou(const BBox& a, const BBox& b) {
  const double ua = a.area(), ub = b.area();
  if (ua <= 0 || ub <= 0) return 0.0;
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (ua + ub - inter);
}

double hiding_loss(const std::vector<Detection>& dets, const BBox& truth, const LossConfig& cfg) {
  double best_conf = 0, best_iou = 0;
  bool matched = false;
  for (const auto& d : dets) {
    const double o = iou(d.bbox, truth);
    if (o <= cfg.iou_match_threshold) continue;
    matched = true;
    best_conf = std::max(best_conf, d.confidence());
    best_iou = std::max(best_iou, o);
  }
  return matched ? best_conf + cfg.beta * best_iou : 0.0;
}

double generative_loss(const std::vector<Detection>& dets, const BBox& target) {
  double best = 0;
  for (const auto& d : dets) {
    if (iou(d.bbox, target) > 0) best = std::max(best, d.confidence());
  }
  return -best;
}

double misclassification_loss(std::span<const double> probs, int y, const LossConfig& cfg) {
  if (y < 0 || static_cast<std::size_t>(y) >= probs.size()) {
    throw ContractViolation("label " + std::to_string(y) + " outside the probability vector");
  }
  return -std::log(std::max(probs[static_cast<std::size_t>(y)], cfg.prob_floor));
}

double area_loss(const PatchParams& patch, double region_area) {
  if (!(region_area > 0)) throw ContractViolation("area_loss needs a positive region area");
  double sum = 0;
  for (const auto& s : patch.shapes) sum += s.geometric_area();
  return sum / region_area;
}

double goal_loss(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg) {
  switch (goal.kind) {
    case GoalKind::Hide:
      return hiding_loss(r.detections, goal.box, cfg);
    case GoalKind::Generate:
      return generative_loss(r.detections, goal.box);
    case GoalKind::Misclassify:
      return misclassification_loss(r.probs, goal.label, cfg);
  }
  return 0.0;
}

double search_loss(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg) {
  const double l = goal_loss(goal, r, cfg);
  return goal.kind == GoalKind::Misclassify ? -l : l;
}

double total_loss(std::span<const double> opt_losses, double area, const LossConfig& cfg) {
  if (opt_losses.empty()) throw ContractViolation("total_loss needs at least one sample");
  const double mean = std::accumulate(opt_losses.begin(), opt_losses.end(), 0.0) /
                      static_cast<double>(opt_losses.size());
  return mean + cfg.lambda * area;
}

namespace {

bool truth_detected(const std::vector<Detection>& dets, const BBox& truth, double thr) {
  return std::any_of(dets.begin(), dets.end(), [&](const Detection& d) { return iou(d.bbox, truth) > thr; });
}

bool target_generated(const std::vector<Detection>& dets, const BBox& target, double thr) {
  return std::any_of(dets.begin(), dets.end(), [&](const Detection& d) {
    return iou(d.bbox, target) > 0 && d.confidence() >= thr;
  });
}

}  // namespace

bool goal_achieved(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg) {
  switch (goal.kind) {
    case GoalKind::Hide:
      return !truth_detected(r.detections, goal.box, cfg.iou_match_threshold);
    case GoalKind::Generate:
      return target_generated(r.detections, goal.box, cfg.generate_threshold);
    case GoalKind::Misclassify:
      return r.argmax() != goal.label;
  }
  return false;
}

bool untriggered_correct(const AttackGoal& goal, const OracleResponse& r, const LossConfig& cfg) {
  switch (goal.kind) {
    case GoalKind::Hide:
      return truth_detected(r.detections, goal.box, cfg.iou_match_threshold);
    case GoalKind::Generate:
      return !target_generated(r.detections, goal.box, cfg.generate_threshold);
    case GoalKind::Misclassify:
      return r.argmax() == goal.label;
  }
  return false;
}

}  // namespace itpatch
