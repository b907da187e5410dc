// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "itpatch/image.hpp"

namespace itpatch {

enum class Task { Classify, Detect };

const char* to_string(Task task);
Task parse_task(const std::string& name);

struct Detection {
  BBox bbox;
  double object_score = 0;
  std::vector<double> class_scores;

  double max_class_score() const;
  // object_score x max class score.
  double confidence() const { return object_score * max_class_score(); }
  bool operator==(const Detection&) const = default;
};

struct OracleResponse {
  std::string id;
  Task task = Task::Classify;
  std::vector<double> probs;
  std::vector<Detection> detections;
  double latency_s = 0;

  // Lowest index wins ties. Throws ContractViolation on empty probs.
  int argmax() const;
};

// Throws ValidationError unless probs is a distribution over `classes`
// entries (sum 1 +- 1e-4) and every score lies in [0, 1]. classes = 0 skips
// the count check.
void validate_response(const OracleResponse& r, std::size_t classes = 0);

}  // namespace itpatch
