// SPDX-License-Identifier: Apache-2.0

#include "itpatch/pso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "itpatch/error.hpp"
#include "itpatch/parallel.hpp"
#include "itpatch/transforms.hpp"
#include "json.hpp"

namespace itpatch {

std::vector<double> SearchSpace::feasible(std::vector<double> x) const {
  if (x.size() != bounds.size()) throw ContractViolation("search vector has the wrong length");
  for (std::size_t d = 0; d < x.size(); ++d) x[d] = std::clamp(x[d], bounds[d].lo, bounds[d].hi);
  if (project) project(x);
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (bounds[d].integer) x[d] = std::clamp(std::round(x[d]), std::ceil(bounds[d].lo), std::floor(bounds[d].hi));
  }
  return x;
}

void PsoConfig::validate() const {
  if (swarm_size < 2) throw ConfigError("pso.swarm_size must be >= 2");
  if (iterations < 1) throw ConfigError("pso.iterations must be >= 1");
  if (restarts < 1) throw ConfigError("pso.restarts must be >= 1");
  if (!std::isfinite(inertia) || !std::isfinite(cognitive) || !std::isfinite(social)) {
    throw ConfigError("pso constants must be finite");
  }
}

double OptimizationTrace::final_loss() const {
  return best_loss.empty() ? std::numeric_limits<double>::infinity() : best_loss.back();
}

OptimizationTrace optimize(const Objective& objective, const SearchSpace& space,
                           const PsoConfig& cfg, std::uint64_t seed, int restart) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(cfg.swarm_size);
  const std::size_t dims = space.dims();
  for (const auto& b : space.bounds) {
    if (!(b.lo <= b.hi)) throw ConfigError("search bounds have lo > hi");
  }

  OptimizationTrace trace;
  trace.restart = restart;
  trace.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> pos(n, std::vector<double>(dims));
  std::vector<std::vector<double>> vel(n, std::vector<double>(dims));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dims; ++d) {
      const double lo = space.bounds[d].lo, hi = space.bounds[d].hi;
      pos[i][d] = lo + (hi - lo) * unit(rng);
      vel[i][d] = (hi - lo) * (unit(rng) - 0.5);
    }
  }

  std::vector<std::vector<double>> evaluated(n);
  std::vector<double> loss(n);
  auto evaluate_all = [&]() -> bool {
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = space.feasible(std::move(pos[i]));
      evaluated[i] = pos[i];
    }
    try {
      parallel_for(n, cfg.jobs, [&](std::size_t i) { loss[i] = objective(evaluated[i]); });
    } catch (const std::exception& e) {
      trace.error = e.what();
      return false;
    }
    trace.evaluations += n;
    return true;
  };

  std::vector<std::vector<double>> pbest(n);
  std::vector<double> pbest_loss(n, std::numeric_limits<double>::infinity());
  std::vector<double> gbest;
  double gbest_loss = std::numeric_limits<double>::infinity();
  auto absorb = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const double l = std::isnan(loss[i]) ? std::numeric_limits<double>::infinity() : loss[i];
      if (l < pbest_loss[i] || pbest[i].empty()) {
        pbest_loss[i] = l;
        pbest[i] = evaluated[i];
      }
      if (l < gbest_loss || gbest.empty()) {
        gbest_loss = l;
        gbest = evaluated[i];
      }
    }
    trace.best_loss.push_back(gbest_loss);
    trace.best_theta = gbest;
  };

  if (!evaluate_all()) return trace;
  absorb();
  for (int it = 0; it < cfg.iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double span = space.bounds[d].hi - space.bounds[d].lo;
        const double r1 = unit(rng), r2 = unit(rng);
        double v = cfg.inertia * vel[i][d] + cfg.cognitive * r1 * (pbest[i][d] - pos[i][d]) +
                   cfg.social * r2 * (gbest[d] - pos[i][d]);
        v = std::clamp(v, -span, span);
        vel[i][d] = v;
        pos[i][d] += v;
      }
    }
    if (!evaluate_all()) return trace;
    absorb();
  }
  return trace;
}

RestartResult optimize_with_restarts(const std::function<Objective(int)>& make_objective,
                                     const SearchSpace& space, const PsoConfig& cfg,
                                     const Predicate& success, bool stop_on_error) {
  cfg.validate();
  RestartResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    const std::uint64_t seed = r == 0 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    OptimizationTrace trace = optimize(make_objective(r), space, cfg, seed, r);
    const bool usable = !trace.best_theta.empty();
    const double loss = trace.final_loss();
    if (usable && (result.best_theta.empty() || loss < result.best_loss)) {
      result.best_loss = loss;
      result.best_theta = trace.best_theta;
    }
    const bool done = usable && trace.error.empty() && success && success(trace.best_theta);
    const bool failed = !trace.error.empty();
    result.traces.push_back(std::move(trace));
    if (failed && stop_on_error) break;
    if (done) {
      // The restart that satisfied the predicate defines the answer.
      result.best_theta = result.traces.back().best_theta;
      result.best_loss = result.traces.back().final_loss();
      result.success = true;
      break;
    }
  }
  return result;
}

RestartResult optimize_with_restarts(const Objective& objective, const SearchSpace& space,
                                     const PsoConfig& cfg, const Predicate& success,
                                     bool stop_on_error) {
  return optimize_with_restarts([&](int) { return objective; }, space, cfg, success, stop_on_error);
}

std::string traces_to_jsonl(const std::vector<OptimizationTrace>& traces) {
  std::ostringstream out;
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.best_loss.size(); ++i) {
      nlohmann::ordered_json j;
      j["restart"] = t.restart;
      j["iteration"] = i;
      j["best_loss"] = t.best_loss[i];
      out << j.dump() << '\n';
    }
    if (!t.error.empty()) {
      nlohmann::ordered_json j;
      j["restart"] = t.restart;
      j["error"] = t.error;
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

std::array<int, 2> nearest_in_mask(const Mask& mask, double x, double y) {
  if (!mask.any()) throw ContractViolation("nearest_in_mask on an empty mask");
  const int w = mask.width(), h = mask.height();
  const int rx = std::clamp(static_cast<int>(std::lround(x)), 0, w - 1);
  const int ry = std::clamp(static_cast<int>(std::lround(y)), 0, h - 1);
  std::array<int, 2> best{-1, -1};
  double best_d2 = std::numeric_limits<double>::infinity();
  auto consider = [&](int px, int py) {
    if (!mask.test(px, py)) return;
    const double d2 = (px - x) * (px - x) + (py - y) * (py - y);
    if (d2 < best_d2 || (d2 == best_d2 && (py < best[1] || (py == best[1] && px < best[0])))) {
      best_d2 = d2;
      best = {px, py};
    }
  };
  const int max_ring = std::max(w, h);
  for (int k = 0; k <= max_ring; ++k) {
    // Any pixel on ring k lies at least k - 0.5 from (x, y).
    if (best[0] >= 0 && (k - 0.5) * (k - 0.5) > best_d2) break;
    if (k == 0) {
      consider(rx, ry);
      continue;
    }
    for (int dx = -k; dx <= k; ++dx) {
      consider(rx + dx, ry - k);
      consider(rx + dx, ry + k);
    }
    for (int dy = -k + 1; dy <= k - 1; ++dy) {
      consider(rx - k, ry + dy);
      consider(rx + k, ry + dy);
    }
  }
  return best;
}

std::size_t PatchSpace::dims_of(ShapeKind kind) {
  return ShapeParams::point_count(kind) * 2 + 5;
}

PatchSpace::PatchSpace(std::vector<ShapeKind> kinds, Mask feasible, PatchBounds pb, double l1,
                       double l2)
    : kinds_(std::move(kinds)), feasible_(std::move(feasible)), l1_(l1), l2_(l2) {
  if (kinds_.empty()) throw ContractViolation("patch space needs at least one shape");
  if (!feasible_.any()) throw ContractViolation("patch space needs a non-empty feasible mask");
  if (!(pb.radius_lo >= 0 && pb.radius_lo <= pb.radius_hi)) throw ConfigError("invalid radius bounds");
  if (!(pb.alpha_lo >= 0 && pb.alpha_lo <= pb.alpha_hi && pb.alpha_hi <= 1)) {
    throw ConfigError("invalid alpha bounds");
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(pb.color_lo[c] >= 0 && pb.color_lo[c] <= pb.color_hi[c] && pb.color_hi[c] <= 255)) {
      throw ConfigError("invalid color bounds");
    }
  }
  const BBox box = feasible_.bounding_box();
  std::vector<std::size_t> point_dims;
  for (ShapeKind k : kinds_) {
    for (std::size_t p = 0; p < ShapeParams::point_count(k); ++p) {
      point_dims.push_back(space_.bounds.size());
      space_.bounds.push_back({box.x_min, box.x_max, true});
      space_.bounds.push_back({box.y_min, box.y_max, true});
    }
    space_.bounds.push_back({pb.radius_lo, pb.radius_hi, false});
    for (std::size_t c = 0; c < 3; ++c) space_.bounds.push_back({pb.color_lo[c], pb.color_hi[c], true});
    space_.bounds.push_back({pb.alpha_lo, pb.alpha_hi, false});
  }
  auto mask = std::make_shared<const Mask>(feasible_);
  space_.project = [mask, point_dims](std::vector<double>& x) {
    for (std::size_t d : point_dims) {
      const int px = static_cast<int>(std::lround(x[d]));
      const int py = static_cast<int>(std::lround(x[d + 1]));
      if (mask->test(px, py)) continue;
      const auto q = nearest_in_mask(*mask, x[d], x[d + 1]);
      x[d] = q[0];
      x[d + 1] = q[1];
    }
  };
}

std::vector<double> PatchSpace::encode(const PatchParams& patch) const {
  if (patch.shapes.size() != kinds_.size()) throw ContractViolation("patch has the wrong shape count");
  std::vector<double> x;
  x.reserve(dims());
  for (std::size_t i = 0; i < kinds_.size(); ++i) {
    const auto& s = patch.shapes[i];
    if (s.kind != kinds_[i]) throw ContractViolation("patch shape kind does not match the layout");
    for (const auto& p : s.points) {
      x.push_back(p[0]);
      x.push_back(p[1]);
    }
    x.push_back(s.radius);
    for (double c : s.color) x.push_back(c);
    x.push_back(s.alpha);
  }
  if (x.size() != dims()) throw ContractViolation("patch point count does not match the layout");
  return x;
}

PatchParams PatchSpace::decode(std::span<const double> raw) const {
  if (raw.size() != dims()) {
    throw ContractViolation("expected " + std::to_string(dims()) + " dims, got " + std::to_string(raw.size()));
  }
  const std::vector<double> x = space_.feasible(std::vector<double>(raw.begin(), raw.end()));
  PatchParams p;
  p.l1 = l1_;
  p.l2 = l2_;
  std::size_t d = 0;
  for (ShapeKind k : kinds_) {
    ShapeParams s;
    s.kind = k;
    s.points.clear();
    for (std::size_t i = 0; i < ShapeParams::point_count(k); ++i, d += 2) s.points.push_back({x[d], x[d + 1]});
    s.radius = x[d++];
    for (auto& c : s.color) c = x[d++];
    s.alpha = x[d++];
    p.shapes.push_back(std::move(s));
  }
  return p;
}

}  // namespace itpatch
