// SPDX-License-Identifier: Apache-2.0

#include "itpatch/attack.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "itpatch/error.hpp"
#include "itpatch/png_io.hpp"

namespace itpatch {

using nlohmann::ordered_json;

void AttackConfig::validate() const {
  localizer.validate();
  transforms.validate();
  loss.validate();
  pso.validate();
  if (shapes.empty()) throw ConfigError("attack needs at least one shape");
  if (!(l1 >= 1 && l2 > l1)) throw ConfigError("render gains need l2 > l1 >= 1");
  if (eot_samples_per_eval < 1) throw ConfigError("eot_samples_per_eval must be >= 1");
  if (holdout_samples < 1) throw ConfigError("holdout_samples must be >= 1");
  if (!(holdout_success_rate >= 0 && holdout_success_rate <= 1)) {
    throw ConfigError("holdout_success_rate must lie in [0, 1]");
  }
  if (position_block) {
    const auto& b = *position_block;
    if (b[0] >= b[1] || b[2] >= b[3]) throw ConfigError("position_block must be [x0, x1, y0, y1] with x0 < x1, y0 < y1");
  }
}

void check_backend(const AttackGoal& goal, const Backend& backend) {
  if (!backend.supports(goal.task())) {
    throw ConfigError(std::string(to_string(goal.kind)) + " needs a backend that answers " +
                      to_string(goal.task()) + "; " + backend.describe() + " does not");
  }
}

AttackSeeds attack_seeds(std::uint64_t master) {
  return {derive_seed(master, 0), derive_seed(master, 1), derive_seed(master, 2)};
}

namespace {

int detection_label(const OracleResponse& r, const BBox& box) {
  const Detection* best = nullptr;
  for (const auto& d : r.detections) {
    if (iou(d.bbox, box) <= 0) continue;
    if (!best || d.confidence() > best->confidence()) best = &d;
  }
  if (!best || best->class_scores.empty()) return -1;
  OracleResponse tmp;
  tmp.probs = best->class_scores;
  return tmp.argmax();
}

int label_of(const AttackGoal& goal, const OracleResponse& r) {
  return goal.task() == Task::Classify ? r.argmax() : detection_label(r, goal.box);
}

OracleResponse ask(Backend& backend, const AttackGoal& goal, const ImageBuffer& img) {
  OracleResponse r = backend.query(goal.task(), img);
  r.task = goal.task();
  validate_response(r, backend.classes());
  return r;
}

ImageBuffer transformed(const ImageBuffer& img, const SignRegion& whole, const TransformSample& s,
                        const TransformSpec& spec) {
  return apply(img, whole.mask, s, spec).image;
}

Mask feasible_mask(const SignRegion& region, const AttackConfig& cfg) {
  Mask m = region.mask;
  if (cfg.position_block) {
    const auto& b = *cfg.position_block;
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (x < b[0] || x >= b[1] || y < b[2] || y >= b[3]) m.set(x, y, false);
      }
    }
  }
  return m;
}

double untriggered_alpha(const TransformSpec& spec, const TransformSample& s) {
  return spec.residual_alpha.enabled ? s.residual_alpha : 0.0;
}

}  // namespace

VerifyReport verify(const PatchParams& patch, const ImageBuffer& img, const SignRegion& whole,
                    const SignRegion& region, const AttackGoal& goal, const AttackConfig& cfg,
                    Backend& backend, std::uint64_t seed, int samples) {
  if (samples < 1) throw ContractViolation("verify needs at least one transform sample");
  check_backend(goal, backend);
  VerifyReport rep;
  rep.seed = seed;
  const Rendered tri = render(img, region, patch, RenderMode::Triggered());
  int hits = 0;
  rep.untriggered_all_correct = true;
  for (const auto& s : sample_many(cfg.transforms, seed, static_cast<std::size_t>(samples))) {
    SampleOutcome o;
    o.transform = s;
    const Rendered unt = render(img, region, patch, RenderMode::Untriggered(untriggered_alpha(cfg.transforms, s)));
    const OracleResponse ru = ask(backend, goal, transformed(unt.image, whole, s, cfg.transforms));
    const OracleResponse rt = ask(backend, goal, transformed(tri.image, whole, s, cfg.transforms));
    o.untriggered_label = label_of(goal, ru);
    o.triggered_label = label_of(goal, rt);
    o.untriggered_ok = untriggered_correct(goal, ru, cfg.loss);
    o.triggered_ok = goal_achieved(goal, rt, cfg.loss);
    o.triggered_loss = goal_loss(goal, rt, cfg.loss);
    hits += o.triggered_ok ? 1 : 0;
    rep.untriggered_all_correct = rep.untriggered_all_correct && o.untriggered_ok;
    rep.samples.push_back(o);
  }
  rep.triggered_rate = static_cast<double>(hits) / samples;
  rep.success = rep.untriggered_all_correct && rep.triggered_rate >= cfg.holdout_success_rate;
  return rep;
}

VerifyReport verify(const PatchParams& patch, const ImageBuffer& img, const AttackGoal& goal,
                    const AttackConfig& cfg, Backend& backend, std::uint64_t seed, int samples) {
  if (samples < 1) throw ContractViolation("verify needs at least one transform sample");
  const Localization loc = localize(img, cfg.localizer);
  return verify(patch, img, loc.whole, loc.select(cfg.region), goal, cfg, backend, seed, samples);
}

AttackResult run_attack(const ImageBuffer& img, const AttackGoal& goal, const AttackConfig& cfg,
                        Backend& backend) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  check_backend(goal, backend);
  const Localization loc = localize(img, cfg.localizer);
  const SignRegion& whole = loc.whole;
  const SignRegion& region = loc.select(cfg.region);

  AttackResult result;
  result.goal = goal;
  result.seed = cfg.seed;
  const AttackSeeds seeds = attack_seeds(cfg.seed);
  result.pso_seed = seeds.pso;
  result.eot_seed = seeds.eot;
  result.holdout_seed = seeds.holdout;
  auto finish = [&] {
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  };

  const Mask feasible = feasible_mask(region, cfg);
  if (!feasible.any()) {
    result.error = "no feasible shape position inside the region";
    return finish();
  }
  const PatchSpace space(cfg.shapes, feasible, cfg.bounds, cfg.l1, cfg.l2);
  const double region_area = static_cast<double>(region.area());

  auto make_objective = [&](int restart) -> Objective {
    const auto samples = sample_many(cfg.transforms, derive_seed(seeds.eot, static_cast<std::uint64_t>(restart)),
                                     static_cast<std::size_t>(cfg.eot_samples_per_eval));
    return [&, samples](const std::vector<double>& theta) {
      const PatchParams patch = space.decode(theta);
      const Rendered tri = render(img, region, patch, RenderMode::Triggered());
      std::vector<double> losses;
      losses.reserve(samples.size());
      for (const auto& s : samples) {
        losses.push_back(search_loss(goal, ask(backend, goal, transformed(tri.image, whole, s, cfg.transforms)), cfg.loss));
      }
      return total_loss(losses, area_loss(patch, region_area), cfg.loss);
    };
  };
  auto predicate = [&](const std::vector<double>& theta) {
    const PatchParams patch = space.decode(theta);
    const Rendered tri = render(img, region, patch, RenderMode::Triggered());
    const Rendered unt = render(img, region, patch, RenderMode::Untriggered(cfg.transforms.residual_alpha.enabled ? cfg.transforms.residual_alpha.hi : 0.0));
    return goal_achieved(goal, ask(backend, goal, tri.image), cfg.loss) &&
           untriggered_correct(goal, ask(backend, goal, unt.image), cfg.loss);
  };

  PsoConfig pso = cfg.pso;
  pso.seed = seeds.pso;
  RestartResult rr = optimize_with_restarts(make_objective, space.space(), pso, predicate, true);
  result.traces = std::move(rr.traces);
  for (const auto& t : result.traces) {
    if (!t.error.empty()) result.error = t.error;
  }
  if (rr.best_theta.empty()) return finish();

  result.best_theta = rr.best_theta;
  result.best = space.decode(rr.best_theta);
  result.final_loss = rr.best_loss;
  result.search_success = rr.success;
  if (!result.error.empty()) return finish();

  try {
    const double residual = cfg.transforms.residual_alpha.enabled ? cfg.transforms.residual_alpha.hi : 0.0;
    result.untriggered_prediction =
        label_of(goal, ask(backend, goal, render(img, region, result.best, RenderMode::Untriggered(residual)).image));
    result.triggered_prediction =
        label_of(goal, ask(backend, goal, render(img, region, result.best, RenderMode::Triggered()).image));
    result.verification = verify(result.best, img, whole, region, goal, cfg, backend, seeds.holdout,
                                 cfg.holdout_samples);
    result.success = result.verification.success;
  } catch (const OracleError& e) {
    result.error = e.what();
    result.success = false;
  }
  return finish();
}

AttackRenders render_states(const ImageBuffer& img, const SignRegion& region,
                            const PatchParams& patch, double residual_alpha) {
  AttackRenders out;
  out.triggered = render(img, region, patch, RenderMode::Triggered()).image;
  out.untriggered = render(img, region, patch, RenderMode::Untriggered(residual_alpha)).image;
  out.difference = ImageBuffer(img.width(), img.height());
  auto d = out.difference.data();
  const auto a = out.triggered.data();
  const auto b = out.untriggered.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::min(1.0f, 4.0f * std::fabs(a[i] - b[i]));
  return out;
}

void to_json(nlohmann::json& j, const AttackGoal& g) {
  ordered_json o;
  o["kind"] = to_string(g.kind);
  o["label"] = g.label;
  o["box"] = {g.box.x_min, g.box.y_min, g.box.x_max, g.box.y_max};
  j = o;
}

void from_json(const nlohmann::json& j, AttackGoal& g) {
  try {
    g.kind = parse_goal(j.at("kind").get<std::string>());
    g.label = j.value("label", 0);
    if (j.contains("box")) {
      const auto b = j.at("box").get<std::vector<double>>();
      if (b.size() != 4) throw ConfigError("goal box needs four numbers");
      g.box = {b[0], b[1], b[2], b[3]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("goal: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const VerifyReport& r) {
  ordered_json o;
  o["seed"] = r.seed;
  o["triggered_rate"] = r.triggered_rate;
  o["untriggered_all_correct"] = r.untriggered_all_correct;
  o["success"] = r.success;
  ordered_json samples = ordered_json::array();
  for (const auto& s : r.samples) {
    ordered_json e;
    e["transform"] = nlohmann::json(s.transform);
    e["untriggered_label"] = s.untriggered_label;
    e["triggered_label"] = s.triggered_label;
    e["untriggered_ok"] = s.untriggered_ok;
    e["triggered_ok"] = s.triggered_ok;
    e["triggered_loss"] = s.triggered_loss;
    samples.push_back(std::move(e));
  }
  o["samples"] = std::move(samples);
  j = o;
}

void to_json(nlohmann::json& j, const AttackResult& r) {
  ordered_json o;
  o["goal"] = nlohmann::json(r.goal);
  o["success"] = r.success;
  o["search_success"] = r.search_success;
  o["final_loss"] = r.final_loss;
  o["untriggered_prediction"] = r.untriggered_prediction;
  o["triggered_prediction"] = r.triggered_prediction;
  o["patch"] = nlohmann::json(r.best);
  o["best_theta"] = r.best_theta;
  std::size_t evaluations = 0;
  for (const auto& t : r.traces) evaluations += t.evaluations;
  o["restarts_run"] = r.traces.size();
  o["evaluations"] = evaluations;
  o["seeds"] = ordered_json{{"seed", r.seed}, {"pso", r.pso_seed}, {"eot", r.eot_seed}, {"holdout", r.holdout_seed}};
  o["verification"] = nlohmann::json(r.verification);
  o["error"] = r.error;
  j = o;
}

void from_json(const nlohmann::json& j, AttackResult& r) {
  try {
    r.goal = j.at("goal").get<AttackGoal>();
    r.success = j.at("success").get<bool>();
    r.search_success = j.value("search_success", false);
    r.final_loss = j.value("final_loss", 0.0);
    r.untriggered_prediction = j.value("untriggered_prediction", -1);
    r.triggered_prediction = j.value("triggered_prediction", -1);
    r.best = j.at("patch").get<PatchParams>();
    r.best_theta = j.value("best_theta", std::vector<double>{});
    const auto& s = j.at("seeds");
    r.seed = s.at("seed").get<std::uint64_t>();
    r.pso_seed = s.at("pso").get<std::uint64_t>();
    r.eot_seed = s.at("eot").get<std::uint64_t>();
    r.holdout_seed = s.at("holdout").get<std::uint64_t>();
    r.error = j.value("error", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("attack result: ") + e.what());
  }
}

void write_attack_outputs(const AttackResult& result, const ImageBuffer& img,
                          const AttackConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "result.json");
    if (!out) throw IoError("cannot write " + (dir / "result.json").string());
    out << nlohmann::json(result).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "trace.jsonl");
    if (!out) throw IoError("cannot write " + (dir / "trace.jsonl").string());
    out << traces_to_jsonl(result.traces);
  }
  if (result.best.shapes.empty()) return;
  const Localization loc = localize(img, cfg.localizer);
  const double residual = cfg.transforms.residual_alpha.enabled ? cfg.transforms.residual_alpha.hi : 0.0;
  const AttackRenders r = render_states(img, loc.select(cfg.region), result.best, residual);
  write_png(r.triggered, dir / "triggered.png");
  write_png(r.untriggered, dir / "untriggered.png");
  write_png(r.difference, dir / "difference.png");
}

}  // namespace itpatch
