// SPDX-License-Identifier: Apache-2.0

#include "itpatch/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "itpatch/error.hpp"
#include "itpatch/png_io.hpp"
#include "itpatch/synth.hpp"

namespace itpatch {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads known keys of one object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key " + path_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_range(Section& s, const std::string& key, Range& r) {
  if (const json* c = s.child(key)) {
    try {
      r = c->get<Range>();
    } catch (const ConfigError& e) {
      throw ConfigError(s.path(key) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError(s.path(key) + ": " + e.what());
    }
  }
}

ordered_json range_json(const Range& r) {
  ordered_json o;
  o["enabled"] = r.enabled;
  o["range"] = {r.lo, r.hi};
  return o;
}

std::array<float, 3> triplet(const json& j, const std::string& path) {
  try {
    return j.get<std::array<float, 3>>();
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

LocalizerConfig read_localizer(const json& j) {
  LocalizerConfig c;
  Section s(j, "localizer");
  s.get("contrast_threshold", c.contrast_threshold);
  s.get("canny_low", c.canny_low);
  s.get("canny_high", c.canny_high);
  s.get("use_black_v_range", c.use_black_v_range);
  s.get("morph_kernel", c.morph_kernel);
  s.get("morph_iterations", c.morph_iterations);
  s.get("min_area_fraction", c.min_area_fraction);
  s.get("interior_erosion_fraction", c.interior_erosion_fraction);
  if (const json* h = s.child("hsv_ranges")) {
    if (!h->is_array()) throw ConfigError("localizer.hsv_ranges: expected an array");
    c.hsv_ranges.clear();
    for (std::size_t i = 0; i < h->size(); ++i) {
      const std::string p = "localizer.hsv_ranges[" + std::to_string(i) + "]";
      Section r((*h)[i], p);
      HsvRange range;
      r.get("name", range.name);
      const json* lo = r.child("lower");
      const json* hi = r.child("upper");
      if (!lo || !hi) throw ConfigError(p + ": lower and upper are required");
      range.lower = triplet(*lo, p + ".lower");
      range.upper = triplet(*hi, p + ".upper");
      r.finish();
      c.hsv_ranges.push_back(std::move(range));
    }
  }
  s.finish();
  return c;
}

ordered_json localizer_json(const LocalizerConfig& c) {
  ordered_json o;
  o["contrast_threshold"] = c.contrast_threshold;
  o["canny_low"] = c.canny_low;
  o["canny_high"] = c.canny_high;
  ordered_json ranges = ordered_json::array();
  for (const auto& r : c.hsv_ranges) {
    ordered_json e;
    e["name"] = r.name;
    e["lower"] = r.lower;
    e["upper"] = r.upper;
    ranges.push_back(std::move(e));
  }
  o["hsv_ranges"] = std::move(ranges);
  o["use_black_v_range"] = c.use_black_v_range;
  o["morph_kernel"] = c.morph_kernel;
  o["morph_iterations"] = c.morph_iterations;
  o["min_area_fraction"] = c.min_area_fraction;
  o["interior_erosion_fraction"] = c.interior_erosion_fraction;
  return o;
}

RenderConfig read_render(const json& j) {
  RenderConfig c;
  Section s(j, "render");
  s.get("l1", c.l1);
  s.get("l2", c.l2);
  std::vector<std::string> shapes;
  s.get("shapes", shapes);
  if (j.contains("shapes")) {
    c.shapes.clear();
    for (const auto& k : shapes) {
      try {
        c.shapes.push_back(parse_shape_kind(k));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("render.shapes: ") + e.what());
      }
    }
  }
  std::string region = to_string(c.region);
  s.get("region", region);
  try {
    c.region = parse_region_variant(region);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("render.region: ") + e.what());
  }
  if (const json* b = s.child("bounds")) {
    Section bs(*b, "render.bounds");
    std::array<double, 2> radius{c.bounds.radius_lo, c.bounds.radius_hi};
    std::array<double, 2> alpha{c.bounds.alpha_lo, c.bounds.alpha_hi};
    bs.get("radius", radius);
    bs.get("alpha", alpha);
    bs.get("color_lo", c.bounds.color_lo);
    bs.get("color_hi", c.bounds.color_hi);
    bs.finish();
    c.bounds.radius_lo = radius[0];
    c.bounds.radius_hi = radius[1];
    c.bounds.alpha_lo = alpha[0];
    c.bounds.alpha_hi = alpha[1];
  }
  if (const json* p = s.child("position_block")) {
    if (!p->is_null()) {
      try {
        c.position_block = p->get<std::array<int, 4>>();
      } catch (const json::exception& e) {
        throw ConfigError(std::string("render.position_block: ") + e.what());
      }
    }
  }
  s.finish();
  return c;
}

ordered_json render_json(const RenderConfig& c) {
  ordered_json o;
  o["l1"] = c.l1;
  o["l2"] = c.l2;
  ordered_json shapes = ordered_json::array();
  for (ShapeKind k : c.shapes) shapes.push_back(to_string(k));
  o["shapes"] = std::move(shapes);
  o["region"] = to_string(c.region);
  ordered_json b;
  b["radius"] = {c.bounds.radius_lo, c.bounds.radius_hi};
  b["alpha"] = {c.bounds.alpha_lo, c.bounds.alpha_hi};
  b["color_lo"] = c.bounds.color_lo;
  b["color_hi"] = c.bounds.color_hi;
  o["bounds"] = std::move(b);
  o["position_block"] = c.position_block ? ordered_json(*c.position_block) : ordered_json(nullptr);
  return o;
}

TransformSpec read_transforms(const json& j) {
  TransformSpec c;
  Section s(j, "transforms");
  read_range(s, "brightness_l", c.brightness_l);
  read_range(s, "h_view_deg", c.h_view_deg);
  read_range(s, "v_view_deg", c.v_view_deg);
  read_range(s, "distance_m", c.distance_m);
  read_range(s, "rotation_deg", c.rotation_deg);
  read_range(s, "blur_len_px", c.blur_len_px);
  read_range(s, "blur_angle_deg", c.blur_angle_deg);
  read_range(s, "residual_alpha", c.residual_alpha);
  s.get("sign_size_m", c.sign_size_m);
  s.get("focal_scale", c.focal_scale);
  s.get("use_backgrounds", c.use_backgrounds);
  s.get("background_paths", c.background_paths);
  if (const json* f = s.child("fill")) c.fill = triplet(*f, "transforms.fill");
  s.get("allow_widen", c.allow_widen);
  s.finish();
  return c;
}

ordered_json transforms_json(const TransformSpec& c) {
  ordered_json o;
  o["brightness_l"] = range_json(c.brightness_l);
  o["h_view_deg"] = range_json(c.h_view_deg);
  o["v_view_deg"] = range_json(c.v_view_deg);
  o["distance_m"] = range_json(c.distance_m);
  o["rotation_deg"] = range_json(c.rotation_deg);
  o["blur_len_px"] = range_json(c.blur_len_px);
  o["blur_angle_deg"] = range_json(c.blur_angle_deg);
  o["residual_alpha"] = range_json(c.residual_alpha);
  o["sign_size_m"] = c.sign_size_m;
  o["focal_scale"] = c.focal_scale;
  o["use_backgrounds"] = c.use_backgrounds;
  o["background_paths"] = c.background_paths;
  o["fill"] = c.fill;
  o["allow_widen"] = c.allow_widen;
  return o;
}

LossConfig read_loss(const json& j) {
  LossConfig c;
  Section s(j, "loss");
  s.get("lambda", c.lambda);
  s.get("beta", c.beta);
  s.get("iou_match_threshold", c.iou_match_threshold);
  s.get("prob_floor", c.prob_floor);
  s.get("generate_threshold", c.generate_threshold);
  s.finish();
  return c;
}

ordered_json loss_json(const LossConfig& c) {
  ordered_json o;
  o["lambda"] = c.lambda;
  o["beta"] = c.beta;
  o["iou_match_threshold"] = c.iou_match_threshold;
  o["prob_floor"] = c.prob_floor;
  o["generate_threshold"] = c.generate_threshold;
  return o;
}

PsoConfig read_pso(const json& j) {
  PsoConfig c;
  Section s(j, "pso");
  s.get("swarm_size", c.swarm_size);
  s.get("iterations", c.iterations);
  s.get("restarts", c.restarts);
  s.get("inertia", c.inertia);
  s.get("cognitive", c.cognitive);
  s.get("social", c.social);
  s.get("jobs", c.jobs);
  s.finish();
  return c;
}

ordered_json pso_json(const PsoConfig& c) {
  ordered_json o;
  o["swarm_size"] = c.swarm_size;
  o["iterations"] = c.iterations;
  o["restarts"] = c.restarts;
  o["inertia"] = c.inertia;
  o["cognitive"] = c.cognitive;
  o["social"] = c.social;
  o["jobs"] = c.jobs;
  return o;
}

const char* defense_name(DefenseConfig::Kind k) {
  return k == DefenseConfig::Kind::GaussianSmoothing ? "gaussian-smoothing" : "input-randomization";
}

OracleConfig read_oracle(const json& j) {
  OracleConfig c;
  Section s(j, "oracle");
  s.get("backend", c.backend);
  s.get("endpoint", c.endpoint);
  s.get("weights", c.weights);
  s.get("timeout_ms", c.timeout_ms);
  s.get("classes", c.classes);
  if (const json* d = s.child("defenses")) {
    if (!d->is_array()) throw ConfigError("oracle.defenses: expected an array");
    for (std::size_t i = 0; i < d->size(); ++i) {
      const std::string p = "oracle.defenses[" + std::to_string(i) + "]";
      Section ds((*d)[i], p);
      DefenseConfig dc;
      std::string kind;
      ds.get("kind", kind);
      if (kind == "gaussian-smoothing") {
        dc.kind = DefenseConfig::Kind::GaussianSmoothing;
      } else if (kind == "input-randomization") {
        dc.kind = DefenseConfig::Kind::InputRandomization;
      } else {
        throw ConfigError(p + ".kind: unknown defense '" + kind + "'");
      }
      ds.get("sigma", dc.sigma);
      ds.get("draws", dc.draws);
      ds.get("from_size", dc.from_size);
      ds.get("to_size", dc.to_size);
      ds.get("seed", dc.seed);
      ds.finish();
      c.defenses.push_back(dc);
    }
  }
  s.finish();
  return c;
}

ordered_json oracle_json(const OracleConfig& c) {
  ordered_json o;
  o["backend"] = c.backend;
  o["endpoint"] = c.endpoint;
  o["weights"] = c.weights;
  o["timeout_ms"] = c.timeout_ms;
  o["classes"] = c.classes;
  ordered_json d = ordered_json::array();
  for (const auto& x : c.defenses) {
    ordered_json e;
    e["kind"] = defense_name(x.kind);
    e["sigma"] = x.sigma;
    e["draws"] = x.draws;
    e["from_size"] = x.from_size;
    e["to_size"] = x.to_size;
    e["seed"] = x.seed;
    d.push_back(std::move(e));
  }
  o["defenses"] = std::move(d);
  return o;
}

EvalConfig read_eval(const json& j) {
  EvalConfig c;
  Section s(j, "eval");
  s.get("iterations", c.iterations);
  s.get("restarts", c.restarts);
  s.get("full_budget", c.full_budget);
  s.get("corpus_size", c.corpus_size);
  s.finish();
  return c;
}

ordered_json eval_json(const EvalConfig& c) {
  ordered_json o;
  o["iterations"] = c.iterations;
  o["restarts"] = c.restarts;
  o["full_budget"] = c.full_budget;
  o["corpus_size"] = c.corpus_size;
  return o;
}

AttackSection read_attack(const json& j) {
  AttackSection c;
  Section s(j, "attack");
  s.get("eot_samples_per_eval", c.eot_samples_per_eval);
  s.get("holdout_samples", c.holdout_samples);
  s.get("holdout_success_rate", c.holdout_success_rate);
  s.finish();
  return c;
}

ordered_json attack_json(const AttackSection& c) {
  ordered_json o;
  o["eot_samples_per_eval"] = c.eot_samples_per_eval;
  o["holdout_samples"] = c.holdout_samples;
  o["holdout_success_rate"] = c.holdout_success_rate;
  return o;
}

}  // namespace

AttackConfig GlobalConfig::attack_config() const {
  AttackConfig a;
  a.localizer = localizer;
  a.region = render.region;
  a.shapes = render.shapes;
  a.bounds = render.bounds;
  a.l1 = render.l1;
  a.l2 = render.l2;
  a.position_block = render.position_block;
  a.transforms = transforms;
  a.loss = loss;
  a.pso = pso;
  a.pso.seed = seed;
  a.eot_samples_per_eval = attack.eot_samples_per_eval;
  a.holdout_samples = attack.holdout_samples;
  a.holdout_success_rate = attack.holdout_success_rate;
  a.seed = seed;
  return a;
}

void GlobalConfig::validate() const {
  localizer.validate();
  loss.validate();
  pso.validate();
  eval.validate();
  if (render.shapes.empty()) throw ConfigError("render.shapes must not be empty");
  if (!(render.l2 > render.l1 && render.l1 >= 1)) throw ConfigError("render needs l2 > l1 >= 1");
  if (oracle.backend != "toy-classifier" && oracle.backend != "toy-detector" && oracle.backend != "external") {
    throw ConfigError("oracle.backend must be toy-classifier, toy-detector or external");
  }
  if (oracle.timeout_ms < 1) throw ConfigError("oracle.timeout_ms must be >= 1");
  for (const auto& d : oracle.defenses) {
    if (d.kind == DefenseConfig::Kind::GaussianSmoothing && (d.sigma < 0 || d.draws < 1)) {
      throw ConfigError("gaussian-smoothing needs sigma >= 0 and draws >= 1");
    }
    if (d.kind == DefenseConfig::Kind::InputRandomization && (d.from_size < 1 || d.to_size < d.from_size)) {
      throw ConfigError("input-randomization needs 1 <= from_size <= to_size");
    }
  }
  // Backgrounds are loaded separately; check the ranges only.
  TransformSpec t = transforms;
  t.use_backgrounds = false;
  t.validate();
  if (transforms.use_backgrounds && transforms.background_paths.empty() && transforms.backgrounds.empty()) {
    throw ConfigError("transforms.use_backgrounds needs background_paths");
  }
  attack_config().validate();
}

ordered_json to_json(const GlobalConfig& c) {
  ordered_json o;
  o["localizer"] = localizer_json(c.localizer);
  o["render"] = render_json(c.render);
  o["transforms"] = transforms_json(c.transforms);
  o["loss"] = loss_json(c.loss);
  o["pso"] = pso_json(c.pso);
  o["oracle"] = oracle_json(c.oracle);
  o["eval"] = eval_json(c.eval);
  o["attack"] = attack_json(c.attack);
  o["seed"] = c.seed;
  return o;
}

GlobalConfig config_from_json(const json& j) {
  GlobalConfig c;
  Section s(j, "config");
  if (const json* x = s.child("localizer")) c.localizer = read_localizer(*x);
  if (const json* x = s.child("render")) c.render = read_render(*x);
  if (const json* x = s.child("transforms")) c.transforms = read_transforms(*x);
  if (const json* x = s.child("loss")) c.loss = read_loss(*x);
  if (const json* x = s.child("pso")) c.pso = read_pso(*x);
  if (const json* x = s.child("oracle")) c.oracle = read_oracle(*x);
  if (const json* x = s.child("eval")) c.eval = read_eval(*x);
  if (const json* x = s.child("attack")) c.attack = read_attack(*x);
  s.get("seed", c.seed);
  s.finish();
  c.eval.seed = c.seed;
  c.validate();
  return c;
}

GlobalConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  GlobalConfig c = config_from_json(j);
  for (const auto& p : c.transforms.background_paths) {
    const std::filesystem::path bg = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p)
                                                                            : path.parent_path() / p;
    c.transforms.backgrounds.push_back(read_png(bg));
  }
  return c;
}

void apply_backend_flag(OracleConfig& cfg, const std::string& flag) {
  if (flag == "toy-classifier" || flag == "toy-detector") {
    cfg.backend = flag;
    return;
  }
  if (flag == "external" || flag.rfind("external:", 0) == 0) {
    cfg.backend = "external";
    std::string addr = flag.size() > 9 ? flag.substr(9) : "";
    if (addr.empty()) {
      const char* env = std::getenv("ITPATCH_ORACLE_ADDR");
      addr = env ? env : "";
    }
    if (addr.empty()) throw ConfigError("--backend external needs an address or ITPATCH_ORACLE_ADDR");
    cfg.endpoint = addr;
    return;
  }
  throw ConfigError("unknown backend '" + flag + "'");
}

BackendPtr make_backend(const OracleConfig& cfg) {
  BackendPtr b;
  if (cfg.backend == "external") {
    std::string endpoint = cfg.endpoint;
    if (endpoint.empty()) {
      const char* env = std::getenv("ITPATCH_ORACLE_ADDR");
      endpoint = env ? env : "";
    }
    if (endpoint.empty()) throw ConfigError("oracle.endpoint is empty and ITPATCH_ORACLE_ADDR is unset");
    ClientConfig cc;
    cc.timeout = std::chrono::milliseconds(cfg.timeout_ms);
    cc.classes = cfg.classes;
    b = std::make_shared<ProtocolClient>(endpoint, cc);
  } else {
    ToyClassifierWeights w = cfg.weights.empty() ? toy_weights() : ToyClassifierWeights::load(cfg.weights);
    if (cfg.backend == "toy-classifier") {
      b = std::make_shared<ToyClassifier>(std::move(w));
    } else if (cfg.backend == "toy-detector") {
      b = std::make_shared<ToyDetector>(std::move(w));
    } else {
      throw ConfigError("unknown backend '" + cfg.backend + "'");
    }
  }
  for (auto it = cfg.defenses.rbegin(); it != cfg.defenses.rend(); ++it) {
    if (it->kind == DefenseConfig::Kind::GaussianSmoothing) {
      b = std::make_shared<GaussianSmoothing>(b, it->sigma, it->draws, it->seed);
    } else {
      b = std::make_shared<InputRandomization>(b, it->from_size, it->to_size, it->seed);
    }
  }
  return b;
}

}  // namespace itpatch
