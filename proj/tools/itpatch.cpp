// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "itpatch/config.hpp"
#include "itpatch/error.hpp"
#include "itpatch/png_io.hpp"
#include "itpatch/synth.hpp"

namespace fs = std::filesystem;
using namespace itpatch;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string backend;
  bool force = false;
  int jobs = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--backend", c.backend, "toy-classifier | toy-detector | external:ADDR");
  app->add_flag("--force", c.force, "Overwrite existing outputs");
  app->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)");
}

GlobalConfig resolve(const Common& c) {
  GlobalConfig cfg = c.config.empty() ? GlobalConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.eval.seed = cfg.seed;
  if (!c.backend.empty()) apply_backend_flag(cfg.oracle, c.backend);
  if (c.jobs != 0) cfg.pso.jobs = c.jobs;
  cfg.validate();
  return cfg;
}

// Refuses to clobber existing outputs unless forced; creates the directory.
fs::path prepare_out(const Common& c, const std::vector<std::string>& files) {
  const fs::path dir(c.out);
  if (!c.force) {
    for (const auto& f : files) {
      if (fs::exists(dir / f)) throw UsageError((dir / f).string() + " exists (use --force to overwrite)");
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed: " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DecodeError(p.string() + ": " + e.what());
  }
}

ordered_json bbox_json(const BBox& b) { return ordered_json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox parse_box(const std::string& s) {
  std::array<double, 4> v{};
  char sep = 0;
  std::istringstream in(s);
  for (int i = 0; i < 4; ++i) {
    if (!(in >> v[i])) throw UsageError("--box expects x0,y0,x1,y1");
    if (i < 3 && (!(in >> sep) || sep != ',')) throw UsageError("--box expects x0,y0,x1,y1");
  }
  if (!in.eof() && in.peek() != EOF) throw UsageError("--box expects x0,y0,x1,y1");
  if (v[2] <= v[0] || v[3] <= v[1]) throw UsageError("--box needs x1 > x0 and y1 > y0");
  return {v[0], v[1], v[2], v[3]};
}

double residual_of(const TransformSpec& t) { return t.residual_alpha.enabled ? t.residual_alpha.hi : 0.0; }

// ---- corpus -----------------------------------------------------------------

std::vector<SynthItem> load_corpus(const std::string& dir) {
  const fs::path root(dir);
  const json m = read_json(root / "manifest.json");
  std::vector<SynthItem> items;
  try {
    for (const auto& e : m.at("items")) {
      SynthItem it;
      it.image = read_png(root / e.at("image").get<std::string>());
      it.label = e.at("label").get<int>();
      const auto b = e.at("box").get<std::array<double, 4>>();
      it.box = {b[0], b[1], b[2], b[3]};
      if (e.contains("mask")) it.truth = read_mask_png(root / e.at("mask").get<std::string>());
      items.push_back(std::move(it));
    }
  } catch (const json::exception& e) {
    throw DecodeError("corpus manifest: " + std::string(e.what()));
  }
  if (items.empty()) throw ConfigError("corpus " + dir + " has no items");
  return items;
}

std::vector<SynthItem> corpus_for(const std::string& dir, const GlobalConfig& cfg) {
  if (!dir.empty()) return load_corpus(dir);
  return toy_corpus(static_cast<std::size_t>(cfg.eval.corpus_size), cfg.seed);
}

// ---- subcommands ------------------------------------------------------------

int cmd_config(const Common& c, bool emit) {
  if (!emit) throw UsageError("config: nothing to do (use --emit-defaults)");
  GlobalConfig cfg = c.config.empty() ? GlobalConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.backend.empty()) apply_backend_flag(cfg.oracle, c.backend);
  const std::string text = to_json(cfg).dump(2) + "\n";
  if (c.out == "-") {
    std::cout << text;
    return kOk;
  }
  const fs::path dir = prepare_out(c, {"config.json"});
  write_text(dir / "config.json", text);
  std::cout << (dir / "config.json").string() << "\n";
  return kOk;
}

int cmd_synth(const Common& c, const std::string& kind, int n, int size) {
  if (n < 1) throw UsageError("synth: --count must be >= 1");
  const GlobalConfig cfg = resolve(c);
  std::vector<SynthItem> items;
  if (kind == "toy") {
    items = toy_corpus(static_cast<std::size_t>(n), cfg.seed, size);
  } else if (kind == "localization") {
    items = localization_corpus(static_cast<std::size_t>(n), cfg.seed, size);
  } else {
    throw UsageError("synth: --kind must be toy or localization");
  }
  std::vector<std::string> files{"manifest.json"};
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "item%03d", i);
    files.push_back(std::string(name) + ".png");
    files.push_back(std::string(name) + "_mask.png");
  }
  const fs::path dir = prepare_out(c, files);
  ordered_json m;
  m["schema_version"] = kReportSchemaVersion;
  m["kind"] = kind;
  m["seed"] = cfg.seed;
  m["classes"] = toy_class_names();
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < n; ++i) {
    const std::string stem = files[1 + 2 * static_cast<std::size_t>(i)].substr(0, 7);
    write_png(items[static_cast<std::size_t>(i)].image, dir / (stem + ".png"));
    write_mask_png(items[static_cast<std::size_t>(i)].truth, dir / (stem + "_mask.png"));
    ordered_json e;
    e["image"] = stem + ".png";
    e["mask"] = stem + "_mask.png";
    e["label"] = items[static_cast<std::size_t>(i)].label;
    e["box"] = bbox_json(items[static_cast<std::size_t>(i)].box);
    arr.push_back(std::move(e));
  }
  m["items"] = std::move(arr);
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  std::cout << n << " images written to " << dir.string() << "\n";
  return kOk;
}

int cmd_localize(const Common& c, const std::string& image) {
  const GlobalConfig cfg = resolve(c);
  const ImageBuffer img = read_png(image);
  const fs::path dir = prepare_out(c, {"mask.png", "region.json"});
  Localization loc;
  try {
    loc = localize(img, cfg.localizer);
  } catch (const NoRegionFound& e) {
    ordered_json r;
    r["found"] = false;
    r["error"] = e.what();
    write_text(dir / "region.json", r.dump(2) + "\n");
    throw;
  }
  const SignRegion& sel = loc.select(cfg.render.region);
  write_mask_png(sel.mask, dir / "mask.png");
  ordered_json r;
  r["found"] = true;
  r["source"] = to_string(loc.whole.source);
  r["equalized"] = loc.equalized;
  r["contrast_ratio"] = contrast_ratio(img);
  r["selected"] = to_string(cfg.render.region);
  for (RegionVariant v : {RegionVariant::Whole, RegionVariant::Interior, RegionVariant::Border}) {
    const SignRegion& s = loc.select(v);
    ordered_json e;
    e["bbox"] = bbox_json(s.bbox);
    e["area"] = s.area();
    r[to_string(v)] = std::move(e);
  }
  write_text(dir / "region.json", r.dump(2) + "\n");
  std::cout << to_string(loc.whole.source) << " region, " << sel.area() << " px\n";
  return kOk;
}

int cmd_render(const Common& c, const std::string& image, const std::string& patch_path) {
  const GlobalConfig cfg = resolve(c);
  const ImageBuffer img = read_png(image);
  PatchParams patch;
  const json pj = read_json(patch_path);
  try {
    patch = (pj.contains("patch") ? pj.at("patch") : pj).get<PatchParams>();
  } catch (const json::exception& e) {
    throw DecodeError(patch_path + ": " + e.what());
  }
  const fs::path dir = prepare_out(c, {"triggered.png", "untriggered.png", "difference.png"});
  const Localization loc = localize(img, cfg.localizer);
  const AttackRenders r = render_states(img, loc.select(cfg.render.region), patch, residual_of(cfg.transforms));
  write_png(r.triggered, dir / "triggered.png");
  write_png(r.untriggered, dir / "untriggered.png");
  write_png(r.difference, dir / "difference.png");
  return kOk;
}

AttackGoal make_goal(const std::string& goal, std::optional<int> label, const std::string& box,
                     const ImageBuffer& img, const GlobalConfig& cfg) {
  const GoalKind kind = parse_goal(goal);
  switch (kind) {
    case GoalKind::Misclassify:
      if (!label) throw UsageError("--goal misclassify needs --label");
      return AttackGoal::misclassify(*label);
    case GoalKind::Hide:
      return AttackGoal::hide(box.empty() ? localize(img, cfg.localizer).whole.bbox : parse_box(box));
    case GoalKind::Generate:
      if (box.empty()) throw UsageError("--goal generate needs --box");
      return AttackGoal::generate(parse_box(box));
  }
  throw UsageError("unknown goal");
}

int cmd_attack(const Common& c, const std::string& image, const std::string& goal_name,
               std::optional<int> label, const std::string& box) {
  const GlobalConfig cfg = resolve(c);
  const ImageBuffer img = read_png(image);
  AttackGoal goal;
  try {
    goal = make_goal(goal_name, label, box, img, cfg);
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }
  const fs::path dir =
      prepare_out(c, {"result.json", "trace.jsonl", "triggered.png", "untriggered.png", "difference.png"});
  const BackendPtr backend = make_backend(cfg.oracle);
  const AttackConfig acfg = cfg.attack_config();
  const AttackResult r = run_attack(img, goal, acfg, *backend);
  write_attack_outputs(r, img, acfg, dir);
  std::cerr << "wall time " << r.wall_seconds << " s\n";
  if (!r.error.empty()) {
    std::cerr << "itpatch: backend failure: " << r.error << "\n";
    return kDomainFailure;
  }
  std::cout << (r.success ? "success" : "failure") << ": triggered rate " << r.verification.triggered_rate
            << ", untriggered correct " << (r.verification.untriggered_all_correct ? "yes" : "no") << "\n";
  return r.success ? kOk : kDomainFailure;
}

int cmd_verify(const Common& c, const std::string& image, const std::string& result_path, int samples) {
  const GlobalConfig cfg = resolve(c);
  const ImageBuffer img = read_png(image);
  AttackResult r;
  try {
    r = read_json(result_path).get<AttackResult>();
  } catch (const json::exception& e) {
    throw DecodeError(result_path + ": " + e.what());
  }
  if (r.best.shapes.empty()) throw DecodeError(result_path + ": no patch to verify");
  const std::uint64_t seed = c.seed ? attack_seeds(*c.seed).holdout : r.holdout_seed;
  const AttackConfig acfg = cfg.attack_config();
  const int n = samples > 0 ? samples : acfg.holdout_samples;
  const fs::path dir = prepare_out(c, {"verify.json"});
  const BackendPtr backend = make_backend(cfg.oracle);
  const VerifyReport v = verify(r.best, img, r.goal, acfg, *backend, seed, n);
  write_text(dir / "verify.json", json(v).dump(2) + "\n");
  std::cout << (v.success ? "success" : "failure") << ": triggered rate " << v.triggered_rate << "\n";
  return v.success ? kOk : kDomainFailure;
}

std::vector<SweepValue> parse_values(SweepParam p, const std::string& text) {
  std::vector<SweepValue> grid;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ';')) {
    if (tok.empty()) continue;
    SweepValue v;
    v.label = tok;
    if (p != SweepParam::Shape) {
      std::istringstream ts(tok);
      std::string part;
      while (std::getline(ts, part, '-')) {
        try {
          std::size_t used = 0;
          v.numbers.push_back(std::stod(part, &used));
          if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
          throw UsageError("bad sweep value '" + tok + "'");
        }
      }
    }
    grid.push_back(std::move(v));
  }
  return grid;
}

int cmd_sweep(const Common& c, const std::string& param, const std::string& corpus_dir,
              std::optional<std::string> values, std::optional<int> corpus_size) {
  GlobalConfig cfg = resolve(c);
  if (corpus_size) {
    if (*corpus_size < 1) throw UsageError("--corpus-size must be >= 1");
    cfg.eval.corpus_size = *corpus_size;
  }
  SweepSpec spec;
  spec.param = parse_sweep_param(param);
  spec.grid = values ? parse_values(spec.param, *values) : default_grid(spec.param);
  spec.attack = cfg.attack_config();
  spec.eval = cfg.eval;
  const std::string stem = std::string("sweep_") + to_string(spec.param);
  const fs::path dir = prepare_out(c, {stem + ".csv", stem + ".json"});
  SweepTable t;
  if (spec.grid.empty()) {
    t.param = spec.param;
    t.seed = cfg.seed;
    write_report(sweep_csv(t), sweep_json(t), dir, stem);
    std::cout << "empty sweep: no-op\n";
    return kOk;
  }
  const auto corpus = corpus_for(corpus_dir, cfg);
  const BackendPtr backend = make_backend(cfg.oracle);
  t = run_sweep(spec, corpus, *backend, c.jobs == 0 ? 1 : c.jobs);
  write_report(sweep_csv(t), sweep_json(t), dir, stem);
  std::cout << sweep_csv(t);
  return kOk;
}

// backend[+gaussian-smoothing][+input-randomization]
NamedBackend backend_from_spec(const std::string& spec, const GlobalConfig& cfg) {
  OracleConfig o = cfg.oracle;
  o.defenses.clear();
  std::istringstream in(spec);
  std::string part;
  bool first = true;
  std::vector<DefenseConfig> defenses;
  while (std::getline(in, part, '+')) {
    if (first) {
      apply_backend_flag(o, part);
      first = false;
    } else if (part == "gaussian-smoothing") {
      defenses.push_back({DefenseConfig::Kind::GaussianSmoothing});
    } else if (part == "input-randomization") {
      defenses.push_back({DefenseConfig::Kind::InputRandomization});
    } else {
      throw UsageError("unknown defense '" + part + "' in '" + spec + "'");
    }
  }
  if (first) throw UsageError("empty backend spec");
  // Written innermost first on the command line.
  o.defenses.assign(defenses.rbegin(), defenses.rend());
  return {spec, make_backend(o)};
}

int cmd_transfer(const Common& c, std::vector<std::string> sources, const std::vector<std::string>& targets,
                 const std::string& corpus_dir) {
  const GlobalConfig cfg = resolve(c);
  if (targets.empty()) throw UsageError("transfer needs at least one --target");
  if (sources.empty()) sources.push_back(cfg.oracle.backend == "external" ? "external:" + cfg.oracle.endpoint
                                                                          : cfg.oracle.backend);
  std::vector<NamedBackend> src, dst;
  for (const auto& s : sources) src.push_back(backend_from_spec(s, cfg));
  for (const auto& t : targets) dst.push_back(backend_from_spec(t, cfg));
  const fs::path dir = prepare_out(c, {"transfer.csv", "transfer.json"});
  const auto corpus = corpus_for(corpus_dir, cfg);
  AttackConfig acfg = budgeted(cfg.attack_config(), cfg.eval);
  std::vector<SourcePatches> patches;
  for (const auto& s : src) {
    SourcePatches sp{s.name, {}};
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      acfg.seed = item_seed(cfg.seed, i);
      sp.results.push_back(run_attack(corpus[i].image, AttackGoal::misclassify(corpus[i].label), acfg, *s.backend));
    }
    patches.push_back(std::move(sp));
  }
  const TransferMatrix m = transfer_matrix(patches, dst, corpus, acfg);
  write_report(transfer_csv(m), transfer_json(m), dir, "transfer");
  std::cout << transfer_csv(m);
  return kOk;
}

int cmd_oracle_check(const Common& c) {
  const GlobalConfig cfg = resolve(c);
  const BackendPtr backend = make_backend(cfg.oracle);
  const SynthItem probe = toy_corpus(1, cfg.seed)[0];
  std::cout << "backend " << backend->describe() << "\n";
  bool any = false;
  for (Task t : {Task::Classify, Task::Detect}) {
    if (!backend->supports(t)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    OracleResponse r;
    try {
      r = backend->query(t, probe.image);
    } catch (const RemoteError& e) {
      std::cout << to_string(t) << ": not served (" << e.what() << ")\n";
      continue;
    }
    any = true;
    validate_response(r, backend->classes());
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::cout << to_string(t) << ": ok";
    if (t == Task::Classify) std::cout << ", k=" << r.probs.size() << ", argmax " << r.argmax();
    if (t == Task::Detect) std::cout << ", " << r.detections.size() << " detection(s)";
    std::cout << ", " << ms << " ms\n";
  }
  if (!any) throw OracleError("backend answered no task");
  return kOk;
}

int cmd_oracle_serve(const Common& c) {
  const GlobalConfig cfg = resolve(c);
  if (cfg.oracle.backend == "external") throw UsageError("oracle-serve needs a toy backend");
  const BackendPtr backend = make_backend(cfg.oracle);
  std::string line;
  while (std::getline(std::cin, line)) {
    std::cout << handle_request_line(*backend, line) << "\n" << std::flush;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box invisible-trigger patch toolkit", "itpatch"};
  app.require_subcommand(1);
  Common common;

  auto* config = app.add_subcommand("config", "Print or write the full configuration");
  bool emit = false;
  config->add_flag("--emit-defaults", emit, "Emit every key with its default");
  add_common(config, common);

  auto* synth = app.add_subcommand("synth", "Write a synthetic sign corpus");
  std::string kind = "toy";
  int count = 20, size = 32;
  synth->add_option("--kind", kind, "toy | localization");
  synth->add_option("--count", count, "Number of images");
  synth->add_option("--size", size, "Image side in pixels");
  add_common(synth, common);

  std::string image;
  auto* loc = app.add_subcommand("localize", "Write the sign mask and region summary");
  loc->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  add_common(loc, common);

  std::string patch_path;
  auto* render = app.add_subcommand("render", "Render a patch triggered and untriggered");
  render->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  render->add_option("--patch", patch_path, "Patch or result JSON")->required()->check(CLI::ExistingFile);
  add_common(render, common);

  std::string goal = "misclassify", box;
  std::optional<int> label;
  auto* attack = app.add_subcommand("attack", "Search a patch against the backend");
  attack->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  attack->add_option("--goal", goal, "misclassify | hide | generate");
  attack->add_option("--label", label, "True label (misclassify)");
  attack->add_option("--box", box, "x0,y0,x1,y1 (hide truth or generate target)");
  add_common(attack, common);

  std::string result_path;
  int samples = 0;
  auto* ver = app.add_subcommand("verify", "Re-check a result on hold-out transforms");
  ver->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  ver->add_option("--result", result_path, "result.json")->required()->check(CLI::ExistingFile);
  ver->add_option("--samples", samples, "Hold-out samples (default from config)");
  add_common(ver, common);

  std::string param = "radius", corpus;
  std::optional<std::string> values;
  std::optional<int> corpus_size;
  auto* sweep = app.add_subcommand("sweep", "Ablation sweep over one patch parameter");
  sweep->add_option("--param", param, "radius | color | circle_count | position_block | shape");
  sweep->add_option("--values", values, "';'-separated grid values (default: full grid)");
  sweep->add_option("--corpus", corpus, "Corpus directory from 'synth' (default: synthetic)");
  sweep->add_option("--corpus-size", corpus_size, "Synthetic corpus size");
  add_common(sweep, common);

  std::vector<std::string> sources, targets;
  auto* transfer = app.add_subcommand("transfer", "Transferability matrix");
  transfer->add_option("--source", sources, "Source backend spec (repeatable)");
  transfer->add_option("--target", targets, "Target backend spec, e.g. toy-classifier+gaussian-smoothing");
  transfer->add_option("--corpus", corpus, "Corpus directory from 'synth' (default: synthetic)");
  add_common(transfer, common);

  auto* check = app.add_subcommand("oracle-check", "Probe the configured backend");
  add_common(check, common);

  auto* serve = app.add_subcommand("oracle-serve", "Serve a toy backend over stdin/stdout");
  add_common(serve, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*config) return cmd_config(common, emit);
    if (*synth) return cmd_synth(common, kind, count, size);
    if (*loc) return cmd_localize(common, image);
    if (*render) return cmd_render(common, image, patch_path);
    if (*attack) return cmd_attack(common, image, goal, label, box);
    if (*ver) return cmd_verify(common, image, result_path, samples);
    if (*sweep) return cmd_sweep(common, param, corpus, values, corpus_size);
    if (*transfer) return cmd_transfer(common, sources, targets, corpus);
    if (*check) return cmd_oracle_check(common);
    if (*serve) return cmd_oracle_serve(common);
  } catch (const UsageError& e) {
    std::cerr << "itpatch: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "itpatch: config error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "itpatch: " << e.what() << "\n";
    return kUsage;
  } catch (const DecodeError& e) {
    std::cerr << "itpatch: " << e.what() << "\n";
    return kUsage;
  } catch (const NoRegionFound& e) {
    std::cerr << "itpatch: no sign region: " << e.what() << "\n";
    return kDomainFailure;
  } catch (const OracleError& e) {
    std::cerr << "itpatch: oracle error: " << e.what() << "\n";
    return kDomainFailure;
  } catch (const std::exception& e) {
    std::cerr << "itpatch: " << e.what() << "\n";
    return kDomainFailure;
  }
  return kUsage;
}
