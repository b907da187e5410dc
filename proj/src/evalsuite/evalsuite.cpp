// SPDX-License-Identifier: Apache-2.0

#include "itpatch/evalsuite.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "itpatch/error.hpp"
#include "itpatch/parallel.hpp"

namespace itpatch {

using nlohmann::ordered_json;

AsrRecord classification_record(std::string item, int y, int untriggered, int triggered) {
  AsrRecord r;
  r.item = std::move(item);
  r.label = y;
  r.untriggered_label = untriggered;
  r.triggered_label = triggered;
  r.untriggered_ok = untriggered == y;
  r.triggered_ok = triggered != y;
  return r;
}

AsrReport asr(std::vector<AsrRecord> records) {
  if (records.empty()) throw ContractViolation("asr needs at least one record");
  AsrReport rep;
  rep.n = records.size();
  for (const auto& r : records) rep.successes += r.success() ? 1 : 0;
  rep.asr = static_cast<double>(rep.successes) / static_cast<double>(rep.n);
  rep.records = std::move(records);
  return rep;
}

AsrRecord attack_record(std::string item, const AttackResult& r, double success_rate) {
  AsrRecord rec;
  rec.item = std::move(item);
  rec.label = r.goal.label;
  rec.untriggered_label = r.untriggered_prediction;
  rec.triggered_label = r.triggered_prediction;
  rec.error = r.error;
  if (r.error.empty() && !r.verification.samples.empty()) {
    rec.untriggered_ok = r.verification.untriggered_all_correct;
    rec.triggered_ok = r.verification.triggered_rate >= success_rate;
  }
  return rec;
}

const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Radius:
      return "radius";
    case SweepParam::Color:
      return "color";
    case SweepParam::CircleCount:
      return "circle_count";
    case SweepParam::PositionBlock:
      return "position_block";
    case SweepParam::Shape:
      return "shape";
  }
  return "?";
}

SweepParam parse_sweep_param(const std::string& name) {
  for (SweepParam p : {SweepParam::Radius, SweepParam::Color, SweepParam::CircleCount,
                       SweepParam::PositionBlock, SweepParam::Shape}) {
    if (name == to_string(p)) return p;
  }
  throw ConfigError("unknown sweep parameter '" + name + "'");
}

std::vector<SweepValue> default_grid(SweepParam p) {
  std::vector<SweepValue> g;
  switch (p) {
    case SweepParam::Radius:
      for (int r = 1; r <= 15; ++r) g.push_back({std::to_string(r), {static_cast<double>(r)}});
      break;
    case SweepParam::Color:
      for (int r : {0, 128, 255}) {
        for (int gr : {0, 128, 255}) {
          for (int b : {0, 128, 255}) {
            g.push_back({std::to_string(r) + "-" + std::to_string(gr) + "-" + std::to_string(b),
                         {static_cast<double>(r), static_cast<double>(gr), static_cast<double>(b)}});
          }
        }
      }
      break;
    case SweepParam::CircleCount:
      for (int k = 1; k <= 5; ++k) g.push_back({std::to_string(k), {static_cast<double>(k)}});
      break;
    case SweepParam::PositionBlock:
      for (int by = 0; by < 8; ++by) {
        for (int bx = 0; bx < 8; ++bx) {
          g.push_back({std::to_string(bx) + "-" + std::to_string(by),
                       {static_cast<double>(bx), static_cast<double>(by)}});
        }
      }
      break;
    case SweepParam::Shape:
      for (ShapeKind k : {ShapeKind::Circle, ShapeKind::Line, ShapeKind::Curve}) g.push_back({to_string(k), {}});
      break;
  }
  return g;
}

void EvalConfig::validate() const {
  if (iterations < 1) throw ConfigError("eval.iterations must be >= 1");
  if (restarts < 1) throw ConfigError("eval.restarts must be >= 1");
  if (corpus_size < 1) throw ConfigError("eval.corpus_size must be >= 1");
}

AttackConfig pin_parameter(const AttackConfig& base, SweepParam p, const SweepValue& value,
                           int image_width, int image_height) {
  AttackConfig cfg = base;
  auto need = [&](std::size_t n) {
    if (value.numbers.size() != n) {
      throw ConfigError(std::string(to_string(p)) + " value '" + value.label + "' needs " +
                        std::to_string(n) + " number(s)");
    }
  };
  switch (p) {
    case SweepParam::Radius:
      need(1);
      if (value.numbers[0] < 0) throw ConfigError("radius must be >= 0");
      cfg.bounds.radius_lo = cfg.bounds.radius_hi = value.numbers[0];
      break;
    case SweepParam::Color:
      need(3);
      for (std::size_t c = 0; c < 3; ++c) {
        if (value.numbers[c] < 0 || value.numbers[c] > 255) throw ConfigError("color must lie in 0..255");
        cfg.bounds.color_lo[c] = cfg.bounds.color_hi[c] = value.numbers[c];
      }
      break;
    case SweepParam::CircleCount: {
      need(1);
      const int k = static_cast<int>(value.numbers[0]);
      if (k < 1 || k != value.numbers[0]) throw ConfigError("circle count must be a positive integer");
      cfg.shapes.assign(static_cast<std::size_t>(k), ShapeKind::Circle);
      break;
    }
    case SweepParam::PositionBlock: {
      need(2);
      const int bx = static_cast<int>(value.numbers[0]), by = static_cast<int>(value.numbers[1]);
      if (bx < 0 || bx > 7 || by < 0 || by > 7) throw ConfigError("position block must lie in the 8x8 grid");
      const int cw = std::max(1, image_width / 8), ch = std::max(1, image_height / 8);
      cfg.position_block = std::array<int, 4>{bx * cw, (bx + 1) * cw, by * ch, (by + 1) * ch};
      break;
    }
    case SweepParam::Shape: {
      const ShapeKind k = parse_shape_kind(value.label);
      cfg.shapes.assign(cfg.shapes.size(), k);
      break;
    }
  }
  return cfg;
}

AttackConfig budgeted(const AttackConfig& base, const EvalConfig& eval) {
  AttackConfig cfg = base;
  if (!eval.full_budget) {
    cfg.pso.iterations = eval.iterations;
    cfg.pso.restarts = eval.restarts;
  }
  return cfg;
}

std::uint64_t item_seed(std::uint64_t base, std::size_t item) {
  return derive_seed(base, static_cast<std::uint64_t>(item));
}

namespace {

std::string item_name(std::size_t i) { return "item" + std::to_string(i); }

AsrRecord failed_record(std::string item, int label, const std::string& error) {
  AsrRecord r;
  r.item = std::move(item);
  r.label = label;
  r.error = error;
  return r;
}

}  // namespace

SweepTable run_sweep(const SweepSpec& spec, const std::vector<SynthItem>& corpus, Backend& backend,
                     int jobs) {
  spec.eval.validate();
  SweepTable table;
  table.param = spec.param;
  table.seed = spec.eval.seed;
  if (spec.grid.empty() || corpus.empty()) return table;
  const std::size_t n = corpus.size();
  std::vector<AsrRecord> records(spec.grid.size() * n);
  parallel_for(records.size(), jobs, [&](std::size_t k) {
    const std::size_t cell = k / n, i = k % n;
    const SynthItem& item = corpus[i];
    try {
      AttackConfig cfg = pin_parameter(budgeted(spec.attack, spec.eval), spec.param, spec.grid[cell],
                                       item.image.width(), item.image.height());
      cfg.seed = item_seed(spec.eval.seed, i);
      if (jobs != 1) cfg.pso.jobs = 1;
      const AttackResult r = run_attack(item.image, AttackGoal::misclassify(item.label), cfg, backend);
      records[k] = attack_record(item_name(i), r, cfg.holdout_success_rate);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      records[k] = failed_record(item_name(i), item.label, e.what());
    }
  });
  for (std::size_t c = 0; c < spec.grid.size(); ++c) {
    SweepCell cell;
    cell.value = spec.grid[c];
    std::vector<AsrRecord> rs(records.begin() + static_cast<std::ptrdiff_t>(c * n),
                              records.begin() + static_cast<std::ptrdiff_t>((c + 1) * n));
    for (const auto& r : rs) cell.errors += r.error.empty() ? 0 : 1;
    cell.report = asr(std::move(rs));
    table.cells.push_back(std::move(cell));
  }
  return table;
}

TransferMatrix transfer_matrix(const std::vector<SourcePatches>& sources,
                               const std::vector<NamedBackend>& targets,
                               const std::vector<SynthItem>& corpus, const AttackConfig& cfg) {
  TransferMatrix m;
  for (const auto& s : sources) m.sources.push_back(s.name);
  for (const auto& t : targets) m.targets.push_back(t.name);
  for (const auto& s : sources) {
    if (s.results.size() != corpus.size()) {
      throw ContractViolation("source '" + s.name + "' has " + std::to_string(s.results.size()) +
                              " results for " + std::to_string(corpus.size()) + " items");
    }
    std::vector<AsrReport> row;
    for (const auto& t : targets) {
      std::vector<AsrRecord> records;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const AttackResult& r = s.results[i];
        if (r.best.shapes.empty()) {
          records.push_back(failed_record(item_name(i), r.goal.label, r.error.empty() ? "no patch" : r.error));
          continue;
        }
        try {
          const VerifyReport v = verify(r.best, corpus[i].image, r.goal, cfg, *t.backend,
                                        r.holdout_seed, cfg.holdout_samples);
          AsrRecord rec;
          rec.item = item_name(i);
          rec.label = r.goal.label;
          rec.untriggered_ok = v.untriggered_all_correct;
          rec.triggered_ok = v.triggered_rate >= cfg.holdout_success_rate;
          records.push_back(rec);
        } catch (const std::exception& e) {
          records.push_back(failed_record(item_name(i), r.goal.label, e.what()));
        }
      }
      row.push_back(asr(std::move(records)));
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

namespace {

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ordered_json report_json(const AsrReport& r) {
  ordered_json o;
  o["n"] = r.n;
  o["successes"] = r.successes;
  o["asr"] = r.asr;
  ordered_json recs = ordered_json::array();
  for (const auto& x : r.records) {
    ordered_json e;
    e["item"] = x.item;
    e["label"] = x.label;
    e["untriggered_label"] = x.untriggered_label;
    e["triggered_label"] = x.triggered_label;
    e["untriggered_ok"] = x.untriggered_ok;
    e["triggered_ok"] = x.triggered_ok;
    e["success"] = x.success();
    e["error"] = x.error;
    recs.push_back(std::move(e));
  }
  o["records"] = std::move(recs);
  return o;
}

AsrReport report_from_json(const nlohmann::json& j) {
  std::vector<AsrRecord> recs;
  for (const auto& e : j.at("records")) {
    AsrRecord r;
    r.item = e.at("item").get<std::string>();
    r.label = e.at("label").get<int>();
    r.untriggered_label = e.at("untriggered_label").get<int>();
    r.triggered_label = e.at("triggered_label").get<int>();
    r.untriggered_ok = e.at("untriggered_ok").get<bool>();
    r.triggered_ok = e.at("triggered_ok").get<bool>();
    r.error = e.at("error").get<std::string>();
    recs.push_back(std::move(r));
  }
  AsrReport rep = asr(std::move(recs));
  if (rep.successes != j.at("successes").get<std::size_t>() || rep.n != j.at("n").get<std::size_t>()) {
    throw ConfigError("report counts disagree with its records");
  }
  return rep;
}

}  // namespace

std::string sweep_csv(const SweepTable& t) {
  std::ostringstream o;
  o << "schema_version,param,value,n,successes,asr,errors,seed\n";
  for (const auto& c : t.cells) {
    o << kReportSchemaVersion << ',' << to_string(t.param) << ',' << csv_field(c.value.label) << ','
      << c.report.n << ',' << c.report.successes << ',' << fmt(c.report.asr) << ',' << c.errors << ','
      << t.seed << '\n';
  }
  return o.str();
}

ordered_json sweep_json(const SweepTable& t) {
  ordered_json o;
  o["schema_version"] = kReportSchemaVersion;
  o["kind"] = "sweep";
  o["param"] = to_string(t.param);
  o["seed"] = t.seed;
  ordered_json cells = ordered_json::array();
  for (const auto& c : t.cells) {
    ordered_json e;
    e["value"] = c.value.label;
    e["numbers"] = c.value.numbers;
    e["errors"] = c.errors;
    e["report"] = report_json(c.report);
    cells.push_back(std::move(e));
  }
  o["cells"] = std::move(cells);
  return o;
}

SweepTable sweep_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) throw ConfigError("unsupported report schema_version");
    if (j.at("kind").get<std::string>() != "sweep") throw ConfigError("not a sweep report");
    SweepTable t;
    t.param = parse_sweep_param(j.at("param").get<std::string>());
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("cells")) {
      SweepCell c;
      c.value.label = e.at("value").get<std::string>();
      c.value.numbers = e.at("numbers").get<std::vector<double>>();
      c.errors = e.at("errors").get<std::size_t>();
      c.report = report_from_json(e.at("report"));
      t.cells.push_back(std::move(c));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep report: ") + e.what());
  }
}

std::string transfer_csv(const TransferMatrix& m) {
  std::ostringstream o;
  o << "schema_version,source,target,n,successes,asr,errors\n";
  for (std::size_t s = 0; s < m.sources.size(); ++s) {
    for (std::size_t t = 0; t < m.targets.size(); ++t) {
      const AsrReport& r = m.cells[s][t];
      std::size_t errors = 0;
      for (const auto& x : r.records) errors += x.error.empty() ? 0 : 1;
      o << kReportSchemaVersion << ',' << csv_field(m.sources[s]) << ',' << csv_field(m.targets[t]) << ','
        << r.n << ',' << r.successes << ',' << fmt(r.asr) << ',' << errors << '\n';
    }
  }
  return o.str();
}

ordered_json transfer_json(const TransferMatrix& m) {
  ordered_json o;
  o["schema_version"] = kReportSchemaVersion;
  o["kind"] = "transfer";
  o["sources"] = m.sources;
  o["targets"] = m.targets;
  ordered_json rows = ordered_json::array();
  for (const auto& row : m.cells) {
    ordered_json r = ordered_json::array();
    for (const auto& c : row) r.push_back(report_json(c));
    rows.push_back(std::move(r));
  }
  o["cells"] = std::move(rows);
  return o;
}

void write_report(const std::string& csv, const ordered_json& json, const std::filesystem::path& dir,
                  const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream c(dir / (stem + ".csv"));
  if (!c) throw IoError("cannot write " + (dir / (stem + ".csv")).string());
  c << csv;
  std::ofstream j(dir / (stem + ".json"));
  if (!j) throw IoError("cannot write " + (dir / (stem + ".json")).string());
  j << json.dump(2) << '\n';
  if (!c || !j) throw IoError("report write failed under " + dir.string());
}

}  // namespace itpatch
