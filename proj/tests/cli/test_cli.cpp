#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "itpatch/config.hpp"
#include "itpatch/png_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = ITPATCH_CLI;
const std::string kDesk = ITPATCH_DESK_CONFIG;

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 2 and write nothing") {
  TempDir t("itpatch_cli_usage");
  CHECK(run("attack --bogus --out " + (t / "a")) == 2);
  CHECK_FALSE(fs::exists(t / "a"));
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("sweep --param size --out " + (t / "b")) == 2);
  CHECK(run("config --emit-defaults --config " + (t / "missing.json") + " --out " + (t / "c")) == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("config emission and reuse") {
  TempDir t("itpatch_cli_config");
  REQUIRE(run("config --emit-defaults --out " + t.path.string()) == 0);
  const fs::path cfg = t.path / "config.json";
  REQUIRE(fs::exists(cfg));
  CHECK(run("config --emit-defaults --out " + t.path.string()) == 2);
  CHECK(run("config --emit-defaults --force --out " + t.path.string()) == 0);
  CHECK(run("config --emit-defaults --config " + cfg.string() + " --out " + (t / "again")) == 0);
  CHECK(slurp(cfg) == slurp(t.path / "again" / "config.json"));
  {
    std::ofstream(t / "bad.json") << R"({"pso": {"iterations": 3, "typo": 1}})";
  }
  CHECK(run("oracle-check --config " + (t / "bad.json")) == 2);
}

TEST_CASE("localize writes mask and region") {
  TempDir t("itpatch_cli_localize");
  REQUIRE(run("synth --count 2 --out " + (t / "corpus")) == 0);
  REQUIRE(run("localize " + (t / "corpus/item000.png") + " --out " + (t / "loc")) == 0);
  CHECK(fs::exists(t.path / "loc" / "mask.png"));
  const auto region = nlohmann::json::parse(slurp(t.path / "loc" / "region.json"));
  CHECK(region["found"] == true);
  CHECK(region["whole"]["area"].get<int>() > 100);
  CHECK(run("localize " + (t / "corpus/item000.png") + " --out " + (t / "loc")) == 2);

  itpatch::ImageBuffer blank(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) blank.set_pixel(x, y, {0.5f, 0.5f, 0.5f});
  }
  itpatch::write_png(blank, t / "blank.png");
  CHECK(run("localize " + (t / "blank.png") + " --out " + (t / "blank")) == 1);
}

TEST_CASE("attack, verify and render") {
  TempDir t("itpatch_cli_attack");
  REQUIRE(run("synth --count 1 --seed 5 --out " + (t / "corpus")) == 0);
  const auto manifest = nlohmann::json::parse(slurp(t.path / "corpus" / "manifest.json"));
  const int label = manifest["items"][0]["label"];
  const std::string img = t / "corpus/item000.png";
  const std::string base = "attack " + img + " --config " + kDesk + " --seed 2 --label " + std::to_string(label);
  const int a = run(base + " --out " + (t / "a"));
  const int b = run(base + " --out " + (t / "b"));
  REQUIRE((a == 0 || a == 1));
  CHECK(a == b);
  for (const char* f : {"result.json", "trace.jsonl", "triggered.png", "untriggered.png", "difference.png"}) {
    CHECK(slurp(t.path / "a" / f) == slurp(t.path / "b" / f));
  }
  const auto result = nlohmann::json::parse(slurp(t.path / "a" / "result.json"));
  CHECK(result["success"] == (a == 0));
  CHECK(run(base + " --out " + (t / "a")) == 2);

  const int v = run("verify " + img + " --config " + kDesk + " --result " + (t / "a/result.json") + " --out " + (t / "v"));
  CHECK(v == a);
  CHECK(fs::exists(t.path / "v" / "verify.json"));
  CHECK(run("render " + img + " --patch " + (t / "a/result.json") + " --out " + (t / "r")) == 0);
  CHECK(slurp(t.path / "r" / "triggered.png") == slurp(t.path / "a" / "triggered.png"));

  CHECK(run("attack " + img + " --out " + (t / "nolabel")) == 2);
  CHECK(run("attack " + img + " --goal generate --out " + (t / "nobox")) == 2);
  CHECK(run("attack " + img + " --goal hide --out " + (t / "hide")) == 2);
}

TEST_CASE("sweep reports") {
  TempDir t("itpatch_cli_sweep");
  REQUIRE(run("sweep --param radius --values '' --out " + t.path.string()) == 0);
  CHECK(slurp(t.path / "sweep_radius.csv") == "schema_version,param,value,n,successes,asr,errors,seed\n");
  const std::string args = "sweep --param radius --values '2;9' --corpus-size 1 --seed 3 --config " + kDesk;
  REQUIRE(run(args + " --out " + (t / "a")) == 0);
  REQUIRE(run(args + " --out " + (t / "b")) == 0);
  const std::string csv = slurp(t.path / "a" / "sweep_radius.csv");
  CHECK(csv == slurp(t.path / "b" / "sweep_radius.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const auto j = nlohmann::json::parse(slurp(t.path / "a" / "sweep_radius.json"));
  CHECK(itpatch::sweep_csv(itpatch::sweep_from_json(j)) == csv);
  CHECK(run("sweep --param radius --values 'x' --out " + (t / "c")) == 2);
}

TEST_CASE("transfer report") {
  TempDir t("itpatch_cli_transfer");
  REQUIRE(run("synth --count 1 --seed 1 --out " + (t / "corpus")) == 0);
  REQUIRE(run("transfer --corpus " + (t / "corpus") + " --config " + kDesk +
              " --target toy-classifier --target toy-classifier+gaussian-smoothing --out " + t.path.string()) == 0);
  const std::string csv = slurp(t.path / "transfer.csv");
  CHECK(csv.rfind("schema_version,source,target,n,successes,asr,errors\n", 0) == 0);
  CHECK(csv.find(",toy-classifier,toy-classifier+gaussian-smoothing,1,") != std::string::npos);
  CHECK(run("transfer --target toy-classifier+jpeg --out " + (t / "x")) == 2);
}

TEST_CASE("oracle check and serve") {
  CHECK(run("oracle-check") == 0);
  CHECK(run("oracle-check --backend toy-detector") == 0);
  CHECK(run("oracle-check --backend 'external:exec:" + kBin + " oracle-serve'") == 0);
  CHECK(run("oracle-check --backend external:127.0.0.1:1") == 1);
  ::unsetenv("ITPATCH_ORACLE_ADDR");
  CHECK(run("oracle-check --backend external") == 2);
  ::setenv("ITPATCH_ORACLE_ADDR", ("exec:" + kBin + " oracle-serve").c_str(), 1);
  CHECK(run("oracle-check --backend external") == 0);
  ::unsetenv("ITPATCH_ORACLE_ADDR");
}
