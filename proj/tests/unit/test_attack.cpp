#include <atomic>
#include <filesystem>

#include "doctest.h"
#include "itpatch/attack.hpp"
#include "itpatch/error.hpp"
#include "itpatch/synth.hpp"

using namespace itpatch;

namespace {

AttackConfig small_config() {
  AttackConfig cfg;
  cfg.transforms.distance_m.enabled = false;
  cfg.transforms.h_view_deg = {-15, 15, true};
  cfg.transforms.v_view_deg = {0, 15, true};
  cfg.transforms.rotation_deg = {-5, 5, true};
  cfg.transforms.brightness_l = {0, 10, true};
  cfg.transforms.blur_len_px = {0, 3, true};
  cfg.pso.swarm_size = 10;
  cfg.pso.iterations = 6;
  cfg.pso.restarts = 2;
  cfg.pso.jobs = 2;
  cfg.seed = 4;
  return cfg;
}

// Throws once `budget` queries have been answered.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(BackendPtr inner, int budget) : inner_(std::move(inner)), budget_(budget) {}
  OracleResponse query(Task task, const ImageBuffer& img) override {
    if (calls_++ >= budget_) throw BackendUnavailable("connection reset");
    return inner_->query(task, img);
  }
  bool supports(Task task) const override { return inner_->supports(task); }
  std::size_t classes() const override { return inner_->classes(); }
  std::string describe() const override { return "flaky"; }

 private:
  BackendPtr inner_;
  int budget_;
  std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("misclassify attack on a toy sign") {
  ToyClassifier clf(toy_weights());
  const auto item = toy_corpus(1, 9)[0];
  const AttackGoal goal = AttackGoal::misclassify(item.label);
  const AttackConfig cfg = small_config();
  const AttackResult r = run_attack(item.image, goal, cfg, clf);
  CHECK(r.error.empty());
  CHECK(r.success);
  CHECK(r.untriggered_prediction == item.label);
  CHECK(r.triggered_prediction != item.label);
  REQUIRE(r.verification.samples.size() == 16);
  for (const auto& s : r.verification.samples) CHECK(s.untriggered_label == item.label);

  // The best patch respects bounds and the sign mask.
  const Localization loc = localize(item.image);
  for (const auto& s : r.best.shapes) {
    CHECK(loc.whole.mask.test(static_cast<int>(s.points[0][0]), static_cast<int>(s.points[0][1])));
    CHECK(s.radius >= 0);
    CHECK(s.radius <= 15);
    CHECK(s.alpha >= 0.7);
    CHECK(s.alpha <= 0.9);
  }
  const auto seeds = attack_seeds(cfg.seed);
  CHECK(r.pso_seed == seeds.pso);
  CHECK(r.holdout_seed == seeds.holdout);

  // verify() reproduces the stored outcome from the stored seed.
  const VerifyReport again = verify(r.best, item.image, goal, cfg, clf, r.holdout_seed, cfg.holdout_samples);
  CHECK(again.success == r.success);
  CHECK(nlohmann::json(again) == nlohmann::json(r.verification));

  // Same inputs, same result.
  const AttackResult twin = run_attack(item.image, goal, cfg, clf);
  CHECK(nlohmann::json(twin).dump() == nlohmann::json(r).dump());

  CHECK_THROWS_AS(verify(r.best, item.image, goal, cfg, clf, 1, 0), ContractViolation);
}

TEST_CASE("attack preconditions and degenerate settings") {
  auto clf = std::make_shared<ToyClassifier>(toy_weights());
  const auto item = toy_corpus(2, 1)[1];
  AttackConfig cfg = small_config();

  SUBCASE("wrong original label fails regardless of the triggered outcome") {
    const AttackResult r = run_attack(item.image, AttackGoal::misclassify((item.label + 1) % 3), cfg, *clf);
    CHECK_FALSE(r.success);
    CHECK_FALSE(r.verification.untriggered_all_correct);
  }
  SUBCASE("radius pinned to zero") {
    cfg.bounds.radius_lo = cfg.bounds.radius_hi = 0;
    const AttackResult r = run_attack(item.image, AttackGoal::misclassify(item.label), cfg, *clf);
    CHECK(r.error.empty());
    CHECK(r.best.shapes[0].radius == 0);
    CHECK(area_loss(r.best, 100) == 0);
    CHECK(r.verification.samples.size() == 16);
  }
  SUBCASE("no residual ink keeps every untriggered sample correct") {
    cfg.transforms.residual_alpha.enabled = false;
    PatchParams p;
    p.shapes = {ShapeParams::circle(15, 15, 6, {0, 255, 0}, 0.0)};
    const VerifyReport v = verify(p, item.image, AttackGoal::misclassify(item.label), cfg, *clf, 3, 16);
    CHECK(v.untriggered_all_correct);
    CHECK(v.triggered_rate == 0);
  }
  SUBCASE("goal and backend mismatch") {
    CHECK_THROWS_AS(run_attack(item.image, AttackGoal::hide(item.box), cfg, *clf), ConfigError);
  }
  SUBCASE("blank image") {
    CHECK_THROWS_AS(run_attack(ImageBuffer::filled(32, 32, {0.5f, 0.5f, 0.5f}),
                               AttackGoal::misclassify(0), cfg, *clf),
                    NoRegionFound);
  }
  SUBCASE("backend failure keeps the partial trace") {
    cfg.pso.jobs = 1;
    FlakyBackend flaky(clf, 100);
    const AttackResult r = run_attack(item.image, AttackGoal::misclassify(item.label), cfg, flaky);
    CHECK_FALSE(r.success);
    CHECK(r.error == "connection reset");
    REQUIRE(r.traces.size() == 1);
    CHECK(r.traces[0].best_loss.size() >= 1);
  }
  SUBCASE("position block outside the sign") {
    cfg.position_block = std::array<int, 4>{0, 2, 0, 2};
    const AttackResult r = run_attack(item.image, AttackGoal::misclassify(item.label), cfg, *clf);
    CHECK_FALSE(r.success);
    CHECK_FALSE(r.error.empty());
  }
  SUBCASE("config validation") {
    cfg.eot_samples_per_eval = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.l2 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("hide attack with the toy detector") {
  ToyDetector det(toy_weights());
  SynthSpec s = toy_exemplar_spec(1);
  const auto item = draw_sign(s);
  const BBox truth{item.box.x_min, item.box.y_min, item.box.x_max + 1, item.box.y_max + 1};
  AttackConfig cfg = small_config();
  const AttackGoal goal = AttackGoal::hide(truth);
  REQUIRE(untriggered_correct(goal, det.detect(item.image), cfg.loss));
  const AttackResult r = run_attack(item.image, goal, cfg, det);
  CHECK(r.error.empty());
  CHECK(r.verification.untriggered_all_correct);
  CHECK(r.verification.samples.size() == 16);
  if (r.success) CHECK(r.verification.triggered_rate >= 0.8);
}

TEST_CASE("result json and output files") {
  ToyClassifier clf(toy_weights());
  const auto item = toy_corpus(1, 2)[0];
  AttackConfig cfg = small_config();
  cfg.pso.restarts = 1;
  const AttackResult r = run_attack(item.image, AttackGoal::misclassify(item.label), cfg, clf);
  const nlohmann::json j = r;
  const AttackResult back = j.get<AttackResult>();
  CHECK(back.best == r.best);
  CHECK(back.success == r.success);
  CHECK(back.holdout_seed == r.holdout_seed);
  CHECK(back.goal.label == item.label);

  const auto dir = std::filesystem::temp_directory_path() / "itpatch_attack_outputs";
  std::filesystem::remove_all(dir);
  write_attack_outputs(r, item.image, cfg, dir);
  for (const char* f : {"result.json", "trace.jsonl", "triggered.png", "untriggered.png", "difference.png"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::filesystem::remove_all(dir);
}
