#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "relay/curriculum/train.hpp"
#include "relay/errors.hpp"
#include "relay/numcore/ops.hpp"
#include "relay/worldgen/dataset.hpp"

using namespace relay;
using curriculum::StageSchedule;
using curriculum::TrainConfig;
using num::AdamState;
using num::ParamStore;
using num::Rng;
using num::Tensor;

namespace {

/// Small model and small videos so a whole curriculum fits in a test.
TrainConfig micro_train_config() {
  TrainConfig cfg;
  cfg.model.d_enc = 8;
  cfg.model.d = 8;
  cfg.model.d_adp = 12;
  cfg.model.n_enc = 1;
  cfg.model.n_coord = 1;
  cfg.model.n_cap = 1;
  cfg.model.patch = 4;
  cfg.model.K = 2;
  cfg.model.mlp_mult = 2;
  cfg.M_train = 2;
  cfg.F = 4;
  cfg.h = 8;
  cfg.w = 8;
  cfg.stage1 = StageSchedule{true, 8, 2, 1e-3};
  cfg.stage2 = StageSchedule{true, 8, 2, 1e-3};
  cfg.stage3 = StageSchedule{true, 8, 2, 1e-3};
  return cfg;
}

std::vector<world::Example> tiny_dataset(int T, int n, const char* split,
                                         std::uint64_t seed) {
  world::DatasetSpec spec;
  spec.gen.T = T;
  spec.gen.difficulty = world::Difficulty::Easy;
  spec.mix = {{world::Difficulty::Trivial, 1.0}, {world::Difficulty::Easy, 1.0}};
  spec.kinds = world::default_kinds(T);
  spec.n = n;
  spec.split = split;
  spec.seed = seed;
  return world::make_dataset(spec);
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.count() != b.count()) return false;
  for (int i = 0; i < a.count(); ++i) {
    if (a.name_at(i) != b.name_at(i)) return false;
    const Tensor& x = a.value_at(i);
    const Tensor& y = b.value_at(i);
    if (!x.same_shape(y)) return false;
    for (std::int64_t j = 0; j < x.size(); ++j)
      if (x[j] != y[j]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("train config round trips through json and hashes stably") {
  TrainConfig cfg = micro_train_config();
  cfg.data_stage1 = "a.jsonl";
  cfg.seed = 42;
  nlohmann::json j = curriculum::train_config_to_json(cfg);
  TrainConfig back = curriculum::train_config_from_json(j);
  CHECK(curriculum::train_config_to_json(back) == j);
  CHECK(curriculum::config_hash(back) == curriculum::config_hash(cfg));
  CHECK(curriculum::config_hash(cfg).size() == 16);

  TrainConfig other = cfg;
  other.seed = 43;
  CHECK(curriculum::config_hash(other) != curriculum::config_hash(cfg));

  j.erase("seed");
  CHECK_THROWS_AS(curriculum::train_config_from_json(j), ConfigError);
}

TEST_CASE("config validation rejects impossible plans") {
  TrainConfig cfg = micro_train_config();
  CHECK_NOTHROW(curriculum::check_train_config(cfg));

  TrainConfig none = cfg;
  none.stage1.enabled = none.stage2.enabled = none.stage3.enabled = false;
  CHECK_THROWS_AS(curriculum::check_train_config(none), ConfigError);

  TrainConfig hungry = cfg;
  hungry.F = 16;
  hungry.h = hungry.w = 24;  // 9216 pixels > 4096
  CHECK_THROWS_AS(curriculum::check_train_config(hungry), BudgetExceeded);

  TrainConfig crowded = cfg;
  crowded.M_train = 200;  // 400 context tokens > 256
  CHECK_THROWS_AS(curriculum::check_train_config(crowded), BudgetExceeded);

  TrainConfig lazy = cfg;
  lazy.stage2.steps = 0;
  CHECK_THROWS_AS(curriculum::check_train_config(lazy), ConfigError);
}

TEST_CASE("initial losses sit at the uniform baseline") {
  TrainConfig cfg = micro_train_config();
  std::vector<world::Example> caps = tiny_dataset(8, 8, "train", 1);
  std::vector<world::Example> frames = tiny_dataset(1, 8, "train", 2);

  Rng rng(3);
  ParamStore params = agents::init_params(cfg.model, rng);
  AdamState opt;
  opt.init(params);

  const double l1 = curriculum::stage1_step(
      cfg, params, opt, {caps.begin(), caps.begin() + 2}, 0);
  const double uniform_cap = std::log(static_cast<double>(cfg.model.caption_vocab));
  CHECK(l1 > 0.8 * uniform_cap);
  CHECK(l1 < 1.2 * uniform_cap);

  Rng rng2(3);
  ParamStore fresh = agents::init_params(cfg.model, rng2);
  AdamState opt2;
  opt2.init(fresh);
  const double l2 = curriculum::stage2_step(
      cfg, fresh, opt2, {frames.begin(), frames.begin() + 2}, 0);
  const double uniform_ans = std::log(static_cast<double>(cfg.model.answer_vocab));
  CHECK(l2 > 0.8 * uniform_ans);
  CHECK(l2 < 1.2 * uniform_ans);
}

TEST_CASE("stage 1 leaves the answer path untouched") {
  TrainConfig cfg = micro_train_config();
  std::vector<world::Example> caps = tiny_dataset(8, 6, "train", 4);
  Rng rng(5);
  ParamStore params = agents::init_params(cfg.model, rng);
  AdamState opt;
  opt.init(params);

  const Tensor answer_before = params.at("coord.answer.w");
  const Tensor coord_before = params.at("coord.b0.attn.wq");
  const Tensor patch_before = params.at("enc.patch.w");
  const Tensor cap_before = params.at("cap.out.w");

  curriculum::stage1_step(cfg, params, opt, {caps.begin(), caps.begin() + 2}, 0);

  // Zero gradient means a zero Adam update: the coordinator is not on the
  // caption loss path, while the encoder and caption head are.
  auto unchanged = [](const Tensor& a, const Tensor& b) {
    for (std::int64_t i = 0; i < a.size(); ++i)
      if (a[i] != b[i]) return false;
    return true;
  };
  CHECK(unchanged(answer_before, params.at("coord.answer.w")));
  CHECK(unchanged(coord_before, params.at("coord.b0.attn.wq")));
  CHECK(!unchanged(patch_before, params.at("enc.patch.w")));
  CHECK(!unchanged(cap_before, params.at("cap.out.w")));
}

TEST_CASE("stage 2 insists on single-frame videos") {
  TrainConfig cfg = micro_train_config();
  std::vector<world::Example> videos = tiny_dataset(8, 2, "train", 6);
  Rng rng(7);
  ParamStore params = agents::init_params(cfg.model, rng);
  AdamState opt;
  opt.init(params);
  CHECK_THROWS_AS(curriculum::stage2_step(cfg, params, opt, videos, 0),
                  ContractError);
}

TEST_CASE("stage 3 with one agent is exactly stage 2 on the same data") {
  TrainConfig cfg = micro_train_config();
  cfg.M_train = 1;
  cfg.stage2.lr = cfg.stage3.lr = 1e-3;
  std::vector<world::Example> frames = tiny_dataset(1, 4, "train", 8);

  Rng rng(9);
  ParamStore p2 = agents::init_params(cfg.model, rng);
  Rng rng_same(9);
  ParamStore p3 = agents::init_params(cfg.model, rng_same);
  AdamState o2, o3;
  o2.init(p2);
  o3.init(p3);

  const double l2 = curriculum::stage2_step(cfg, p2, o2, frames, 0);
  const double l3 = curriculum::stage3_step(cfg, p3, o3, frames, 0);
  CHECK(l2 == l3);
  CHECK(same_params(p2, p3));
}

TEST_CASE("caption loss on empty scenes collapses toward zero") {
  // Scenes with no objects caption as the single EMPTY token; the head only
  // has to learn p(EMPTY) -> 1, so the loss should fall fast and stay down.
  TrainConfig cfg = micro_train_config();
  cfg.stage1.lr = 1e-2;
  world::SymbolicVideo blank;
  blank.T = 4;
  blank.H = 32;
  blank.W = 32;
  world::check_video(blank);
  world::Example ex;
  ex.video = blank;
  ex.query = world::pad_query();
  ex.caption = {world::ct::kEmpty};
  std::vector<world::Example> batch = {ex, ex};

  Rng rng(10);
  ParamStore params = agents::init_params(cfg.model, rng);
  AdamState opt;
  opt.init(params);

  double window[4] = {0, 0, 0, 0};
  for (int step = 0; step < 200; ++step) {
    window[step / 50] += curriculum::stage1_step(cfg, params, opt, batch, step);
  }
  CHECK(window[0] > window[1]);
  CHECK(window[1] > window[2]);
  CHECK(window[2] > window[3]);
  CHECK(window[3] / 50.0 < 0.1);  // -ln p(EMPTY) with p close to 1
}

TEST_CASE("non-finite losses abort with the offending step") {
  TrainConfig cfg = micro_train_config();
  std::vector<world::Example> caps = tiny_dataset(8, 2, "train", 11);
  Rng rng(12);
  ParamStore params = agents::init_params(cfg.model, rng);
  AdamState opt;
  opt.init(params);
  // Poison past the encoder: a broken encoder trips the communication norm
  // bound before any loss exists, which is its own contract failure.
  params.at("cap.out.b")[0] = std::numeric_limits<double>::infinity();
  try {
    curriculum::stage1_step(cfg, params, opt, caps, 417);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("417") != std::string::npos);
    CHECK(std::string(e.what()).find("stage 1") != std::string::npos);
  }
}

TEST_CASE("curriculum runs enabled stages in order and records them") {
  TrainConfig cfg = micro_train_config();
  std::vector<std::vector<world::Example>> data = {
      tiny_dataset(8, 8, "train", 13), tiny_dataset(1, 8, "train", 14),
      tiny_dataset(8, 8, "train", 15)};

  curriculum::CurriculumResult full = curriculum::run_curriculum(cfg, data);
  CHECK(full.checkpoint.stages_done == std::vector<int>{1, 2, 3});
  REQUIRE(full.reports.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(full.reports[static_cast<std::size_t>(k)].stage == k + 1);
    CHECK(full.reports[static_cast<std::size_t>(k)].steps == 8);
    CHECK(std::isfinite(full.reports[static_cast<std::size_t>(k)].final_loss));
  }
  CHECK(full.checkpoint.run_config == curriculum::train_config_to_json(cfg));

  // Ablation flags: skipping a stage still yields a usable checkpoint.
  TrainConfig no1 = cfg;
  no1.stage1.enabled = false;
  curriculum::CurriculumResult r1 = curriculum::run_curriculum(no1, data);
  CHECK(r1.checkpoint.stages_done == std::vector<int>{2, 3});
  CHECK(r1.reports.size() == 2);

  TrainConfig no2 = cfg;
  no2.stage2.enabled = false;
  CHECK(curriculum::run_curriculum(no2, data).checkpoint.stages_done ==
        std::vector<int>{1, 3});

  TrainConfig no3 = cfg;
  no3.stage3.enabled = false;
  CHECK(curriculum::run_curriculum(no3, data).checkpoint.stages_done ==
        std::vector<int>{1, 2});
}

TEST_CASE("identical config and seed give bit-identical checkpoints") {
  TrainConfig cfg = micro_train_config();
  cfg.seed = 77;
  std::vector<std::vector<world::Example>> data = {
      tiny_dataset(8, 6, "train", 16), tiny_dataset(1, 6, "train", 17),
      tiny_dataset(8, 6, "train", 18)};

  curriculum::CurriculumResult a = curriculum::run_curriculum(cfg, data);
  curriculum::CurriculumResult b = curriculum::run_curriculum(cfg, data);
  CHECK(same_params(a.checkpoint.params, b.checkpoint.params));
  CHECK(a.reports[2].final_loss == b.reports[2].final_loss);

  TrainConfig reseeded = cfg;
  reseeded.seed = 78;
  curriculum::CurriculumResult c = curriculum::run_curriculum(reseeded, data);
  CHECK(!same_params(a.checkpoint.params, c.checkpoint.params));
}

TEST_CASE("stage order is enforced against a resumed checkpoint") {
  TrainConfig cfg = micro_train_config();
  std::vector<std::vector<world::Example>> data = {
      tiny_dataset(8, 6, "train", 19), tiny_dataset(1, 6, "train", 20),
      tiny_dataset(8, 6, "train", 21)};

  TrainConfig only23 = cfg;
  only23.stage1.enabled = false;
  curriculum::CurriculumResult later = curriculum::run_curriculum(only23, data);
  CHECK(later.checkpoint.stages_done == std::vector<int>{2, 3});

  // Going back to stage 1 from a checkpoint that already saw stage 2 is
  // out of order.
  TrainConfig only1 = cfg;
  only1.stage2.enabled = false;
  only1.stage3.enabled = false;
  CHECK_THROWS_AS(
      curriculum::run_curriculum(only1, data, &later.checkpoint),
      ContractError);

  // Resuming forward is fine and keeps the earlier history.
  TrainConfig only12 = cfg;
  only12.stage3.enabled = false;
  curriculum::CurriculumResult first =
      curriculum::run_curriculum(only12, data);
  TrainConfig only3 = cfg;
  only3.stage1.enabled = false;
  only3.stage2.enabled = false;
  curriculum::CurriculumResult resumed =
      curriculum::run_curriculum(only3, data, &first.checkpoint);
  CHECK(resumed.checkpoint.stages_done == std::vector<int>{1, 2, 3});

  curriculum::check_stage_order({1, 2}, 3);
  CHECK_THROWS_AS(curriculum::check_stage_order({3}, 3), ContractError);
  CHECK_THROWS_AS(curriculum::check_stage_order({1, 3}, 2), ContractError);
}

TEST_CASE("file-backed curriculum surfaces data problems before training") {
  TrainConfig cfg = micro_train_config();
  cfg.stage2.enabled = false;
  cfg.stage3.enabled = false;
  cfg.data_stage1 = "";
  CHECK_THROWS_AS(curriculum::run_curriculum(cfg), ConfigError);
  cfg.data_stage1 = "no_such_dir/missing.jsonl";
  CHECK_THROWS_AS(curriculum::run_curriculum(cfg), IoError);

  const std::string path = "curriculum_stage1_data.jsonl";
  world::write_jsonl(path, tiny_dataset(8, 4, "train", 22));
  cfg.data_stage1 = path;
  curriculum::CurriculumResult r = curriculum::run_curriculum(cfg);
  CHECK(r.checkpoint.stages_done == std::vector<int>{1});
  std::remove(path.c_str());
}
