#include "relay/curriculum/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "relay/errors.hpp"
#include "relay/numcore/ops.hpp"
#include "relay/numcore/rng.hpp"
#include "relay/numcore/tape.hpp"
#include "relay/worldgen/dataset.hpp"

namespace relay::curriculum {

using nlohmann::json;
using num::AdamConfig;
using num::AdamState;
using num::Binding;
using num::ParamStore;
using num::Rng;
using num::Tape;
using num::Var;

namespace {

budget::ObservationPlan plan_of(const TrainConfig& cfg) {
  return budget::ObservationPlan{cfg.M_train, cfg.F, cfg.h, cfg.w, cfg.model.K};
}

void check_schedule(const StageSchedule& s, int stage) {
  if (!s.enabled) return;
  if (s.steps < 1 || s.batch < 1 || !(s.lr > 0.0)) {
    throw ConfigError("stage " + std::to_string(stage) +
                      ": steps and batch must be positive and lr > 0");
  }
}

double finite_or_throw(double loss, int stage, int step_id) {
  if (!std::isfinite(loss)) {
    throw TrainingError("stage " + std::to_string(stage) + " step " +
                        std::to_string(step_id) + ": loss is not finite");
  }
  return loss;
}

/// Shared answer-loss step for stages 2 and 3; they differ only in how many
/// agents the video is split across.
double answer_step(const TrainConfig& cfg, ParamStore& params, AdamState& opt,
                   const std::vector<world::Example>& batch, int M, int stage,
                   int step_id, double lr_scale) {
  if (batch.empty()) throw ContractError("training step: empty batch");
  Tape t;
  Binding P(t, params);
  std::vector<Var> losses;
  losses.reserve(batch.size());
  for (const world::Example& ex : batch) {
    std::vector<agents::CommTokens> comms;
    comms.reserve(static_cast<std::size_t>(M));
    int m = 0;
    for (std::pair<int, int> span : budget::partition(ex.video, M)) {
      budget::Observation obs = budget::sample_and_resize(
          ex.video, span, cfg.F, cfg.h, cfg.w, cfg.per, m);
      comms.push_back(agents::encode_local(t, P, cfg.model, obs, ex.query));
      ++m;
    }
    Var logits =
        agents::coordinate(t, P, cfg.model, ex.query, comms, ex.video.T, cfg.com);
    losses.push_back(num::cross_entropy(t, logits, ex.answer.label));
  }
  Var loss = num::mean_of(t, losses);
  const double value = finite_or_throw(t.value(loss)[0], stage, step_id);
  t.backward(loss);
  const double lr = stage == 2 ? cfg.stage2.lr : cfg.stage3.lr;
  num::adam_step(params, opt, P.grads(t),
                 AdamConfig{lr, cfg.beta1, cfg.beta2, cfg.adam_eps}, lr_scale);
  return value;
}

std::vector<world::Example> draw_batch(const std::vector<world::Example>& data,
                                       int batch, Rng& rng) {
  std::vector<world::Example> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    out.push_back(
        data[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(data.size()) - 1))]);
  }
  return out;
}

}  // namespace

void check_train_config(const TrainConfig& cfg) {
  agents::check_model_config(cfg.model);
  if (cfg.M_train < 1) throw ConfigError("M_train must be positive");
  if (cfg.F < 1) throw ConfigError("F must be positive");
  agents::patch_count(cfg.model, cfg.h, cfg.w);
  check_schedule(cfg.stage1, 1);
  check_schedule(cfg.stage2, 2);
  check_schedule(cfg.stage3, 3);
  if (!cfg.stage1.enabled && !cfg.stage2.enabled && !cfg.stage3.enabled) {
    throw ConfigError("no curriculum stage is enabled");
  }
  budget::check_plan(plan_of(cfg), cfg.per, cfg.com, world::kMaxQueryTokens);
}

json train_config_to_json(const TrainConfig& cfg) {
  auto stage = [](const StageSchedule& s) {
    return json{{"enabled", s.enabled},
                {"steps", s.steps},
                {"batch", s.batch},
                {"lr", s.lr}};
  };
  return json{{"model", agents::model_config_to_json(cfg.model)},
              {"m_train", cfg.M_train},
              {"frames", cfg.F},
              {"height", cfg.h},
              {"width", cfg.w},
              {"pixel_budget", cfg.per.max_pixels},
              {"token_budget", cfg.com.max_tokens},
              {"stage1", stage(cfg.stage1)},
              {"stage2", stage(cfg.stage2)},
              {"stage3", stage(cfg.stage3)},
              {"data_stage1", cfg.data_stage1},
              {"data_stage2", cfg.data_stage2},
              {"data_stage3", cfg.data_stage3},
              {"seed", cfg.seed},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"adam_eps", cfg.adam_eps}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  try {
    cfg.model = agents::model_config_from_json(j.at("model"));
    cfg.M_train = j.at("m_train").get<int>();
    cfg.F = j.at("frames").get<int>();
    cfg.h = j.at("height").get<int>();
    cfg.w = j.at("width").get<int>();
    cfg.per.max_pixels = j.at("pixel_budget").get<std::int64_t>();
    cfg.com.max_tokens = j.at("token_budget").get<std::int64_t>();
    auto stage = [&](const char* key, StageSchedule& s) {
      const json& sj = j.at(key);
      s.enabled = sj.at("enabled").get<bool>();
      s.steps = sj.at("steps").get<int>();
      s.batch = sj.at("batch").get<int>();
      s.lr = sj.at("lr").get<double>();
    };
    stage("stage1", cfg.stage1);
    stage("stage2", cfg.stage2);
    stage("stage3", cfg.stage3);
    cfg.data_stage1 = j.at("data_stage1").get<std::string>();
    cfg.data_stage2 = j.at("data_stage2").get<std::string>();
    cfg.data_stage3 = j.at("data_stage3").get<std::string>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.adam_eps = j.at("adam_eps").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config json: ") + e.what());
  }
  return cfg;
}

std::string config_hash(const TrainConfig& cfg) {
  const std::uint64_t h = Rng::fnv1a(train_config_to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

json stage_report_to_json(const StageReport& r) {
  return json{{"stage", r.stage},
              {"steps", r.steps},
              {"initial_loss", r.initial_loss},
              {"final_loss", r.final_loss},
              {"seconds", r.seconds}};
}

double stage1_step(const TrainConfig& cfg, ParamStore& params, AdamState& opt,
                   const std::vector<world::Example>& batch, int step_id,
                   double lr_scale) {
  if (batch.empty()) throw ContractError("training step: empty batch");
  Tape t;
  Binding P(t, params);
  const world::Query pad = world::pad_query();
  std::vector<Var> losses;
  losses.reserve(batch.size());
  for (const world::Example& ex : batch) {
    budget::Observation obs = budget::sample_and_resize(
        ex.video, budget::partition(ex.video, 1)[0], cfg.F, cfg.h, cfg.w,
        cfg.per, 0);
    agents::CommTokens c = agents::encode_local(t, P, cfg.model, obs, pad);
    losses.push_back(
        agents::caption_loss(t, P, cfg.model, c.values, ex.caption));
  }
  Var loss = num::mean_of(t, losses);
  const double value = finite_or_throw(t.value(loss)[0], 1, step_id);
  t.backward(loss);
  num::adam_step(params, opt, P.grads(t),
                 AdamConfig{cfg.stage1.lr, cfg.beta1, cfg.beta2, cfg.adam_eps},
                 lr_scale);
  return value;
}

double stage2_step(const TrainConfig& cfg, ParamStore& params, AdamState& opt,
                   const std::vector<world::Example>& batch, int step_id,
                   double lr_scale) {
  for (const world::Example& ex : batch) {
    if (ex.video.T != 1) {
      throw ContractError("stage 2 trains on single-frame videos, got T=" +
                          std::to_string(ex.video.T));
    }
  }
  return answer_step(cfg, params, opt, batch, 1, 2, step_id, lr_scale);
}

double stage3_step(const TrainConfig& cfg, ParamStore& params, AdamState& opt,
                   const std::vector<world::Example>& batch, int step_id,
                   double lr_scale) {
  return answer_step(cfg, params, opt, batch, cfg.M_train, 3, step_id,
                     lr_scale);
}

void check_stage_order(const std::vector<int>& done, int next) {
  for (int d : done) {
    if (d >= next) {
      throw ContractError("stage " + std::to_string(next) +
                          " cannot run after stage " + std::to_string(d) +
                          "; curriculum order is strict");
    }
  }
}

CurriculumResult run_curriculum(const TrainConfig& cfg,
                                const agents::Checkpoint* resume) {
  check_train_config(cfg);
  std::vector<std::vector<world::Example>> data(3);
  const StageSchedule* stages[3] = {&cfg.stage1, &cfg.stage2, &cfg.stage3};
  const std::string* paths[3] = {&cfg.data_stage1, &cfg.data_stage2,
                                 &cfg.data_stage3};
  for (int k = 0; k < 3; ++k) {
    if (!stages[k]->enabled) continue;
    if (paths[k]->empty()) {
      throw ConfigError("stage " + std::to_string(k + 1) +
                        " is enabled but has no dataset path");
    }
    data[static_cast<std::size_t>(k)] = world::read_jsonl(*paths[k]);
  }
  return run_curriculum(cfg, data, resume);
}

CurriculumResult run_curriculum(
    const TrainConfig& cfg, const std::vector<std::vector<world::Example>>& data,
    const agents::Checkpoint* resume) {
  check_train_config(cfg);
  if (data.size() != 3) {
    throw ContractError("run_curriculum expects one dataset slot per stage");
  }

  CurriculumResult out;
  agents::Checkpoint& ck = out.checkpoint;
  ck.model = cfg.model;
  ck.run_config = train_config_to_json(cfg);
  ck.vocab_hashes = agents::current_vocab_hashes();
  if (resume) {
    if (!(resume->model == cfg.model)) {
      throw ConfigError("resume checkpoint was built with a different model");
    }
    ck.params = resume->params;
    ck.stages_done = resume->stages_done;
  } else {
    Rng init_rng = Rng(cfg.seed).fork("init");
    ck.params = agents::init_params(cfg.model, init_rng);
  }

  const StageSchedule* stages[3] = {&cfg.stage1, &cfg.stage2, &cfg.stage3};
  using StepFn = double (*)(const TrainConfig&, ParamStore&, AdamState&,
                            const std::vector<world::Example>&, int, double);
  const StepFn step_fns[3] = {&stage1_step, &stage2_step, &stage3_step};

  for (int k = 1; k <= 3; ++k) {
    const StageSchedule& sched = *stages[k - 1];
    if (!sched.enabled) continue;
    check_stage_order(ck.stages_done, k);
    const std::vector<world::Example>& examples =
        data[static_cast<std::size_t>(k - 1)];
    if (examples.empty()) {
      throw ConfigError("stage " + std::to_string(k) + " has no examples");
    }

    ck.opt.init(ck.params);
    Rng rng = Rng(cfg.seed).fork("stage" + std::to_string(k));
    StageReport rep;
    rep.stage = k;
    rep.steps = sched.steps;
    const int tail = std::max(1, sched.steps / 10);
    double tail_sum = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int step = 0; step < sched.steps; ++step) {
      // Stage 3 ramps the learning rate down to a tenth; the early stages
      // run flat.
      const double scale =
          (k == 3 && sched.steps > 1)
              ? 1.0 - 0.9 * static_cast<double>(step) / (sched.steps - 1)
              : 1.0;
      const double loss =
          step_fns[k - 1](cfg, ck.params, ck.opt,
                          draw_batch(examples, sched.batch, rng), step, scale);
      if (step == 0) rep.initial_loss = loss;
      if (step >= sched.steps - tail) tail_sum += loss;
    }
    rep.final_loss = tail_sum / tail;
    rep.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    ck.stages_done.push_back(k);
    out.reports.push_back(rep);
  }
  return out;
}

}  // namespace relay::curriculum
