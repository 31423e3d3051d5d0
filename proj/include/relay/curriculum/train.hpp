#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "relay/agents/checkpoint.hpp"
#include "relay/agents/model.hpp"
#include "relay/budget/budget.hpp"
#include "relay/numcore/adam.hpp"
#include "relay/numcore/param_store.hpp"
#include "relay/worldgen/generate.hpp"

namespace relay::curriculum {

struct StageSchedule {
  bool enabled = true;
  int steps = 0;
  int batch = 4;
  double lr = 1e-3;
};

/// Full recipe for a training run. Serialises to JSON; the canonical dump is
/// hashed to name run directories, so identical configs share artifacts.
struct TrainConfig {
  agents::ModelConfig model;
  int M_train = 4;
  int F = 16;
  int h = 16, w = 16;
  budget::PerceptionBudget per{4096};
  budget::CommunicationBudget com{256};
  StageSchedule stage1{true, 1200, 4, 1e-3};
  StageSchedule stage2{true, 1500, 4, 1e-3};
  StageSchedule stage3{true, 3000, 4, 1e-3};
  std::string data_stage1, data_stage2, data_stage3;  // JSONL paths
  std::uint64_t seed = 0;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

/// Also validates the observation plan against both budgets, so a config
/// that could never run fails here rather than mid-training.
void check_train_config(const TrainConfig& cfg);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// 16 hex digits over the canonical JSON dump.
std::string config_hash(const TrainConfig& cfg);

struct StageReport {
  int stage = 0;
  int steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // mean over the last tenth of the stage
  double seconds = 0.0;
};

nlohmann::json stage_report_to_json(const StageReport& r);

// Single optimisation steps, one per curriculum stage. Each builds the
// stage's observation layout, computes its loss over the batch, runs one
// Adam update, and returns the loss. A non-finite loss aborts with
// TrainingError naming `step_id`.

/// Caption supervision: one agent sees the whole video under a PAD query;
/// teacher-forced caption cross entropy.
double stage1_step(const TrainConfig& cfg, num::ParamStore& params,
                   num::AdamState& opt,
                   const std::vector<world::Example>& batch, int step_id = -1,
                   double lr_scale = 1.0);

/// Query-conditioned evidence: single-frame videos (T=1), answer cross
/// entropy through the coordinator with one agent.
double stage2_step(const TrainConfig& cfg, num::ParamStore& params,
                   num::AdamState& opt,
                   const std::vector<world::Example>& batch, int step_id = -1,
                   double lr_scale = 1.0);

/// Collaboration: videos split across M_train agents, answer cross entropy
/// through the full fused context.
double stage3_step(const TrainConfig& cfg, num::ParamStore& params,
                   num::AdamState& opt,
                   const std::vector<world::Example>& batch, int step_id = -1,
                   double lr_scale = 1.0);

/// Throws ContractError unless `next` comes strictly after every stage the
/// checkpoint has already been through.
void check_stage_order(const std::vector<int>& done, int next);

struct CurriculumResult {
  agents::Checkpoint checkpoint;
  std::vector<StageReport> reports;
};

/// Runs the enabled stages in order 1 -> 2 -> 3, each starting from the
/// previous stage's weights (fresh optimiser moments per stage, since the
/// loss changes). Datasets are loaded from the config's paths; missing or
/// malformed data aborts before any training. Pass `resume` to continue an
/// earlier run: its weights are the starting point and stage order is
/// enforced against its history.
CurriculumResult run_curriculum(const TrainConfig& cfg,
                                const agents::Checkpoint* resume = nullptr);

/// Same, with datasets already in memory (index 0 -> stage 1, ...). Entries
/// for disabled stages may be empty.
CurriculumResult run_curriculum(
    const TrainConfig& cfg,
    const std::vector<std::vector<world::Example>>& data,
    const agents::Checkpoint* resume = nullptr);

}  // namespace relay::curriculum
