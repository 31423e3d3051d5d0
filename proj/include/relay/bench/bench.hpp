#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "relay/agents/checkpoint.hpp"
#include "relay/budget/budget.hpp"
#include "relay/curriculum/train.hpp"
#include "relay/worldgen/dataset.hpp"

namespace relay::bench {

// Margins the trend verdicts are judged against, as accuracy fractions.
// They are fixed here, not in run configs, so every report judges the same
// bars the acceptance suite does.
inline constexpr double kAgentGainMargin = 0.05;       // acc(M=4) - acc(M=1)
inline constexpr double kAgentScaleTolerance = 0.01;   // acc(M=6) vs acc(M=4)
inline constexpr double kTokenGapMargin = 0.02;        // acc(K=32) - acc(K=16)
inline constexpr double kTokenSaturationBand = 0.02;   // |acc(48) - acc(32)|
inline constexpr double kResolutionTolerance = 0.01;   // 8 -> 16 non-decreasing
inline constexpr double kChannelMargin = 0.05;         // latent - text
inline constexpr int kVerdictSeeds = 3;  // verdicts need at least this many

/// Exact-match tally for one query kind.
struct KindTally {
  int correct = 0;
  int total = 0;
  double accuracy() const { return total == 0 ? 0.0 : double(correct) / total; }
};

/// One evaluation run: a checkpoint, a dataset, and an observation plan.
/// Token counts are per question and must agree with the budget module's
/// accounting; wall-clock fields cover the coordinator forward only.
struct RunRecord {
  std::string config_hash;  // hash of the training config
  // "agents" | "tokens" | "resolution" for sweeps, "channel" | "stages" for
  // comparison runs, "eval" for a bare evaluate call.
  std::string axis;
  double axis_value = 0.0;
  std::string variant;          // channel or ablation tag when applicable
  std::uint64_t seed = 0;
  int questions = 0;
  std::array<KindTally, world::kQueryKinds> kinds{};
  double overall = 0.0;              // exact-match accuracy in [0, 1]
  double comm_tokens = 0.0;          // mean tokens communicated per question
  double comm_scalars = 0.0;         // mean scalars communicated per question
  double text_decoded_tokens = 0.0;  // text channel: mean pre-truncation length
  double coordinator_seconds = 0.0;  // mean coordinator forward wall time
  std::string timestamp;             // ISO-8601 UTC at record creation
  bool rejected = false;             // budget-rejected sweep point
  std::string reject_reason;
};

/// Query kinds whose evidence is spread across the timeline; the agent-count
/// verdict is judged on these.
const std::vector<world::QueryKind>& temporal_kinds();

/// Kinds that ask about a single object's appearance; the resolution verdict
/// is judged on these.
const std::vector<world::QueryKind>& attribute_kinds();

/// Pooled exact-match accuracy over a subset of kinds.
double kind_group_accuracy(const RunRecord& r,
                           const std::vector<world::QueryKind>& kinds);

/// Shared tallying core: run `answer` over the dataset and bucket
/// exact-match hits by query kind. This is also how the oracle checks
/// itself: passing oracle_answer as `answer` must give accuracy 1.
RunRecord tally_answers(const std::vector<world::Example>& data,
                        const std::function<int(const world::Example&)>& answer);

/// Greedy evaluation of a trained checkpoint over the latent channel.
/// Throws ConfigError when the plan disagrees with the checkpoint's
/// architecture and BudgetExceeded when the plan breaks a budget.
RunRecord evaluate(const agents::Checkpoint& ck,
                   const std::vector<world::Example>& data,
                   const budget::ObservationPlan& plan,
                   const budget::PerceptionBudget& per = {},
                   const budget::CommunicationBudget& com = {});

/// Same evaluation over the discrete text channel.
RunRecord evaluate_text(const agents::Checkpoint& ck,
                        const std::vector<world::Example>& data,
                        const budget::ObservationPlan& plan,
                        const budget::PerceptionBudget& per = {},
                        const budget::CommunicationBudget& com = {});

/// Fraction of examples whose greedy caption (whole video seen by one
/// agent) reproduces the reference caption token-for-token.
double caption_exact_match(const agents::Checkpoint& ck,
                           const std::vector<world::Example>& data,
                           int F, int h, int w,
                           const budget::PerceptionBudget& per = {});

// ---- sweeps ---------------------------------------------------------------

enum class Axis { Agents, Tokens, Resolution };

const char* axis_name(Axis a);

/// An experiment grid: walk `values` along one axis at fixed everything
/// else, `seeds` independent runs per value.
struct SweepSpec {
  Axis axis = Axis::Agents;
  std::vector<int> values;
  std::vector<std::uint64_t> seeds;
  curriculum::TrainConfig base;
};

/// Grids matching the source analyses.
SweepSpec agent_sweep(const curriculum::TrainConfig& base,
                      std::vector<std::uint64_t> seeds);      // M 1,2,3,4,6,8
SweepSpec token_sweep(const curriculum::TrainConfig& base,
                      std::vector<std::uint64_t> seeds);      // K 4,8,16,32,48
SweepSpec resolution_sweep(const curriculum::TrainConfig& base,
                           std::vector<std::uint64_t> seeds); // h=w 8,12,16,24

/// Hands the sweep the trained weights for one grid point. Agent sweeps see
/// the same checkpoint at every M; token and resolution sweeps get a
/// checkpoint trained for that K or input size.
using CheckpointProvider =
    std::function<const agents::Checkpoint*(int value, std::uint64_t seed)>;

/// One record per (value, seed). Points that cannot fit a budget become
/// rejected records carrying the error text; the provider is not consulted
/// for them. A nullptr from the provider for an in-budget point throws
/// ConfigError.
std::vector<RunRecord> run_sweep(const SweepSpec& spec,
                                 const CheckpointProvider& provider,
                                 const std::vector<world::Example>& data);

// ---- channel comparison ----------------------------------------------------

/// How often each channel answered with a distractor object's attribute
/// instead of the referent's, over attribute queries that have a distractor
/// of a different colour in frame.
struct BindingTally {
  int eligible = 0;
  int latent = 0;
  int text = 0;
};

struct ChannelReport {
  std::vector<RunRecord> latent;  // one per seed
  std::vector<RunRecord> text;
  double latent_mean = 0.0;
  double text_mean = 0.0;
  std::array<double, world::kQueryKinds> delta_by_kind{};  // latent - text
  double latent_tokens = 0.0;        // per question over the whole context
  double text_sent_tokens = 0.0;     // per question, after truncation
  double text_decoded_tokens = 0.0;  // per question, before truncation
  double state_share_scalars = 0.0;  // per question if agents shipped state
  BindingTally binding;

  double delta_overall() const { return latent_mean - text_mean; }
  /// The cost ordering the analysis table asserts: latent tokens < text
  /// tokens as decoded < state-share scalar count.
  bool cost_ordering_ok() const {
    return latent_tokens < text_decoded_tokens &&
           text_decoded_tokens < state_share_scalars;
  }
};

/// Evaluates both channels on the same data and plan, one checkpoint per
/// seed and channel. Throws ComparisonError when the two datasets differ or
/// the checkpoint lists disagree in length or architecture.
ChannelReport compare_channels(const std::vector<agents::Checkpoint>& latent_cks,
                               const std::vector<agents::Checkpoint>& text_cks,
                               const std::vector<world::Example>& data_latent,
                               const std::vector<world::Example>& data_text,
                               const budget::ObservationPlan& plan,
                               const budget::PerceptionBudget& per = {},
                               const budget::CommunicationBudget& com = {});

// ---- stage ablations --------------------------------------------------------

/// The four curricula the ablation table compares.
struct AblationVariant {
  std::string name;  // "full", "no-stage-1", "no-stage-2", "no-stage-3"
  bool stage1 = true, stage2 = true, stage3 = true;
};
const std::vector<AblationVariant>& ablation_variants();

struct AblationReport {
  struct Row {
    std::string name;
    double mean_overall = 0.0;
    std::array<double, world::kQueryKinds> kind_mean{};
    double caption_exact = 0.0;  // stage-1 metric
    std::vector<RunRecord> records;
  };
  std::vector<Row> rows;  // same order as ablation_variants()

  const Row& row(const std::string& name) const;
  bool full_beats_all() const;
  /// Accuracy lost vs the full curriculum.
  double drop(const std::string& name) const;
};

/// `provider(variant, seed)` returns the checkpoint trained under that
/// variant's stage flags. Caption exact-match is measured on
/// `caption_data` with a single whole-video agent.
AblationReport ablate_stages(
    const std::function<const agents::Checkpoint*(const std::string& variant,
                                                  std::uint64_t seed)>& provider,
    const std::vector<std::uint64_t>& seeds,
    const std::vector<world::Example>& data,
    const std::vector<world::Example>& caption_data,
    const budget::ObservationPlan& plan,
    const budget::PerceptionBudget& per = {},
    const budget::CommunicationBudget& com = {});

// ---- reporting ---------------------------------------------------------------

struct TrendPoint {
  double x = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

/// Mean and standard error of `metric` over seeds, grouped by axis value,
/// for the subset of records on `axis` (optionally one variant).
std::vector<TrendPoint> trend_series(
    const std::vector<RunRecord>& records, const std::string& axis,
    const std::function<double(const RunRecord&)>& metric,
    const std::string& variant = "");

struct Verdict {
  std::string name;
  bool decided = false;  // false when seeds < kVerdictSeeds or data missing
  bool pass = false;
  std::string detail;
};

/// Every verdict the given records can support. Never judges from fewer
/// than kVerdictSeeds seeds; undecidable verdicts come back decided=false.
std::vector<Verdict> trend_verdicts(const std::vector<RunRecord>& records,
                                    const std::optional<ChannelReport>& channels,
                                    const std::optional<AblationReport>& ablation);

/// CSV serialization with a fixed, documented column order. Wall-clock
/// columns (coordinator_seconds, timestamp) come last so determinism checks
/// can strip them. Round-trips exactly through parse_run_records_csv.
std::string run_records_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_run_records_csv(const std::string& text);

struct ReportBundle {
  std::vector<RunRecord> records;
  std::optional<ChannelReport> channels;
  std::optional<AblationReport> ablation;
};

/// Writes records.csv, summary.json, and one series_<axis>[_variant].csv
/// per axis present. Refuses an empty bundle (ContractError) rather than
/// writing empty artifacts; write failures raise IoError with the path.
/// Identical inputs produce byte-identical files apart from wall-clock
/// fields: the CSV's trailing two columns, and summary.json's "timing" and
/// "generated_at" entries.
void emit_report(const ReportBundle& bundle, const std::string& out_dir);

nlohmann::json summary_json(const ReportBundle& bundle);

}  // namespace relay::bench
