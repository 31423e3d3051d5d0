#include "relay/bench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "relay/errors.hpp"
#include "relay/numcore/rng.hpp"
#include "relay/numcore/tape.hpp"
#include "relay/worldgen/oracle.hpp"

namespace relay::bench {

using nlohmann::json;
using num::Binding;
using num::Tape;
using num::Var;

namespace {

std::string now_iso() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string json_hash16(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(num::Rng::fnv1a(j.dump())));
  return buf;
}

int argmax_row(const num::Tensor& logits) {
  int best = 0;
  for (std::int64_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  return best;
}

std::uint64_t seed_of(const agents::Checkpoint& ck) {
  if (ck.run_config.is_object() && ck.run_config.contains("seed"))
    return ck.run_config["seed"].get<std::uint64_t>();
  return 0;
}

void check_eval_inputs(const agents::Checkpoint& ck,
                       const std::vector<world::Example>& data,
                       const budget::ObservationPlan& plan,
                       const budget::PerceptionBudget& per,
                       const budget::CommunicationBudget& com) {
  if (data.empty()) throw ContractError("evaluate: empty dataset");
  if (plan.K != ck.model.K) {
    throw ConfigError("evaluate: plan sends K=" + std::to_string(plan.K) +
                      " tokens but the checkpoint was trained with K=" +
                      std::to_string(ck.model.K));
  }
  agents::patch_count(ck.model, plan.h, plan.w);
  budget::check_plan(plan, per, com, world::kMaxQueryTokens);
}

struct EvalCore {
  RunRecord record;
  std::vector<int> predictions;
};

EvalCore eval_core(const agents::Checkpoint& ck,
                   const std::vector<world::Example>& data,
                   const budget::ObservationPlan& plan,
                   const budget::PerceptionBudget& per,
                   const budget::CommunicationBudget& com, bool text_channel) {
  check_eval_inputs(ck, data, plan, per, com);
  const agents::ModelConfig& cfg = ck.model;

  EvalCore out;
  out.predictions.reserve(data.size());
  double coord_seconds = 0.0;
  std::int64_t comm_total = 0, scalars_total = 0, decoded_total = 0;

  for (const world::Example& ex : data) {
    Tape t;
    t.set_grad_enabled(false);
    Binding P(t, ck.params);

    Var logits;
    if (text_channel) {
      std::vector<agents::TextMessage> msgs;
      msgs.reserve(static_cast<std::size_t>(plan.M));
      int m = 0;
      for (std::pair<int, int> span : budget::partition(ex.video, plan.M)) {
        budget::Observation obs = budget::sample_and_resize(
            ex.video, span, plan.F, plan.h, plan.w, per, m);
        msgs.push_back(agents::text_channel_encode(cfg, ck.params, obs, ex.query));
        comm_total += static_cast<std::int64_t>(msgs.back().tokens.size());
        scalars_total += static_cast<std::int64_t>(msgs.back().tokens.size());
        decoded_total += msgs.back().decoded_tokens;
        ++m;
      }
      const auto t0 = std::chrono::steady_clock::now();
      logits = agents::coordinate_text(t, P, cfg, ex.query, msgs, ex.video.T, com);
      coord_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
    } else {
      std::vector<agents::CommTokens> comms;
      comms.reserve(static_cast<std::size_t>(plan.M));
      int m = 0;
      for (std::pair<int, int> span : budget::partition(ex.video, plan.M)) {
        budget::Observation obs = budget::sample_and_resize(
            ex.video, span, plan.F, plan.h, plan.w, per, m);
        comms.push_back(agents::encode_local(t, P, cfg, obs, ex.query));
        ++m;
      }
      // The budget module is the accounting authority: what we report as
      // communicated must be exactly its context load minus the query.
      const std::int64_t sent =
          budget::context_load(plan.M, cfg.K, ex.query) -
          budget::token_count(ex.query);
      if (sent != static_cast<std::int64_t>(plan.M) * cfg.K) {
        throw ContractError("evaluate: token accounting mismatch");
      }
      comm_total += sent;
      scalars_total += sent * cfg.d;
      const auto t0 = std::chrono::steady_clock::now();
      logits = agents::coordinate(t, P, cfg, ex.query, comms, ex.video.T, com);
      coord_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
    }
    out.predictions.push_back(argmax_row(t.value(logits)));
  }

  out.record = tally_answers(data, [&](const world::Example& ex) {
    return out.predictions[static_cast<std::size_t>(&ex - data.data())];
  });
  out.record.config_hash = json_hash16(ck.run_config);
  out.record.axis = "eval";
  out.record.variant = text_channel ? "text" : "latent";
  out.record.seed = seed_of(ck);
  const double n = static_cast<double>(data.size());
  out.record.comm_tokens = comm_total / n;
  out.record.comm_scalars = scalars_total / n;
  out.record.text_decoded_tokens = text_channel ? decoded_total / n : 0.0;
  out.record.coordinator_seconds = coord_seconds / n;
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1)) /
         std::sqrt(static_cast<double>(n));
}

/// Colours an object displays over its lifetime, as answer labels.
std::set<int> displayed_colors(const world::SymbolicVideo& v,
                               const world::SymbolicObject& o) {
  std::set<int> out = {world::ans::color(o.color).label};
  for (const world::Event& e : v.events) {
    if (e.kind == world::EventKind::Recolor && e.object_id == o.id)
      out.insert(world::ans::kColorBase + e.payload);
  }
  return out;
}

/// Attribute answers a wrong-binding model could give: the other objects'
/// colours (for colour queries) or shapes (for shape queries).
std::set<int> distractor_labels(const world::Example& ex) {
  const world::SymbolicObject* ref =
      world::referent_object(ex.video, ex.query);
  std::set<int> out;
  if (ref == nullptr) return out;
  const bool color_query = ex.answer.label < world::ans::kShapeBase;
  for (const world::SymbolicObject& o : ex.video.objects) {
    if (o.id == ref->id) continue;
    if (color_query) {
      for (int label : displayed_colors(ex.video, o)) out.insert(label);
    } else {
      out.insert(world::ans::shape(o.shape).label);
    }
  }
  out.erase(ex.answer.label);
  return out;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += "\"\"";
    q += c;
  }
  q += "\"";
  return q;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* kKindTag[world::kQueryKinds] = {"attribute", "count", "existence",
                                            "order", "segment"};

std::string csv_header() {
  std::string h = "config_hash,axis,axis_value,variant,seed,questions";
  for (const char* tag : kKindTag) {
    h += std::string(",correct_") + tag + ",total_" + tag;
  }
  h += ",overall,comm_tokens,comm_scalars,text_decoded_tokens,rejected,"
       "reject_reason,coordinator_seconds,timestamp";
  return h;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    if (std::isalnum(static_cast<unsigned char>(c))) out += c;
  return out.empty() ? std::string("x") : out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << contents;
  if (!f.good()) throw IoError("write failed for " + path);
}

}  // namespace

const std::vector<world::QueryKind>& temporal_kinds() {
  static const std::vector<world::QueryKind> k = {
      world::QueryKind::Count, world::QueryKind::Existence,
      world::QueryKind::TemporalOrder};
  return k;
}

const std::vector<world::QueryKind>& attribute_kinds() {
  static const std::vector<world::QueryKind> k = {
      world::QueryKind::Attribute, world::QueryKind::SegmentAttribute};
  return k;
}

double kind_group_accuracy(const RunRecord& r,
                           const std::vector<world::QueryKind>& kinds) {
  int correct = 0, total = 0;
  for (world::QueryKind k : kinds) {
    const KindTally& t = r.kinds[static_cast<std::size_t>(k)];
    correct += t.correct;
    total += t.total;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

RunRecord tally_answers(
    const std::vector<world::Example>& data,
    const std::function<int(const world::Example&)>& answer) {
  if (data.empty()) throw ContractError("tally_answers: empty dataset");
  RunRecord r;
  r.questions = static_cast<int>(data.size());
  int correct = 0;
  for (const world::Example& ex : data) {
    KindTally& t = r.kinds[static_cast<std::size_t>(ex.query.kind)];
    ++t.total;
    if (answer(ex) == ex.answer.label) {
      ++t.correct;
      ++correct;
    }
  }
  r.overall = static_cast<double>(correct) / r.questions;
  r.timestamp = now_iso();
  return r;
}

RunRecord evaluate(const agents::Checkpoint& ck,
                   const std::vector<world::Example>& data,
                   const budget::ObservationPlan& plan,
                   const budget::PerceptionBudget& per,
                   const budget::CommunicationBudget& com) {
  return eval_core(ck, data, plan, per, com, false).record;
}

RunRecord evaluate_text(const agents::Checkpoint& ck,
                        const std::vector<world::Example>& data,
                        const budget::ObservationPlan& plan,
                        const budget::PerceptionBudget& per,
                        const budget::CommunicationBudget& com) {
  return eval_core(ck, data, plan, per, com, true).record;
}

double caption_exact_match(const agents::Checkpoint& ck,
                           const std::vector<world::Example>& data,
                           int F, int h, int w,
                           const budget::PerceptionBudget& per) {
  if (data.empty()) throw ContractError("caption_exact_match: empty dataset");
  agents::patch_count(ck.model, h, w);
  const world::Query pad = world::pad_query();
  int hits = 0;
  for (const world::Example& ex : data) {
    Tape t;
    t.set_grad_enabled(false);
    Binding P(t, ck.params);
    budget::Observation obs = budget::sample_and_resize(
        ex.video, budget::partition(ex.video, 1)[0], F, h, w, per, 0);
    agents::CommTokens c = agents::encode_local(t, P, ck.model, obs, pad);
    if (agents::greedy_caption(t, P, ck.model, c.values) == ex.caption) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::Agents: return "agents";
    case Axis::Tokens: return "tokens";
    case Axis::Resolution: return "resolution";
  }
  throw ConfigError("axis_name: unknown axis");
}

SweepSpec agent_sweep(const curriculum::TrainConfig& base,
                      std::vector<std::uint64_t> seeds) {
  return SweepSpec{Axis::Agents, {1, 2, 3, 4, 6, 8}, std::move(seeds), base};
}

SweepSpec token_sweep(const curriculum::TrainConfig& base,
                      std::vector<std::uint64_t> seeds) {
  return SweepSpec{Axis::Tokens, {4, 8, 16, 32, 48}, std::move(seeds), base};
}

SweepSpec resolution_sweep(const curriculum::TrainConfig& base,
                           std::vector<std::uint64_t> seeds) {
  return SweepSpec{Axis::Resolution, {8, 12, 16, 24}, std::move(seeds), base};
}

std::vector<RunRecord> run_sweep(const SweepSpec& spec,
                                 const CheckpointProvider& provider,
                                 const std::vector<world::Example>& data) {
  if (spec.values.empty() || spec.seeds.empty()) {
    throw ConfigError("run_sweep: a sweep needs values and seeds");
  }
  std::vector<RunRecord> out;
  out.reserve(spec.values.size() * spec.seeds.size());
  for (int value : spec.values) {
    budget::ObservationPlan plan{spec.base.M_train, spec.base.F, spec.base.h,
                                 spec.base.w, spec.base.model.K};
    switch (spec.axis) {
      case Axis::Agents: plan.M = value; break;
      case Axis::Tokens: plan.K = value; break;
      case Axis::Resolution: plan.h = plan.w = value; break;
    }
    // Resolution curves are drawn per K, so keep the curve label on the
    // record.
    const std::string variant =
        spec.axis == Axis::Resolution ? "K=" + std::to_string(plan.K) : "";

    std::string reject;
    try {
      budget::check_plan(plan, spec.base.per, spec.base.com,
                         world::kMaxQueryTokens);
    } catch (const BudgetExceeded& e) {
      reject = e.what();
    }
    for (std::uint64_t seed : spec.seeds) {
      RunRecord r;
      if (!reject.empty()) {
        r.config_hash = curriculum::config_hash(spec.base);
        r.rejected = true;
        r.reject_reason = reject;
        r.timestamp = now_iso();
      } else {
        const agents::Checkpoint* ck = provider(value, seed);
        if (ck == nullptr) {
          throw ConfigError("run_sweep: no checkpoint for " +
                            std::string(axis_name(spec.axis)) + "=" +
                            std::to_string(value) + " seed " +
                            std::to_string(seed));
        }
        r = evaluate(*ck, data, plan, spec.base.per, spec.base.com);
      }
      r.axis = axis_name(spec.axis);
      r.axis_value = value;
      r.variant = variant;
      r.seed = seed;
      out.push_back(std::move(r));
    }
  }
  return out;
}

ChannelReport compare_channels(const std::vector<agents::Checkpoint>& latent_cks,
                               const std::vector<agents::Checkpoint>& text_cks,
                               const std::vector<world::Example>& data_latent,
                               const std::vector<world::Example>& data_text,
                               const budget::ObservationPlan& plan,
                               const budget::PerceptionBudget& per,
                               const budget::CommunicationBudget& com) {
  if (latent_cks.empty() || latent_cks.size() != text_cks.size()) {
    throw ComparisonError(
        "compare_channels: need one checkpoint per seed on both sides");
  }
  if (data_latent.size() != data_text.size()) {
    throw ComparisonError("compare_channels: datasets differ in size");
  }
  for (std::size_t i = 0; i < data_latent.size(); ++i) {
    if (world::example_to_json(data_latent[i]) !=
        world::example_to_json(data_text[i])) {
      throw ComparisonError("compare_channels: datasets differ at example " +
                            std::to_string(i));
    }
  }
  for (const agents::Checkpoint& ck : latent_cks) {
    if (!(ck.model == latent_cks[0].model))
      throw ComparisonError("compare_channels: latent checkpoints disagree");
  }
  for (const agents::Checkpoint& ck : text_cks) {
    if (!(ck.model == latent_cks[0].model))
      throw ComparisonError(
          "compare_channels: text checkpoints built for a different model");
  }

  const std::vector<world::Example>& data = data_latent;
  ChannelReport rep;
  std::array<std::vector<double>, world::kQueryKinds> lk, tk;
  std::vector<double> lo, to;

  for (std::size_t s = 0; s < latent_cks.size(); ++s) {
    EvalCore lat = eval_core(latent_cks[s], data, plan, per, com, false);
    EvalCore txt = eval_core(text_cks[s], data, plan, per, com, true);
    lat.record.axis = txt.record.axis = "channel";

    for (std::size_t i = 0; i < data.size(); ++i) {
      const world::Example& ex = data[i];
      if (ex.query.kind != world::QueryKind::Attribute) continue;
      const std::set<int> wrong = distractor_labels(ex);
      if (wrong.empty()) continue;
      ++rep.binding.eligible;
      if (wrong.count(lat.predictions[i]) != 0) ++rep.binding.latent;
      if (wrong.count(txt.predictions[i]) != 0) ++rep.binding.text;
    }

    lo.push_back(lat.record.overall);
    to.push_back(txt.record.overall);
    for (int k = 0; k < world::kQueryKinds; ++k) {
      lk[static_cast<std::size_t>(k)].push_back(
          lat.record.kinds[static_cast<std::size_t>(k)].accuracy());
      tk[static_cast<std::size_t>(k)].push_back(
          txt.record.kinds[static_cast<std::size_t>(k)].accuracy());
    }
    rep.latent_tokens += lat.record.comm_tokens;
    rep.text_sent_tokens += txt.record.comm_tokens;
    rep.text_decoded_tokens += txt.record.text_decoded_tokens;
    rep.latent.push_back(std::move(lat.record));
    rep.text.push_back(std::move(txt.record));
  }

  const double ns = static_cast<double>(latent_cks.size());
  rep.latent_tokens /= ns;
  rep.text_sent_tokens /= ns;
  rep.text_decoded_tokens /= ns;
  rep.latent_mean = mean_of(lo);
  rep.text_mean = mean_of(to);
  for (int k = 0; k < world::kQueryKinds; ++k) {
    rep.delta_by_kind[static_cast<std::size_t>(k)] =
        mean_of(lk[static_cast<std::size_t>(k)]) -
        mean_of(tk[static_cast<std::size_t>(k)]);
  }
  const agents::ModelConfig& cfg = latent_cks[0].model;
  rep.state_share_scalars =
      static_cast<double>(plan.M) *
      static_cast<double>(agents::state_share_cost(
          plan.F, agents::patch_count(cfg, plan.h, plan.w), cfg.d_enc));
  return rep;
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v = {
      {"full", true, true, true},
      {"no-stage-1", false, true, true},
      {"no-stage-2", true, false, true},
      {"no-stage-3", true, true, false},
  };
  return v;
}

const AblationReport::Row& AblationReport::row(const std::string& name) const {
  for (const Row& r : rows)
    if (r.name == name) return r;
  throw ConfigError("ablation report has no variant named " + name);
}

bool AblationReport::full_beats_all() const {
  const double full = row("full").mean_overall;
  for (const Row& r : rows)
    if (r.name != "full" && r.mean_overall >= full) return false;
  return true;
}

double AblationReport::drop(const std::string& name) const {
  return row("full").mean_overall - row(name).mean_overall;
}

AblationReport ablate_stages(
    const std::function<const agents::Checkpoint*(const std::string& variant,
                                                  std::uint64_t seed)>& provider,
    const std::vector<std::uint64_t>& seeds,
    const std::vector<world::Example>& data,
    const std::vector<world::Example>& caption_data,
    const budget::ObservationPlan& plan, const budget::PerceptionBudget& per,
    const budget::CommunicationBudget& com) {
  if (seeds.empty()) throw ConfigError("ablate_stages: no seeds");
  AblationReport rep;
  for (const AblationVariant& variant : ablation_variants()) {
    AblationReport::Row row;
    row.name = variant.name;
    std::vector<double> overall, caption;
    std::array<std::vector<double>, world::kQueryKinds> per_kind;
    for (std::uint64_t seed : seeds) {
      const agents::Checkpoint* ck = provider(variant.name, seed);
      if (ck == nullptr) {
        throw ConfigError("ablate_stages: no checkpoint for " + variant.name +
                          " seed " + std::to_string(seed));
      }
      RunRecord r = evaluate(*ck, data, plan, per, com);
      r.axis = "stages";
      r.variant = variant.name;
      r.seed = seed;
      overall.push_back(r.overall);
      for (int k = 0; k < world::kQueryKinds; ++k)
        per_kind[static_cast<std::size_t>(k)].push_back(
            r.kinds[static_cast<std::size_t>(k)].accuracy());
      caption.push_back(
          caption_exact_match(*ck, caption_data, plan.F, plan.h, plan.w, per));
      row.records.push_back(std::move(r));
    }
    row.mean_overall = mean_of(overall);
    row.caption_exact = mean_of(caption);
    for (int k = 0; k < world::kQueryKinds; ++k)
      row.kind_mean[static_cast<std::size_t>(k)] =
          mean_of(per_kind[static_cast<std::size_t>(k)]);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::vector<TrendPoint> trend_series(
    const std::vector<RunRecord>& records, const std::string& axis,
    const std::function<double(const RunRecord&)>& metric,
    const std::string& variant) {
  std::map<double, std::vector<double>> by_value;
  for (const RunRecord& r : records) {
    if (r.axis != axis || r.rejected) continue;
    if (!variant.empty() && r.variant != variant) continue;
    by_value[r.axis_value].push_back(metric(r));
  }
  std::vector<TrendPoint> out;
  out.reserve(by_value.size());
  for (const auto& [x, xs] : by_value) {
    out.push_back(TrendPoint{x, mean_of(xs), stderr_of(xs),
                             static_cast<int>(xs.size())});
  }
  return out;
}

namespace {

const TrendPoint* point_at(const std::vector<TrendPoint>& series, double x) {
  for (const TrendPoint& p : series)
    if (p.x == x) return &p;
  return nullptr;
}

/// Builds a pass/fail verdict comparing two points of a series, or an
/// undecided one when either point is missing or under-seeded.
Verdict two_point_verdict(const std::string& name,
                          const std::vector<TrendPoint>& series, double xa,
                          double xb,
                          const std::function<bool(double, double)>& ok,
                          const std::string& relation) {
  Verdict v;
  v.name = name;
  const TrendPoint* a = point_at(series, xa);
  const TrendPoint* b = point_at(series, xb);
  if (a == nullptr || b == nullptr || a->n < kVerdictSeeds ||
      b->n < kVerdictSeeds) {
    v.detail = "needs both points with >= " + std::to_string(kVerdictSeeds) +
               " seeds";
    return v;
  }
  v.decided = true;
  v.pass = ok(a->mean, b->mean);
  std::ostringstream os;
  os << "mean(" << xa << ")=" << a->mean << ", mean(" << xb << ")=" << b->mean
     << "; requires " << relation;
  v.detail = os.str();
  return v;
}

double plateau(const std::vector<TrendPoint>& series) {
  double best = 0.0;
  for (const TrendPoint& p : series) best = std::max(best, p.mean);
  return best;
}

bool all_points_seeded(const std::vector<TrendPoint>& series) {
  if (series.empty()) return false;
  for (const TrendPoint& p : series)
    if (p.n < kVerdictSeeds) return false;
  return true;
}

}  // namespace

std::vector<Verdict> trend_verdicts(const std::vector<RunRecord>& records,
                                    const std::optional<ChannelReport>& channels,
                                    const std::optional<AblationReport>& ablation) {
  std::vector<Verdict> out;
  const auto overall = [](const RunRecord& r) { return r.overall; };
  const auto temporal = [](const RunRecord& r) {
    return kind_group_accuracy(r, temporal_kinds());
  };
  const auto attribute = [](const RunRecord& r) {
    return kind_group_accuracy(r, attribute_kinds());
  };

  {
    auto s = trend_series(records, "agents", temporal);
    out.push_back(two_point_verdict(
        "agents-gain", s, 1, 4,
        [](double a1, double a4) { return a4 >= a1 + kAgentGainMargin; },
        "mean(4) >= mean(1) + 0.05 on temporal kinds"));
  }
  {
    auto s = trend_series(records, "agents", overall);
    out.push_back(two_point_verdict(
        "agents-scaling", s, 4, 6,
        [](double a4, double a6) { return a6 >= a4 - kAgentScaleTolerance; },
        "mean(6) >= mean(4) - 0.01"));
  }
  {
    auto s = trend_series(records, "tokens", overall);
    out.push_back(two_point_verdict(
        "tokens-gap", s, 16, 32,
        [](double a16, double a32) { return a32 >= a16 + kTokenGapMargin; },
        "mean(32) >= mean(16) + 0.02"));
    out.push_back(two_point_verdict(
        "tokens-saturation", s, 32, 48, [](double a32, double a48) {
          return std::abs(a48 - a32) <= kTokenSaturationBand;
        },
        "|mean(48) - mean(32)| <= 0.02"));
  }
  {
    // The main resolution curve is the one at the base K; judged on
    // attribute kinds where pixels matter most.
    std::string main_variant;
    for (const RunRecord& r : records) {
      if (r.axis == "resolution" && r.variant.rfind("K=", 0) == 0) {
        if (main_variant.empty() || r.variant < main_variant)
          main_variant = r.variant;
      }
    }
    auto s = trend_series(records, "resolution", attribute, main_variant);
    out.push_back(two_point_verdict(
        "resolution-monotone", s, 8, 16,
        [](double a8, double a16) { return a16 >= a8 - kResolutionTolerance; },
        "mean(16) >= mean(8) - 0.01 on attribute kinds"));

    Verdict ceiling;
    ceiling.name = "resolution-ceiling";
    std::set<std::string> variants;
    for (const RunRecord& r : records)
      if (r.axis == "resolution" && !r.variant.empty())
        variants.insert(r.variant);
    if (variants.size() == 2) {
      const std::string lo = *variants.begin();
      const std::string hi = *std::next(variants.begin());
      auto slo = trend_series(records, "resolution", overall, lo);
      auto shi = trend_series(records, "resolution", overall, hi);
      if (all_points_seeded(slo) && all_points_seeded(shi)) {
        ceiling.decided = true;
        ceiling.pass = plateau(shi) >= plateau(slo);
        std::ostringstream os;
        os << hi << " plateau " << plateau(shi) << " vs " << lo << " plateau "
           << plateau(slo) << "; requires the larger K to plateau at least as high";
        ceiling.detail = os.str();
      }
    }
    if (!ceiling.decided)
      ceiling.detail = "needs two resolution curves with >= " +
                       std::to_string(kVerdictSeeds) + " seeds everywhere";
    out.push_back(ceiling);
  }

  {
    Verdict margin, cost;
    margin.name = "channel-margin";
    cost.name = "channel-cost-ordering";
    if (channels && static_cast<int>(channels->latent.size()) >= kVerdictSeeds) {
      margin.decided = cost.decided = true;
      margin.pass = channels->latent_mean >= channels->text_mean + kChannelMargin;
      cost.pass = channels->cost_ordering_ok();
      std::ostringstream mo;
      mo << "latent " << channels->latent_mean << " vs text "
         << channels->text_mean << "; requires a 0.05 margin";
      margin.detail = mo.str();
      std::ostringstream co;
      co << "latent tokens " << channels->latent_tokens << " < text decoded "
         << channels->text_decoded_tokens << " < state-share scalars "
         << channels->state_share_scalars;
      cost.detail = co.str();
    } else {
      margin.detail = cost.detail =
          "needs a channel comparison over >= " +
          std::to_string(kVerdictSeeds) + " seeds";
    }
    out.push_back(margin);
    out.push_back(cost);
  }

  {
    Verdict best, severity;
    best.name = "ablation-full-best";
    severity.name = "ablation-severity";
    if (ablation && !ablation->rows.empty() &&
        static_cast<int>(ablation->rows[0].records.size()) >= kVerdictSeeds) {
      best.decided = severity.decided = true;
      best.pass = ablation->full_beats_all();
      const double d1 = ablation->drop("no-stage-1");
      const double d2 = ablation->drop("no-stage-2");
      const double d3 = ablation->drop("no-stage-3");
      severity.pass = d1 >= d2 && d3 >= d2;
      std::ostringstream bo;
      bo << "full " << ablation->row("full").mean_overall << " vs drops "
         << d1 << "/" << d2 << "/" << d3;
      best.detail = bo.str();
      severity.detail =
          "drops no-1 " + fmt_double(d1) + ", no-2 " + fmt_double(d2) +
          ", no-3 " + fmt_double(d3) +
          "; requires stages 1 and 3 to matter at least as much as stage 2";
    } else {
      best.detail = severity.detail =
          "needs ablation runs over >= " + std::to_string(kVerdictSeeds) +
          " seeds";
    }
    out.push_back(best);
    out.push_back(severity);
  }
  return out;
}

std::string run_records_csv(const std::vector<RunRecord>& records) {
  std::string out = csv_header();
  out += "\n";
  for (const RunRecord& r : records) {
    out += csv_quote(r.config_hash) + "," + csv_quote(r.axis) + "," +
           fmt_double(r.axis_value) + "," + csv_quote(r.variant) + "," +
           std::to_string(r.seed) + "," + std::to_string(r.questions);
    for (const KindTally& t : r.kinds) {
      out += "," + std::to_string(t.correct) + "," + std::to_string(t.total);
    }
    out += "," + fmt_double(r.overall) + "," + fmt_double(r.comm_tokens) +
           "," + fmt_double(r.comm_scalars) + "," +
           fmt_double(r.text_decoded_tokens) + "," +
           (r.rejected ? "1" : "0") + "," + csv_quote(r.reject_reason) + "," +
           fmt_double(r.coordinator_seconds) + "," + csv_quote(r.timestamp);
    out += "\n";
  }
  return out;
}

std::vector<RunRecord> parse_run_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw DatasetError("run-record csv: header does not match the schema");
  }
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = csv_split(line);
    const std::size_t expected = 14 + 2 * world::kQueryKinds;
    if (cells.size() != expected) {
      throw DatasetError("run-record csv: row " +
                         std::to_string(out.size() + 1) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(expected));
    }
    RunRecord r;
    std::size_t i = 0;
    r.config_hash = cells[i++];
    r.axis = cells[i++];
    r.axis_value = std::stod(cells[i++]);
    r.variant = cells[i++];
    r.seed = std::stoull(cells[i++]);
    r.questions = std::stoi(cells[i++]);
    for (KindTally& t : r.kinds) {
      t.correct = std::stoi(cells[i++]);
      t.total = std::stoi(cells[i++]);
    }
    r.overall = std::stod(cells[i++]);
    r.comm_tokens = std::stod(cells[i++]);
    r.comm_scalars = std::stod(cells[i++]);
    r.text_decoded_tokens = std::stod(cells[i++]);
    r.rejected = cells[i++] == "1";
    r.reject_reason = cells[i++];
    r.coordinator_seconds = std::stod(cells[i++]);
    r.timestamp = cells[i++];
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json summary_json(const ReportBundle& bundle) {
  if (bundle.records.empty() && !bundle.channels && !bundle.ablation) {
    throw ContractError("summary_json: nothing to report");
  }
  json j;
  j["records"] = bundle.records.size();

  json axes = json::object();
  std::set<std::pair<std::string, std::string>> groups;
  for (const RunRecord& r : bundle.records)
    groups.insert({r.axis, r.variant});
  for (const auto& [axis, variant] : groups) {
    auto s = trend_series(bundle.records, axis,
                          [](const RunRecord& r) { return r.overall; }, variant);
    if (s.empty()) continue;
    json pts = json::array();
    for (const TrendPoint& p : s) {
      pts.push_back(
          {{"x", p.x}, {"mean", p.mean}, {"stderr", p.stderr_}, {"n", p.n}});
    }
    const std::string key = variant.empty() ? axis : axis + "/" + variant;
    axes[key] = pts;
  }
  j["series"] = axes;

  json verdicts = json::array();
  for (const Verdict& v :
       trend_verdicts(bundle.records, bundle.channels, bundle.ablation)) {
    verdicts.push_back({{"name", v.name},
                        {"decided", v.decided},
                        {"pass", v.pass},
                        {"detail", v.detail}});
  }
  j["verdicts"] = verdicts;

  if (bundle.channels) {
    const ChannelReport& c = *bundle.channels;
    j["channels"] = {
        {"latent_mean", c.latent_mean},
        {"text_mean", c.text_mean},
        {"latent_tokens", c.latent_tokens},
        {"text_sent_tokens", c.text_sent_tokens},
        {"text_decoded_tokens", c.text_decoded_tokens},
        {"state_share_scalars", c.state_share_scalars},
        {"binding",
         {{"eligible", c.binding.eligible},
          {"latent", c.binding.latent},
          {"text", c.binding.text}}},
    };
  }
  if (bundle.ablation) {
    json rows = json::array();
    for (const AblationReport::Row& r : bundle.ablation->rows) {
      json kinds = json::object();
      for (int k = 0; k < world::kQueryKinds; ++k)
        kinds[kKindTag[k]] = r.kind_mean[static_cast<std::size_t>(k)];
      rows.push_back({{"name", r.name},
                      {"mean_overall", r.mean_overall},
                      {"caption_exact", r.caption_exact},
                      {"kinds", kinds}});
    }
    j["ablation"] = rows;
  }

  // Wall-clock content is quarantined under two keys so determinism checks
  // can drop them and compare the rest byte for byte.
  double mean_latency = 0.0;
  int timed = 0;
  for (const RunRecord& r : bundle.records) {
    if (!r.rejected) {
      mean_latency += r.coordinator_seconds;
      ++timed;
    }
  }
  j["timing"] = {{"mean_coordinator_seconds",
                  timed == 0 ? 0.0 : mean_latency / timed}};
  j["generated_at"] = now_iso();
  return j;
}

void emit_report(const ReportBundle& bundle, const std::string& out_dir) {
  if (bundle.records.empty() && !bundle.channels && !bundle.ablation) {
    throw ContractError("emit_report: refusing to write an empty report");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  std::vector<RunRecord> all = bundle.records;
  if (bundle.channels) {
    all.insert(all.end(), bundle.channels->latent.begin(),
               bundle.channels->latent.end());
    all.insert(all.end(), bundle.channels->text.begin(),
               bundle.channels->text.end());
  }
  if (bundle.ablation) {
    for (const AblationReport::Row& row : bundle.ablation->rows)
      all.insert(all.end(), row.records.begin(), row.records.end());
  }
  write_file(out_dir + "/records.csv", run_records_csv(all));
  write_file(out_dir + "/summary.json", summary_json(bundle).dump(2) + "\n");

  std::set<std::pair<std::string, std::string>> groups;
  for (const RunRecord& r : bundle.records)
    if (!r.rejected) groups.insert({r.axis, r.variant});
  for (const auto& [axis, variant] : groups) {
    auto s = trend_series(bundle.records, axis,
                          [](const RunRecord& r) { return r.overall; }, variant);
    std::string csv = "x,mean,stderr,n\n";
    for (const TrendPoint& p : s) {
      csv += fmt_double(p.x) + "," + fmt_double(p.mean) + "," +
             fmt_double(p.stderr_) + "," + std::to_string(p.n) + "\n";
    }
    const std::string name =
        variant.empty() ? axis : axis + "_" + sanitize(variant);
    write_file(out_dir + "/series_" + name + ".csv", csv);
  }
}

}  // namespace relay::bench
