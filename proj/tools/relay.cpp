// Experiment runner: dataset generation, curriculum training, evaluation,
// budget sweeps, channel comparisons, stage ablations, and report emission.
//
// Every verb reads one JSON config file (--config) and writes its artifacts
// under --out/<config-hash>/, so reruns with the same settings land in the
// same place and different settings never collide. The only environment
// variable honoured is RELAY_THREADS (sweep parallelism).
//
// Config keys by verb:
//   gen-data          "data": {name: dataset spec, ...}
//   train             "train": TrainConfig, optional "data" fallback specs
//   eval              "eval": {checkpoint, data, text?}, "plan"
//   sweep             "sweep": {axis, values, seeds, checkpoint, data},
//                     "train" (the base config)
//   compare-channels  "channels": {latent: [...], text: [...], data}, "plan"
//   ablate            "ablation": {checkpoint, seeds, data, caption_data},
//                     "plan"
//   report            "report": {records: [records.csv, ...]}
//
// Dataset spec keys: T, H, W, mix {difficulty: weight}, kinds [names],
// n, split, seed. Plan keys: M, F, h, w, K. Checkpoint path patterns may
// use {axis}, {value}, {seed}, {variant} placeholders.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "relay/agents/checkpoint.hpp"
#include "relay/bench/bench.hpp"
#include "relay/curriculum/train.hpp"
#include "relay/errors.hpp"
#include "relay/numcore/rng.hpp"
#include "relay/worldgen/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relay;

namespace {

json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

const json& need(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string("config is missing \"") + key + "\" (" +
                      where + ")");
  }
  return j.at(key);
}

std::string json_hash16(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(num::Rng::fnv1a(j.dump())));
  return buf;
}

/// <out>/<hash>/, created on demand.
std::string run_dir(const std::string& out, const std::string& hash) {
  const fs::path dir = fs::path(out) / hash;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir.string();
}

world::DatasetSpec dataset_spec_from_json(const json& j) {
  world::DatasetSpec s;
  s.gen.T = j.value("T", s.gen.T);
  s.gen.H = j.value("H", s.gen.H);
  s.gen.W = j.value("W", s.gen.W);
  if (j.contains("mix")) {
    s.mix.clear();
    for (const auto& [name, weight] : j.at("mix").items()) {
      s.mix.push_back({world::difficulty_from_name(name), weight.get<double>()});
    }
  }
  if (j.contains("kinds")) {
    for (const json& k : j.at("kinds")) {
      s.kinds.push_back(world::query_kind_from_name(k.get<std::string>()));
    }
  }
  s.n = j.value("n", s.n);
  s.split = j.value("split", s.split);
  s.seed = j.value("seed", s.seed);
  return s;
}

budget::ObservationPlan plan_from_json(const json& j) {
  budget::ObservationPlan p;
  p.M = j.value("M", p.M);
  p.F = j.value("F", p.F);
  p.h = j.value("h", p.h);
  p.w = j.value("w", p.w);
  p.K = j.value("K", p.K);
  return p;
}

std::string expand(std::string s,
                   std::initializer_list<std::pair<const char*, std::string>>
                       vars) {
  for (const auto& [key, value] : vars) {
    const std::string tag = std::string("{") + key + "}";
    for (std::size_t p = s.find(tag); p != std::string::npos;
         p = s.find(tag, p + value.size())) {
      s.replace(p, tag.size(), value);
    }
  }
  return s;
}

int thread_count() {
  const char* env = std::getenv("RELAY_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  if (n < 1) throw ConfigError("RELAY_THREADS must be a positive integer");
  return n;
}

void print_record(const bench::RunRecord& r) {
  if (r.rejected) {
    std::printf("%-10s %6g  seed %llu  rejected: %s\n", r.axis.c_str(),
                r.axis_value, static_cast<unsigned long long>(r.seed),
                r.reject_reason.c_str());
    return;
  }
  std::printf(
      "%-10s %6g  seed %llu  acc %.4f  tokens %.0f  scalars %.0f  %.2f ms\n",
      r.axis.c_str(), r.axis_value, static_cast<unsigned long long>(r.seed),
      r.overall, r.comm_tokens, r.comm_scalars,
      1e3 * r.coordinator_seconds);
}

void print_verdicts(const std::vector<bench::Verdict>& vs) {
  for (const bench::Verdict& v : vs) {
    std::printf("%-22s %s  %s\n", v.name.c_str(),
                !v.decided ? "UNDECIDED" : (v.pass ? "PASS" : "FAIL"),
                v.detail.c_str());
  }
}

// ---- verbs -----------------------------------------------------------------

int cmd_gen_data(const json& cfg, const std::string& out,
                 std::optional<std::uint64_t> seed) {
  const json& specs = need(cfg, "data", "gen-data needs dataset specs");
  const std::string dir = run_dir(out, json_hash16(specs));
  for (const auto& [name, spec_json] : specs.items()) {
    world::DatasetSpec spec = dataset_spec_from_json(spec_json);
    if (seed) spec.seed = *seed;
    const std::vector<world::Example> data = world::make_dataset(spec);
    const std::string path = dir + "/" + name + ".jsonl";
    world::write_jsonl(path, data);
    std::printf("%s: %zu examples\n", path.c_str(), data.size());
  }
  world::write_vocab_json(dir + "/vocab_query.json", world::query_vocab());
  world::write_vocab_json(dir + "/vocab_answer.json", world::answer_vocab());
  world::write_vocab_json(dir + "/vocab_caption.json", world::caption_vocab());
  return 0;
}

int cmd_train(const json& cfg, const std::string& out,
              std::optional<std::uint64_t> seed,
              std::optional<int> stage_flags) {
  curriculum::TrainConfig tc =
      curriculum::train_config_from_json(need(cfg, "train", "train verb"));
  if (seed) tc.seed = *seed;
  if (stage_flags) {
    if (*stage_flags < 0 || *stage_flags > 7) {
      throw ConfigError("--stage-flags is a 3-bit mask, got " +
                        std::to_string(*stage_flags));
    }
    tc.stage1.enabled = (*stage_flags & 1) != 0;
    tc.stage2.enabled = (*stage_flags & 2) != 0;
    tc.stage3.enabled = (*stage_flags & 4) != 0;
  }

  // Stages pull their data from the configured JSONL paths; stages without
  // a path fall back to an inline dataset spec under "data".
  const bool all_paths =
      (!tc.stage1.enabled || !tc.data_stage1.empty()) &&
      (!tc.stage2.enabled || !tc.data_stage2.empty()) &&
      (!tc.stage3.enabled || !tc.data_stage3.empty());
  curriculum::CurriculumResult res;
  if (all_paths) {
    res = curriculum::run_curriculum(tc);
  } else {
    std::vector<std::vector<world::Example>> data(3);
    const std::string* paths[3] = {&tc.data_stage1, &tc.data_stage2,
                                   &tc.data_stage3};
    const bool enabled[3] = {tc.stage1.enabled, tc.stage2.enabled,
                             tc.stage3.enabled};
    for (int k = 0; k < 3; ++k) {
      if (!enabled[k]) continue;
      const std::string key = "stage" + std::to_string(k + 1);
      if (!paths[k]->empty()) {
        data[static_cast<std::size_t>(k)] = world::read_jsonl(*paths[k]);
      } else {
        world::DatasetSpec spec = dataset_spec_from_json(
            need(need(cfg, "data", "inline stage data"), key.c_str(),
                 "inline stage data"));
        if (seed) spec.seed = *seed;
        data[static_cast<std::size_t>(k)] = world::make_dataset(spec);
      }
    }
    res = curriculum::run_curriculum(tc, data);
  }

  const std::string dir = run_dir(out, curriculum::config_hash(tc));
  agents::save_checkpoint(dir + "/checkpoint.rly", res.checkpoint);
  json reports = json::array();
  for (const curriculum::StageReport& r : res.reports) {
    reports.push_back({{"stage", r.stage},
                       {"steps", r.steps},
                       {"final_loss", r.final_loss}});
    std::printf("stage %d: %d steps, final loss %.4f\n", r.stage, r.steps,
                r.final_loss);
  }
  std::ofstream f(dir + "/train_report.json");
  if (!f) throw IoError("cannot write " + dir + "/train_report.json");
  f << json{{"config", curriculum::train_config_to_json(tc)},
            {"stages", reports}}
           .dump(2)
    << "\n";
  std::printf("checkpoint: %s/checkpoint.rly\n", dir.c_str());
  return 0;
}

int cmd_eval(const json& cfg, const std::string& out) {
  const json& section = need(cfg, "eval", "eval verb");
  const agents::Checkpoint ck = agents::load_checkpoint(
      need(section, "checkpoint", "eval").get<std::string>());
  const std::vector<world::Example> data =
      world::read_jsonl(need(section, "data", "eval").get<std::string>());
  const budget::ObservationPlan plan =
      plan_from_json(need(cfg, "plan", "eval verb"));

  const bench::RunRecord r =
      section.value("text", false)
          ? bench::evaluate_text(ck, data, plan)
          : bench::evaluate(ck, data, plan);
  print_record(r);
  for (int k = 0; k < world::kQueryKinds; ++k) {
    const bench::KindTally& t = r.kinds[static_cast<std::size_t>(k)];
    if (t.total > 0) {
      std::printf("  %-18s %4d/%-4d  %.4f\n",
                  world::query_kind_name(static_cast<world::QueryKind>(k)),
                  t.correct, t.total, t.accuracy());
    }
  }
  bench::emit_report({{r}, std::nullopt, std::nullopt},
                     run_dir(out, r.config_hash));
  return 0;
}

int cmd_sweep(const json& cfg, const std::string& out,
              std::optional<std::uint64_t> seed, const std::string& axis_flag,
              const std::vector<int>& values_flag) {
  const json& section = need(cfg, "sweep", "sweep verb");
  bench::SweepSpec spec;
  spec.base =
      curriculum::train_config_from_json(need(cfg, "train", "sweep base"));

  const std::string axis =
      !axis_flag.empty() ? axis_flag
                         : need(section, "axis", "sweep").get<std::string>();
  if (axis == "agents") spec.axis = bench::Axis::Agents;
  else if (axis == "tokens") spec.axis = bench::Axis::Tokens;
  else if (axis == "resolution") spec.axis = bench::Axis::Resolution;
  else throw ConfigError("unknown sweep axis '" + axis + "'");

  spec.values = !values_flag.empty()
                    ? values_flag
                    : need(section, "values", "sweep").get<std::vector<int>>();
  if (seed) spec.seeds = {*seed};
  else spec.seeds = need(section, "seeds", "sweep")
                        .get<std::vector<std::uint64_t>>();

  const std::vector<world::Example> data =
      world::read_jsonl(need(section, "data", "sweep").get<std::string>());
  const std::string pattern =
      need(section, "checkpoint", "sweep").get<std::string>();

  // Load every in-budget point's checkpoint up front; evaluation threads
  // then only ever read.
  std::map<std::string, agents::Checkpoint> cache;
  const auto path_for = [&](int value, std::uint64_t s) {
    return expand(pattern, {{"axis", axis},
                            {"value", std::to_string(value)},
                            {"seed", std::to_string(s)}});
  };
  for (int value : spec.values) {
    budget::ObservationPlan plan{spec.base.M_train, spec.base.F, spec.base.h,
                                 spec.base.w, spec.base.model.K};
    if (spec.axis == bench::Axis::Agents) plan.M = value;
    if (spec.axis == bench::Axis::Tokens) plan.K = value;
    if (spec.axis == bench::Axis::Resolution) plan.h = plan.w = value;
    try {
      budget::check_plan(plan, spec.base.per, spec.base.com,
                         world::kMaxQueryTokens);
    } catch (const BudgetExceeded&) {
      continue;  // run_sweep records the rejection; no checkpoint needed
    }
    for (std::uint64_t s : spec.seeds) {
      const std::string path = path_for(value, s);
      if (!cache.count(path)) cache.emplace(path, agents::load_checkpoint(path));
    }
  }
  const bench::CheckpointProvider provider =
      [&](int value, std::uint64_t s) -> const agents::Checkpoint* {
    const auto it = cache.find(path_for(value, s));
    return it == cache.end() ? nullptr : &it->second;
  };

  // One task per grid value, pulled by a fixed-size pool. Records land in
  // per-value slots, so the merged order never depends on scheduling.
  std::vector<std::vector<bench::RunRecord>> slots(spec.values.size());
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto worker = [&] {
    for (std::size_t i; (i = cursor.fetch_add(1)) < spec.values.size();) {
      try {
        bench::SweepSpec one = spec;
        one.values = {spec.values[i]};
        slots[i] = bench::run_sweep(one, provider, data);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads =
      std::min<int>(thread_count(), static_cast<int>(spec.values.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<bench::RunRecord> records;
  for (std::vector<bench::RunRecord>& slot : slots) {
    records.insert(records.end(), slot.begin(), slot.end());
  }
  for (const bench::RunRecord& r : records) print_record(r);

  const std::string dir =
      run_dir(out, curriculum::config_hash(spec.base)) + "/" + axis;
  bench::emit_report({records, std::nullopt, std::nullopt}, dir);
  print_verdicts(bench::trend_verdicts(records, std::nullopt, std::nullopt));
  std::printf("report: %s\n", dir.c_str());
  return 0;
}

int cmd_compare_channels(const json& cfg, const std::string& out) {
  const json& section = need(cfg, "channels", "compare-channels verb");
  const budget::ObservationPlan plan =
      plan_from_json(need(cfg, "plan", "compare-channels verb"));
  std::vector<agents::Checkpoint> latent, text;
  for (const json& p : need(section, "latent", "compare-channels"))
    latent.push_back(agents::load_checkpoint(p.get<std::string>()));
  for (const json& p : need(section, "text", "compare-channels"))
    text.push_back(agents::load_checkpoint(p.get<std::string>()));
  const std::vector<world::Example> data = world::read_jsonl(
      need(section, "data", "compare-channels").get<std::string>());

  const bench::ChannelReport rep =
      bench::compare_channels(latent, text, data, data, plan);
  std::printf("latent %.4f vs text %.4f (delta %+.4f)\n", rep.latent_mean,
              rep.text_mean, rep.delta_overall());
  std::printf("cost: latent %.0f tokens < text %.0f decoded (%.0f sent) < "
              "state-share %.0f scalars: %s\n",
              rep.latent_tokens, rep.text_decoded_tokens, rep.text_sent_tokens,
              rep.state_share_scalars,
              rep.cost_ordering_ok() ? "ordering holds" : "ORDERING BROKEN");
  std::printf("binding errors: latent %d/%d, text %d/%d\n", rep.binding.latent,
              rep.binding.eligible, rep.binding.text, rep.binding.eligible);

  const std::string dir = run_dir(out, json_hash16(section)) + "/channels";
  bench::emit_report({{}, rep, std::nullopt}, dir);
  std::printf("report: %s\n", dir.c_str());
  return 0;
}

int cmd_ablate(const json& cfg, const std::string& out) {
  const json& section = need(cfg, "ablation", "ablate verb");
  const budget::ObservationPlan plan =
      plan_from_json(need(cfg, "plan", "ablate verb"));
  const std::string pattern =
      need(section, "checkpoint", "ablate").get<std::string>();
  const std::vector<std::uint64_t> seeds =
      need(section, "seeds", "ablate").get<std::vector<std::uint64_t>>();
  const std::vector<world::Example> data =
      world::read_jsonl(need(section, "data", "ablate").get<std::string>());
  const std::vector<world::Example> captions = world::read_jsonl(
      need(section, "caption_data", "ablate").get<std::string>());

  std::map<std::string, agents::Checkpoint> cache;
  for (const bench::AblationVariant& v : bench::ablation_variants()) {
    for (std::uint64_t s : seeds) {
      const std::string path = expand(
          pattern, {{"variant", v.name}, {"seed", std::to_string(s)}});
      if (!cache.count(path)) cache.emplace(path, agents::load_checkpoint(path));
    }
  }
  const bench::AblationReport rep = bench::ablate_stages(
      [&](const std::string& variant,
          std::uint64_t s) -> const agents::Checkpoint* {
        const auto it = cache.find(expand(
            pattern, {{"variant", variant}, {"seed", std::to_string(s)}}));
        return it == cache.end() ? nullptr : &it->second;
      },
      seeds, data, captions, plan);

  for (const bench::AblationReport::Row& row : rep.rows) {
    std::printf("%-12s acc %.4f  caption %.4f  drop %+.4f\n", row.name.c_str(),
                row.mean_overall, row.caption_exact, rep.drop(row.name));
  }
  const std::string dir = run_dir(out, json_hash16(section)) + "/ablation";
  bench::emit_report({{}, std::nullopt, rep}, dir);
  std::printf("report: %s\n", dir.c_str());
  return 0;
}

int cmd_report(const json& cfg, const std::string& out) {
  const json& section = need(cfg, "report", "report verb");
  std::vector<bench::RunRecord> records;
  for (const json& p : need(section, "records", "report")) {
    const std::string path = p.get<std::string>();
    std::ifstream f(path);
    if (!f) throw IoError("cannot read records " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    std::vector<bench::RunRecord> rs = bench::parse_run_records_csv(buf.str());
    records.insert(records.end(), rs.begin(), rs.end());
  }
  const std::string dir = run_dir(out, json_hash16(section)) + "/report";
  bench::emit_report({records, std::nullopt, std::nullopt}, dir);
  print_verdicts(bench::trend_verdicts(records, std::nullopt, std::nullopt));
  std::printf("report: %s (%zu records)\n", dir.c_str(), records.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Budget-constrained multi-agent video QA: experiments and reports"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis;
  std::optional<std::uint64_t> seed;
  std::optional<int> stage_flags;
  std::vector<int> values;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    return sub;
  };
  CLI::App* gen = add_common(
      app.add_subcommand("gen-data", "generate datasets from specs"));
  gen->add_option("--seed", seed, "override every dataset spec's seed");
  CLI::App* train =
      add_common(app.add_subcommand("train", "run the training curriculum"));
  train->add_option("--seed", seed, "override the training seed");
  train->add_option("--stage-flags", stage_flags,
                    "bitmask of enabled stages (1|2|4)");
  add_common(app.add_subcommand("eval", "evaluate a checkpoint"));
  CLI::App* sweep =
      add_common(app.add_subcommand("sweep", "walk one experiment axis"));
  sweep->add_option("--seed", seed, "run a single seed instead of the list");
  sweep->add_option("--axis", axis, "agents | tokens | resolution");
  sweep->add_option("--values", values, "grid values")->delimiter(',');
  add_common(app.add_subcommand("compare-channels",
                                "latent vs text channel comparison"));
  add_common(app.add_subcommand("ablate", "curriculum stage ablations"));
  add_common(
      app.add_subcommand("report", "re-emit reports from records.csv files"));

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(config_path);
    const CLI::App* sub = app.get_subcommands().front();
    const std::string verb = sub->get_name();
    if (verb == "gen-data") return cmd_gen_data(cfg, out_dir, seed);
    if (verb == "train") return cmd_train(cfg, out_dir, seed, stage_flags);
    if (verb == "eval") return cmd_eval(cfg, out_dir);
    if (verb == "sweep") return cmd_sweep(cfg, out_dir, seed, axis, values);
    if (verb == "compare-channels") return cmd_compare_channels(cfg, out_dir);
    if (verb == "ablate") return cmd_ablate(cfg, out_dir);
    if (verb == "report") return cmd_report(cfg, out_dir);
    throw ConfigError("unhandled verb " + verb);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
