#include "relay/worldgen/dataset.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace relay::world {

namespace {

using nlohmann::json;

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Appear: return "appear";
    case EventKind::Vanish: return "vanish";
    case EventKind::Recolor: return "recolor";
  }
  throw ContractError("event_kind_name: bad kind");
}

EventKind event_kind_from_name(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    const auto k = static_cast<EventKind>(i);
    if (s == event_kind_name(k)) return k;
  }
  throw DatasetError("unknown event kind '" + s + "'");
}

Shape shape_from_name(const std::string& s) {
  for (int i = 0; i < kShapeCount; ++i) {
    const auto v = static_cast<Shape>(i);
    if (s == shape_name(v)) return v;
  }
  throw DatasetError("unknown shape '" + s + "'");
}

Color color_from_name(const std::string& s) {
  for (int i = 0; i < kColorCount; ++i) {
    const auto v = static_cast<Color>(i);
    if (s == color_name(v)) return v;
  }
  throw DatasetError("unknown color '" + s + "'");
}

json video_to_json(const SymbolicVideo& v) {
  json objects = json::array();
  for (const SymbolicObject& o : v.objects) {
    objects.push_back(json{{"id", o.id},
                           {"shape", shape_name(o.shape)},
                           {"color", color_name(o.color)},
                           {"row", o.row},
                           {"col", o.col},
                           {"size", o.size},
                           {"first", o.first_frame},
                           {"last", o.last_frame}});
  }
  json events = json::array();
  for (const Event& e : v.events) {
    events.push_back(json{{"frame", e.frame},
                          {"kind", event_kind_name(e.kind)},
                          {"object", e.object_id},
                          {"payload", e.payload}});
  }
  return json{{"T", v.T}, {"H", v.H}, {"W", v.W},
              {"objects", std::move(objects)}, {"events", std::move(events)}};
}

SymbolicVideo video_from_json(const json& j) {
  SymbolicVideo v;
  v.T = j.at("T").get<int>();
  v.H = j.at("H").get<int>();
  v.W = j.at("W").get<int>();
  for (const json& jo : j.at("objects")) {
    SymbolicObject o;
    o.id = jo.at("id").get<int>();
    o.shape = shape_from_name(jo.at("shape").get<std::string>());
    o.color = color_from_name(jo.at("color").get<std::string>());
    o.row = jo.at("row").get<int>();
    o.col = jo.at("col").get<int>();
    o.size = jo.at("size").get<int>();
    o.first_frame = jo.at("first").get<int>();
    o.last_frame = jo.at("last").get<int>();
    v.objects.push_back(o);
  }
  for (const json& je : j.at("events")) {
    Event e;
    e.frame = je.at("frame").get<int>();
    e.kind = event_kind_from_name(je.at("kind").get<std::string>());
    e.object_id = je.at("object").get<int>();
    e.payload = je.at("payload").get<int>();
    v.events.push_back(e);
  }
  return v;
}

Difficulty draw_difficulty(num::Rng& rng, const DifficultyMix& mix,
                           int need_objects) {
  double total = 0.0;
  for (const auto& [d, w] : mix) {
    if (difficulty_profile(d).max_objects >= need_objects) total += w;
  }
  if (total <= 0.0) {
    throw ConfigError(
        "difficulty mix has no entry that can host " +
        std::to_string(need_objects) + " objects");
  }
  double x = rng.uniform() * total;
  Difficulty last = mix.front().first;
  for (const auto& [d, w] : mix) {
    if (difficulty_profile(d).max_objects < need_objects) continue;
    last = d;
    x -= w;
    if (x < 0.0) return d;
  }
  return last;
}

}  // namespace

std::vector<QueryKind> default_kinds(int T) {
  if (T >= kTimeBuckets) {
    return {QueryKind::Attribute, QueryKind::Count, QueryKind::Existence,
            QueryKind::TemporalOrder, QueryKind::SegmentAttribute};
  }
  return {QueryKind::Attribute, QueryKind::Count, QueryKind::Existence};
}

std::vector<Example> make_dataset(const DatasetSpec& spec) {
  if (spec.n < 1) throw ConfigError("make_dataset: n < 1");
  if (spec.mix.empty()) throw ConfigError("make_dataset: empty difficulty mix");
  for (const auto& [d, w] : spec.mix) {
    if (w < 0.0) throw ConfigError("make_dataset: negative mix weight");
  }
  const std::vector<QueryKind> kinds =
      spec.kinds.empty() ? default_kinds(spec.gen.T) : spec.kinds;
  if (kinds.empty()) throw ConfigError("make_dataset: no query kinds");

  // Counting answers cannot exceed the largest object count in the mix, so
  // the label is fixed first and a difficulty able to host it drawn second.
  // Everything else draws difficulty freely.
  int max_count = 0;
  for (const auto& [d, w] : spec.mix) {
    max_count = std::max(max_count, difficulty_profile(d).max_objects);
  }

  const num::Rng base = num::Rng(spec.seed).fork(spec.split);
  std::array<int, kQueryKinds> slot{};
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    num::Rng rng = base.fork(static_cast<std::uint64_t>(i));
    const QueryKind kind = kinds[static_cast<std::size_t>(i) % kinds.size()];
    int& s = slot[static_cast<std::size_t>(static_cast<int>(kind))];
    GenConfig cfg = spec.gen;
    int balance_slot = s;
    if (kind == QueryKind::Count) {
      balance_slot = s % (max_count + 1);
      cfg.difficulty = draw_difficulty(rng, spec.mix, balance_slot);
    } else {
      const int need = kind == QueryKind::TemporalOrder ? 2 : 0;
      cfg.difficulty = draw_difficulty(rng, spec.mix, need);
    }
    ++s;
    Example ex = generate_example(rng, cfg, kind, balance_slot);
    ex.split = spec.split;
    out.push_back(std::move(ex));
  }
  return out;
}

std::string example_to_json(const Example& ex) {
  json j{{"video", video_to_json(ex.video)},
         {"query",
          json{{"kind", query_kind_name(ex.query.kind)},
               {"tokens", ex.query.tokens}}},
         {"answer", json{{"label", ex.answer.label}}},
         {"caption", json{{"tokens", ex.caption}}},
         {"split", ex.split}};
  return j.dump();
}

Example example_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed record: ") + e.what());
  }
  try {
    Example ex;
    ex.video = video_from_json(j.at("video"));
    const json& jq = j.at("query");
    ex.query.kind = query_kind_from_name(jq.at("kind").get<std::string>());
    ex.query.tokens = jq.at("tokens").get<std::vector<int>>();
    ex.answer.label = j.at("answer").at("label").get<int>();
    ex.caption = j.at("caption").at("tokens").get<std::vector<int>>();
    ex.split = j.at("split").get<std::string>();

    check_video(ex.video);
    check_query(ex.query);
    if (ex.answer.label < 0 || ex.answer.label >= ans::kCount)
      throw DatasetError("answer label outside the vocabulary");
    if (oracle_answer(ex.video, ex.query).label != ex.answer.label)
      throw DatasetError("stored answer disagrees with the oracle");
    return ex;
  } catch (const json::exception& e) {
    throw DatasetError(std::string("incomplete record: ") + e.what());
  } catch (const GenerationError& e) {
    throw DatasetError(std::string("invalid video in record: ") + e.what());
  } catch (const ContractError& e) {
    throw DatasetError(std::string("unanswerable query in record: ") + e.what());
  }
}

void write_jsonl(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (const Example& ex : examples) f << example_to_json(ex) << '\n';
  f.flush();
  if (!f) throw IoError("write failed for " + path);
}

std::vector<Example> read_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<Example> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(example_from_json(line));
    } catch (const DatasetError& e) {
      throw DatasetError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (f.bad()) throw IoError("read failed for " + path);
  return out;
}

void write_vocab_json(const std::string& path, const Vocab& v) {
  json j{{"name", v.name}, {"tokens", v.tokens}};
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
  f.flush();
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace relay::world
