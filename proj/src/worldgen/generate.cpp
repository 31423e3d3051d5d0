#include "relay/worldgen/generate.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "relay/worldgen/caption.hpp"

namespace relay::world {

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Trivial: return "trivial";
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  throw ContractError("difficulty_name: bad difficulty");
}

Difficulty difficulty_from_name(const std::string& s) {
  for (int i = 0; i < 4; ++i) {
    if (s == difficulty_name(static_cast<Difficulty>(i)))
      return static_cast<Difficulty>(i);
  }
  throw ConfigError("unknown difficulty '" + s + "'");
}

DifficultyProfile difficulty_profile(Difficulty d) {
  switch (d) {
    case Difficulty::Trivial: return {1, 1, 0, 0};
    case Difficulty::Easy: return {3, 4, 0, 2};
    case Difficulty::Medium: return {5, 6, 2, 4};
    case Difficulty::Hard: return {6, 8, 3, 6};
  }
  throw ContractError("difficulty_profile: bad difficulty");
}

std::vector<int> count_labels(Difficulty d) {
  const int top = difficulty_profile(d).max_objects;
  std::vector<int> labels;
  for (int n = 0; n <= top; ++n) labels.push_back(n);
  return labels;
}

namespace {

// Working representation of one object before placement.
struct ObjSpec {
  Shape shape = Shape::Square;
  Color color = Color::Red;
  int size = 2;
  int first = 0, last = 0;
  std::vector<std::pair<int, int>> recolors;  // (frame, color id), ordered
  bool lock_lifespan = false;
  bool lock_recolor = false;
  std::vector<int> banned_colors;  // never shown, initially or via recolor

  int event_count(int T) const {
    return (first > 0 ? 1 : 0) + (last < T - 1 ? 1 : 0) +
           static_cast<int>(recolors.size());
  }

  int color_before(int frame) const {
    int c = static_cast<int>(color);
    for (const auto& [f, nc] : recolors) {
      if (f >= frame) break;
      c = nc;
    }
    return c;
  }

  bool banned(int c) const {
    return std::find(banned_colors.begin(), banned_colors.end(), c) !=
           banned_colors.end();
  }
};

Shape rand_shape(num::Rng& rng) {
  return static_cast<Shape>(rng.uniform_int(0, kShapeCount - 1));
}

Shape rand_shape_except(num::Rng& rng, const std::vector<Shape>& avoid) {
  for (int tries = 0; tries < 64; ++tries) {
    Shape s = rand_shape(rng);
    if (std::find(avoid.begin(), avoid.end(), s) == avoid.end()) return s;
  }
  throw GenerationError("no shape available outside the excluded set");
}

Color rand_color(num::Rng& rng) {
  return static_cast<Color>(rng.uniform_int(0, kColorCount - 1));
}

Color rand_color_except(num::Rng& rng, const std::vector<int>& banned) {
  for (int tries = 0; tries < 64; ++tries) {
    Color c = rand_color(rng);
    if (std::find(banned.begin(), banned.end(), static_cast<int>(c)) ==
        banned.end())
      return c;
  }
  throw GenerationError("no color available outside the banned set");
}

int rand_size(num::Rng& rng, int n_objects) {
  // Crowded scenes use small objects so placement stays feasible.
  return rng.uniform_int(2, n_objects >= 6 ? 3 : 4);
}

void rand_lifespan(num::Rng& rng, int T, ObjSpec& o) {
  if (T == 1) {
    o.first = o.last = 0;
    return;
  }
  switch (rng.uniform_int(0, 3)) {
    case 0:  // whole video
      o.first = 0;
      o.last = T - 1;
      break;
    case 1:  // early
      o.first = 0;
      o.last = rng.uniform_int(T / 3, std::max(T / 3, 2 * T / 3));
      break;
    case 2:  // late
      o.first = rng.uniform_int(std::min(T - 1, T / 3), std::min(T - 1, 2 * T / 3));
      o.last = T - 1;
      break;
    default:  // strictly interior
      o.first = rng.uniform_int(0, T / 2);
      o.last = rng.uniform_int(std::min(T - 1, o.first + T / 4), T - 1);
      break;
  }
}

// Adds one more dynamic event to a random eligible object, respecting locks
// and bans. Returns false if nothing was eligible.
bool add_random_event(num::Rng& rng, std::vector<ObjSpec>& specs, int T) {
  if (T < 3 || specs.empty()) return false;
  for (int tries = 0; tries < 50; ++tries) {
    ObjSpec& o = specs[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(specs.size()) - 1))];
    switch (rng.uniform_int(0, 2)) {
      case 0:  // delay appearance
        if (!o.lock_lifespan && o.first == 0 && o.last >= 2) {
          o.first = rng.uniform_int(1, o.last - 1);
          return true;
        }
        break;
      case 1:  // vanish early
        if (!o.lock_lifespan && o.last == T - 1 && o.first <= T - 3) {
          o.last = rng.uniform_int(o.first + 1, T - 2);
          return true;
        }
        break;
      default:  // recolor
        if (!o.lock_recolor && o.recolors.size() < 2 && o.last > o.first) {
          const int f = rng.uniform_int(o.first + 1, o.last);
          bool taken = false;
          for (const auto& [rf, rc] : o.recolors) taken = taken || rf == f;
          if (taken) break;
          std::vector<int> avoid = o.banned_colors;
          avoid.push_back(o.color_before(f + 1));
          // inserting before an existing recolor must not turn it into a no-op
          for (const auto& [rf, rc] : o.recolors)
            if (rf > f) {
              avoid.push_back(rc);
              break;
            }
          const Color nc = rand_color_except(rng, avoid);
          o.recolors.emplace_back(f, static_cast<int>(nc));
          std::sort(o.recolors.begin(), o.recolors.end());
          return true;
        }
        break;
    }
  }
  return false;
}

int total_events(const std::vector<ObjSpec>& specs, int T) {
  int n = 0;
  for (const ObjSpec& o : specs) n += o.event_count(T);
  return n;
}

void spend_event_budget(num::Rng& rng, std::vector<ObjSpec>& specs, int T,
                        int target) {
  while (total_events(specs, T) < target) {
    if (!add_random_event(rng, specs, T)) break;
  }
}

// Forces one event whose frame lies outside the central third of the video
// (the long-range evidence requirement for hard scenes). Throws if no object
// can host one without breaking its plan locks.
void force_outer_event(num::Rng& rng, std::vector<ObjSpec>& specs, int T) {
  if (T < 9) throw GenerationError("hard scenes need T >= 9 for outer events");
  const int third = T / 3;
  for (ObjSpec& o : specs) {
    if (!o.lock_lifespan) {
      if (o.last >= third && third >= 2) {
        o.first = rng.uniform_int(1, third - 1);  // appear before the middle
        return;
      }
      if (o.first <= 2 * third - 1 && 2 * third - 1 <= T - 2) {
        o.last = rng.uniform_int(std::max(o.first, 2 * third - 1), T - 2);
        return;  // vanish event at last+1 >= 2*third
      }
    }
    if (!o.lock_recolor && o.recolors.empty()) {
      // recolor in the early or late third of the object's own lifespan
      const int early_hi = std::min(o.last, third - 1);
      const int late_lo = std::max(o.first + 1, 2 * third);
      int f = -1;
      if (o.first + 1 <= early_hi) {
        f = rng.uniform_int(o.first + 1, early_hi);
      } else if (late_lo <= o.last) {
        f = rng.uniform_int(late_lo, o.last);
      }
      if (f >= 0) {
        std::vector<int> avoid = o.banned_colors;
        avoid.push_back(o.color_before(f + 1));
        o.recolors.emplace_back(f, static_cast<int>(rand_color_except(rng, avoid)));
        return;
      }
    }
  }
  throw GenerationError("no object can host an event outside the central third");
}

bool has_outer_event(const std::vector<ObjSpec>& specs, int T) {
  const int lo = T / 3, hi = 2 * T / 3;  // central third is [lo, hi)
  for (const ObjSpec& o : specs) {
    if (o.first > 0 && o.first < lo) return true;
    if (o.last < T - 1 && o.last + 1 >= hi) return true;
    for (const auto& [f, c] : o.recolors)
      if (f < lo || f >= hi) return true;
  }
  return false;
}

// Assigns non-overlapping positions and assembles the checked video.
SymbolicVideo assemble(num::Rng& rng, const GenConfig& cfg,
                       std::vector<ObjSpec> specs) {
  // Shuffle so object ids carry no information about query roles.
  num::shuffle(specs, rng);

  SymbolicVideo v;
  v.T = cfg.T;
  v.H = cfg.H;
  v.W = cfg.W;

  // Big objects first makes placement much more likely to succeed.
  std::vector<int> order(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return specs[static_cast<std::size_t>(a)].size >
           specs[static_cast<std::size_t>(b)].size;
  });

  struct Box {
    int r0, c0, r1, c1;
  };
  std::vector<Box> placed;
  std::vector<std::pair<int, int>> pos(specs.size());
  for (int idx : order) {
    const ObjSpec& o = specs[static_cast<std::size_t>(idx)];
    const int e = bitmap_edge(o.size);
    bool ok = false;
    for (int tries = 0; tries < 400 && !ok; ++tries) {
      const int r = rng.uniform_int(0, cfg.H - e);
      const int c = rng.uniform_int(0, cfg.W - e);
      ok = true;
      for (const Box& b : placed) {
        if (!(r + e <= b.r0 || b.r1 <= r || c + e <= b.c0 || b.c1 <= c)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        placed.push_back(Box{r, c, r + e, c + e});
        pos[static_cast<std::size_t>(idx)] = {r, c};
      }
    }
    if (!ok) {
      throw GenerationError("could not place " + std::to_string(specs.size()) +
                            " objects after 400 tries");
    }
  }

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ObjSpec& s = specs[i];
    SymbolicObject o;
    o.id = static_cast<int>(i);
    o.shape = s.shape;
    o.color = s.color;
    o.size = s.size;
    o.row = pos[i].first;
    o.col = pos[i].second;
    o.first_frame = s.first;
    o.last_frame = s.last;
    v.objects.push_back(o);

    if (s.first > 0)
      v.events.push_back({s.first, EventKind::Appear, o.id, -1});
    if (s.last < cfg.T - 1)
      v.events.push_back({s.last + 1, EventKind::Vanish, o.id, -1});
    for (const auto& [f, c] : s.recolors)
      v.events.push_back({f, EventKind::Recolor, o.id, c});
  }
  std::sort(v.events.begin(), v.events.end(), [](const Event& a, const Event& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.object_id < b.object_id;
  });

  check_video(v);
  return v;
}

ObjSpec distractor(num::Rng& rng, const GenConfig& cfg, int n_objects,
                   const std::vector<Shape>& avoid_shapes,
                   const std::vector<int>& banned_colors) {
  ObjSpec o;
  o.shape = avoid_shapes.empty() ? rand_shape(rng)
                                 : rand_shape_except(rng, avoid_shapes);
  o.banned_colors = banned_colors;
  o.color = rand_color_except(rng, banned_colors);
  o.size = rand_size(rng, n_objects);
  rand_lifespan(rng, cfg.T, o);
  return o;
}

}  // namespace

SymbolicVideo generate_video(num::Rng& rng, const GenConfig& cfg) {
  if (cfg.T < 1) throw GenerationError("generate_video: T < 1");
  if (cfg.H < 16 || cfg.W < 16)
    throw GenerationError("generate_video: canvas below 16x16");
  const DifficultyProfile prof = difficulty_profile(cfg.difficulty);
  const int n = rng.uniform_int(prof.min_objects, prof.max_objects);
  std::vector<ObjSpec> specs;
  for (int i = 0; i < n; ++i) specs.push_back(distractor(rng, cfg, n, {}, {}));
  if (cfg.difficulty == Difficulty::Trivial) {
    for (ObjSpec& o : specs) {
      o.first = 0;
      o.last = cfg.T - 1;
      o.recolors.clear();
    }
  }
  spend_event_budget(rng, specs, cfg.T,
                     rng.uniform_int(prof.min_events, prof.max_events));
  if (cfg.difficulty == Difficulty::Hard && !has_outer_event(specs, cfg.T)) {
    force_outer_event(rng, specs, cfg.T);
  }
  return assemble(rng, cfg, specs);
}

namespace {

// Builds the spec list plus query/answer for one targeted example.
struct Plan {
  std::vector<ObjSpec> specs;
  Query query;
  Answer answer;
};

Plan plan_attribute(num::Rng& rng, const GenConfig& cfg,
                    const DifficultyProfile& prof, int slot) {
  Plan p;
  const int n = rng.uniform_int(prof.min_objects, prof.max_objects);
  const int label = slot % (kColorCount + kShapeCount);
  if (label < kColorCount) {
    // "what color is the <shape>" with the target color as the answer
    const Color target = static_cast<Color>(label);
    const Shape s = rand_shape(rng);
    ObjSpec ref;
    ref.shape = s;
    ref.color = target;
    ref.lock_recolor = true;  // attribute must stay constant over the lifespan
    ref.size = rand_size(rng, n);
    rand_lifespan(rng, cfg.T, ref);
    p.specs.push_back(ref);
    for (int i = 1; i < n; ++i)
      p.specs.push_back(distractor(rng, cfg, n, {s}, {}));
    p.query = attribute_color_query(s);
    p.answer = ans::color(target);
  } else {
    // "what shape is the <color> object"
    const Shape target = static_cast<Shape>(label - kColorCount);
    const Color c = rand_color(rng);
    ObjSpec ref;
    ref.shape = target;
    ref.color = c;
    ref.size = rand_size(rng, n);
    rand_lifespan(rng, cfg.T, ref);
    p.specs.push_back(ref);
    for (int i = 1; i < n; ++i)
      p.specs.push_back(distractor(rng, cfg, n, {}, {static_cast<int>(c)}));
    p.query = attribute_shape_query(c);
    p.answer = ans::shape(target);
  }
  return p;
}

Plan plan_count(num::Rng& rng, const GenConfig& cfg,
                const DifficultyProfile& prof, int slot) {
  Plan p;
  const std::vector<int> labels = count_labels(cfg.difficulty);
  const int target = labels[static_cast<std::size_t>(slot) % labels.size()];
  const Shape s = rand_shape(rng);
  const int n =
      std::max(target, rng.uniform_int(prof.min_objects, prof.max_objects));
  for (int i = 0; i < target; ++i) {
    ObjSpec o;
    o.shape = s;
    o.color = rand_color(rng);
    o.size = rand_size(rng, n);
    rand_lifespan(rng, cfg.T, o);
    p.specs.push_back(o);
  }
  // Spread two of the counted objects to opposite ends of the video so the
  // total is not readable from any single segment.
  if (target >= 2 && cfg.T >= 8) {
    p.specs[0].first = 0;
    p.specs[0].last = rng.uniform_int(cfg.T / 4, cfg.T / 2 - 1);
    p.specs[1].first = rng.uniform_int(cfg.T / 2, 3 * cfg.T / 4);
    p.specs[1].last = cfg.T - 1;
  }
  for (int i = target; i < n; ++i)
    p.specs.push_back(distractor(rng, cfg, n, {s}, {}));
  p.query = count_query(s);
  p.answer = ans::count(target);
  return p;
}

Plan plan_existence(num::Rng& rng, const GenConfig& cfg,
                    const DifficultyProfile& prof, int slot) {
  Plan p;
  const bool want = slot % 2 == 0;
  const Color c = rand_color(rng);
  const Shape s = rand_shape(rng);
  const int n = rng.uniform_int(prof.min_objects, prof.max_objects);
  if (want) {
    ObjSpec ref;
    ref.shape = s;
    ref.color = c;
    ref.size = rand_size(rng, n);
    rand_lifespan(rng, cfg.T, ref);
    p.specs.push_back(ref);
    for (int i = 1; i < n; ++i) p.specs.push_back(distractor(rng, cfg, n, {}, {}));
  } else {
    for (int i = 0; i < n; ++i) {
      // Matching shapes may exist but may never show the queried color.
      ObjSpec o = distractor(rng, cfg, n, {}, {});
      if (o.shape == s) {
        o.banned_colors.push_back(static_cast<int>(c));
        o.color = rand_color_except(rng, o.banned_colors);
      }
      p.specs.push_back(o);
    }
  }
  p.query = existence_query(c, s);
  p.answer = ans::yes_no(want);
  return p;
}

Plan plan_order(num::Rng& rng, const GenConfig& cfg,
                const DifficultyProfile& prof, int slot) {
  if (cfg.T < 6)
    throw GenerationError("temporal-order queries need T >= 6");
  if (prof.max_objects < 2)
    throw GenerationError("temporal-order queries need at least 2 objects");
  Plan p;
  const bool before = slot % 2 == 0;
  const Shape sA = rand_shape(rng);
  const Shape sB = rand_shape(rng);
  const Color cA = rand_color(rng);
  Color cB = rand_color(rng);
  if (sA == sB) {
    while (cB == cA) cB = rand_color(rng);
  }
  const int third = std::max(1, cfg.T / 3);

  auto make_ref = [&](Shape s, Color c, bool early, int n) {
    ObjSpec o;
    o.shape = s;
    o.color = c;
    o.size = rand_size(rng, n);
    o.lock_lifespan = true;
    o.lock_recolor = true;
    if (early) {
      o.first = rng.uniform_int(0, third - 1);
    } else {
      o.first = rng.uniform_int(cfg.T - third, cfg.T - 1);
    }
    o.last = rng.uniform_int(o.first, cfg.T - 1);
    return o;
  };

  const int n = std::max(2, rng.uniform_int(prof.min_objects, prof.max_objects));
  p.specs.push_back(make_ref(sA, cA, before, n));
  p.specs.push_back(make_ref(sB, cB, !before, n));
  std::vector<Shape> avoid{sA, sB};
  for (int i = 2; i < n; ++i)
    p.specs.push_back(distractor(rng, cfg, n, avoid, {}));
  p.query = order_query(cA, sA, cB, sB);
  p.answer = ans::order(before);
  return p;
}

Plan plan_segment_attribute(num::Rng& rng, const GenConfig& cfg,
                            const DifficultyProfile& prof, int slot) {
  if (cfg.T < kTimeBuckets)
    throw GenerationError("segment-attribute queries need T >= " +
                          std::to_string(kTimeBuckets));
  Plan p;
  const Color target = static_cast<Color>(slot % kColorCount);
  const Shape s = rand_shape(rng);
  int bucket;
  if (cfg.difficulty == Difficulty::Hard) {
    // Keep the referenced bucket outside the central third of the video.
    const int outer[4] = {0, 1, kTimeBuckets - 2, kTimeBuckets - 1};
    bucket = outer[rng.uniform_int(0, 3)];
  } else {
    bucket = rng.uniform_int(0, kTimeBuckets - 1);
  }
  const auto [b0, b1] = time_bucket_span(cfg.T, bucket);
  const int n = rng.uniform_int(prof.min_objects, prof.max_objects);

  ObjSpec ref;
  ref.shape = s;
  ref.size = rand_size(rng, n);
  ref.lock_lifespan = true;
  ref.lock_recolor = true;
  ref.first = b0 > 0 ? rng.uniform_int(0, b0) : 0;
  ref.last = rng.uniform_int(b1, cfg.T - 1);
  const bool recolor_into =
      cfg.difficulty >= Difficulty::Medium && ref.first + 1 <= b0 && rng.bernoulli(0.5);
  if (recolor_into) {
    // Shows a different color first, switching to the target before the bucket.
    ref.color = rand_color_except(rng, {static_cast<int>(target)});
    ref.recolors.emplace_back(rng.uniform_int(ref.first + 1, b0),
                              static_cast<int>(target));
  } else {
    ref.color = target;
    if (cfg.difficulty >= Difficulty::Medium && b1 + 1 <= ref.last &&
        rng.bernoulli(0.5)) {
      // Switches away after the bucket; the global attribute is ambiguous
      // but the segment attribute is not.
      ref.recolors.emplace_back(
          rng.uniform_int(b1 + 1, ref.last),
          static_cast<int>(rand_color_except(rng, {static_cast<int>(target)})));
    }
  }
  p.specs.push_back(ref);

  for (int i = 1; i < n; ++i) {
    // Same-shape distractors are allowed as long as they miss the bucket.
    const bool same_shape_ok =
        cfg.difficulty >= Difficulty::Medium && (b0 >= 2 || b1 + 2 <= cfg.T - 1);
    if (same_shape_ok && rng.bernoulli(0.3)) {
      ObjSpec o;
      o.shape = s;
      o.color = rand_color(rng);
      o.size = rand_size(rng, n);
      o.lock_lifespan = true;
      if (b0 >= 2 && (b1 + 2 > cfg.T - 1 || rng.bernoulli(0.5))) {
        o.first = 0;
        o.last = rng.uniform_int(0, b0 - 2);
      } else {
        o.first = rng.uniform_int(b1 + 2, cfg.T - 1);
        o.last = cfg.T - 1;
      }
      p.specs.push_back(o);
    } else {
      p.specs.push_back(distractor(rng, cfg, n, {s}, {}));
    }
  }
  p.query = segment_attribute_query(bucket, s);
  p.answer = ans::color(target);
  return p;
}

}  // namespace

Example generate_example(num::Rng& rng, const GenConfig& cfg, QueryKind kind,
                         int balance_slot) {
  const DifficultyProfile prof = difficulty_profile(cfg.difficulty);
  GenerationError last_error("generation never attempted");
  for (int attempt = 0; attempt < 20; ++attempt) {
    try {
      Plan p;
      switch (kind) {
        case QueryKind::Attribute:
          p = plan_attribute(rng, cfg, prof, balance_slot);
          break;
        case QueryKind::Count:
          p = plan_count(rng, cfg, prof, balance_slot);
          break;
        case QueryKind::Existence:
          p = plan_existence(rng, cfg, prof, balance_slot);
          break;
        case QueryKind::TemporalOrder:
          p = plan_order(rng, cfg, prof, balance_slot);
          break;
        case QueryKind::SegmentAttribute:
          p = plan_segment_attribute(rng, cfg, prof, balance_slot);
          break;
      }
      if (cfg.difficulty == Difficulty::Trivial) {
        // Trivial scenes are fully static regardless of how the plan drew
        // its lifespans.
        for (ObjSpec& o : p.specs) {
          o.first = 0;
          o.last = cfg.T - 1;
          o.recolors.clear();
        }
      }
      spend_event_budget(rng, p.specs, cfg.T,
                         rng.uniform_int(prof.min_events, prof.max_events));
      if (cfg.difficulty == Difficulty::Hard &&
          !has_outer_event(p.specs, cfg.T)) {
        force_outer_event(rng, p.specs, cfg.T);
      }

      Example ex;
      ex.video = assemble(rng, cfg, p.specs);
      ex.query = p.query;
      ex.answer = oracle_answer(ex.video, ex.query);
      if (ex.answer.label != p.answer.label) {
        throw GenerationError("constructed answer disagrees with the oracle");
      }
      ex.caption = make_caption(ex.video);
      return ex;
    } catch (const GenerationError& e) {
      last_error = e;
    } catch (const ContractError& e) {
      // Oracle rejected the construction (e.g. an accidental duplicate
      // referent); retry with fresh randomness.
      last_error = GenerationError(e.what());
    }
  }
  std::ostringstream os;
  os << "gave up generating a " << query_kind_name(kind) << " example after "
     << 20 << " attempts: " << last_error.what();
  throw GenerationError(os.str());
}

const SymbolicObject* referent_object(const SymbolicVideo& v, const Query& q) {
  auto ever_color = [&](const SymbolicObject& o, Color c) {
    for (int t = o.first_frame; t <= o.last_frame; ++t)
      if (v.color_at(o, t) == c) return true;
    return false;
  };
  const SymbolicObject* hit = nullptr;
  auto consider = [&hit](const SymbolicObject& o) {
    if (hit) {
      hit = nullptr;
      return false;  // ambiguous
    }
    hit = &o;
    return true;
  };

  if (q.kind == QueryKind::Attribute && q.tokens.size() == 3) {
    if (q.tokens[1] == qt::kTargetColor) {
      const Shape s = static_cast<Shape>(q.tokens[2] - qt::kShapeBase);
      for (const SymbolicObject& o : v.objects)
        if (o.shape == s && !consider(o)) return nullptr;
    } else {
      const Color c = static_cast<Color>(q.tokens[2] - qt::kColorBase);
      for (const SymbolicObject& o : v.objects)
        if (ever_color(o, c) && !consider(o)) return nullptr;
    }
    return hit;
  }
  if (q.kind == QueryKind::SegmentAttribute && q.tokens.size() == 3) {
    const int bucket = q.tokens[1] - qt::kTimeBase;
    const Shape s = static_cast<Shape>(q.tokens[2] - qt::kShapeBase);
    const auto [b0, b1] = time_bucket_span(v.T, bucket);
    for (const SymbolicObject& o : v.objects) {
      if (o.shape != s) continue;
      if (o.first_frame <= b1 && o.last_frame >= b0 && !consider(o))
        return nullptr;
    }
    return hit;
  }
  return nullptr;
}

}  // namespace relay::world
