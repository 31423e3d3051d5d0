#pragma once

#include <string>
#include <vector>

#include "relay/numcore/rng.hpp"
#include "relay/worldgen/oracle.hpp"
#include "relay/worldgen/vocab.hpp"
#include "relay/worldgen/world.hpp"

namespace relay::world {

enum class Difficulty : int { Trivial = 0, Easy, Medium, Hard };

const char* difficulty_name(Difficulty d);
Difficulty difficulty_from_name(const std::string& s);

/// Object-count and dynamic-event ranges per difficulty.
struct DifficultyProfile {
  int min_objects, max_objects;
  int min_events, max_events;
};
DifficultyProfile difficulty_profile(Difficulty d);

struct GenConfig {
  int T = 48, H = 32, W = 32;
  Difficulty difficulty = Difficulty::Medium;
};

/// A full labelled record: the video, one answerable query with its oracle
/// answer, and the scene caption.
struct Example {
  SymbolicVideo video;
  Query query;
  Answer answer;
  std::vector<int> caption;
  std::string split;
};

/// Unconstrained scene draw (no query attached). Always checker-clean.
SymbolicVideo generate_video(num::Rng& rng, const GenConfig& cfg);

/// Scene constructed so that `kind` has a unique, unambiguous referent, with
/// the target answer label chosen by cycling `balance_slot` through the
/// kind's label set (this is what keeps per-kind label histograms flat).
Example generate_example(num::Rng& rng, const GenConfig& cfg, QueryKind kind,
                         int balance_slot);

/// Count labels reachable at a difficulty (bounded by its object range).
std::vector<int> count_labels(Difficulty d);

/// For attribute and segment-attribute queries: the object the query is
/// about. Used by evaluation filters (e.g. small-object subsets).
const SymbolicObject* referent_object(const SymbolicVideo& v, const Query& q);

}  // namespace relay::world
