#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relay/worldgen/generate.hpp"

namespace relay::world {

/// Weighted difficulty mixture; weights need not be normalized.
using DifficultyMix = std::vector<std::pair<Difficulty, double>>;

struct DatasetSpec {
  GenConfig gen;                       // T, H, W (difficulty comes from the mix)
  DifficultyMix mix = {{Difficulty::Medium, 1.0}};
  std::vector<QueryKind> kinds;        // empty selects default_kinds(gen.T)
  int n = 1;
  std::string split = "train";
  std::uint64_t seed = 0;
};

/// Query kinds answerable at this video length. Single-frame data drops the
/// temporal kinds.
std::vector<QueryKind> default_kinds(int T);

/// Generates `spec.n` examples. Query kinds cycle for exact kind balance;
/// answer labels cycle per kind so every label lands within ±10% of uniform.
/// Each example draws from an rng forked on (seed, split, index), so splits
/// are disjoint by construction and regeneration is byte-exact.
std::vector<Example> make_dataset(const DatasetSpec& spec);

// ---- serialization -------------------------------------------------------

/// One Example as a single JSON line (no trailing newline).
std::string example_to_json(const Example& ex);
Example example_from_json(const std::string& line);

void write_jsonl(const std::string& path, const std::vector<Example>& examples);
std::vector<Example> read_jsonl(const std::string& path);

/// Token table as JSON with stable ordering.
void write_vocab_json(const std::string& path, const Vocab& v);

}  // namespace relay::world
