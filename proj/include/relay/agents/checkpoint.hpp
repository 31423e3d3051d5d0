#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "relay/agents/model.hpp"
#include "relay/numcore/adam.hpp"
#include "relay/numcore/param_store.hpp"

namespace relay::agents {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Everything needed to resume or evaluate a run: architecture, the run
/// settings it was produced under, vocabulary hashes, which curriculum
/// stages finished (ascending), weights, and optimiser moments.
struct Checkpoint {
  ModelConfig model;
  nlohmann::json run_config;
  std::vector<std::uint64_t> vocab_hashes;  // query, answer, caption
  std::vector<int> stages_done;
  num::ParamStore params;
  num::AdamState opt;

  bool has_opt() const { return !opt.m.empty(); }
};

/// Hashes of the vocabularies this build compiles against.
std::vector<std::uint64_t> current_vocab_hashes();

/// Binary, versioned, byte-stable for identical contents. Overwrites.
void save_checkpoint(const std::string& path, const Checkpoint& ck);

/// Throws IoError on missing/truncated/foreign files and ContractError when
/// the stored vocabulary hashes do not match this build's vocabularies.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace relay::agents
