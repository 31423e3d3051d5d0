#pragma once

#include "relay/worldgen/vocab.hpp"
#include "relay/worldgen/world.hpp"

namespace relay::world {

/// Exact answer by exhaustive scan of every frame's symbolic state.
/// Throws ContractError for queries whose referent is missing or ambiguous;
/// the generator never emits such queries.
Answer oracle_answer(const SymbolicVideo& v, const Query& q);

}  // namespace relay::world
