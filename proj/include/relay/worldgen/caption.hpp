#pragma once

#include <vector>

#include "relay/worldgen/vocab.hpp"
#include "relay/worldgen/world.hpp"

namespace relay::world {

/// One object's caption clause content, the unit the grammar is injective on.
struct ClauseSummary {
  Shape shape;
  Color color;  // color on the object's first frame
  int pos_bucket;
  int life_bucket;

  bool operator==(const ClauseSummary& o) const {
    return shape == o.shape && color == o.color && pos_bucket == o.pos_bucket &&
           life_bucket == o.life_bucket;
  }
};

/// Ground-truth summaries, ordered by object id.
std::vector<ClauseSummary> summarize(const SymbolicVideo& v);

/// Deterministic caption: clauses [shape, color, position, lifespan] joined
/// by the delimiter token, objects in id order; "empty" for bare scenes.
/// Content tokens only; BOS/EOS framing is the decoder's concern.
std::vector<int> make_caption(const SymbolicVideo& v);

/// Grammar inverse. Throws DatasetError on token sequences the grammar
/// cannot have produced.
std::vector<ClauseSummary> parse_caption(const std::vector<int>& tokens);

}  // namespace relay::world
