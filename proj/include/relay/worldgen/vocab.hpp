#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relay/errors.hpp"
#include "relay/worldgen/world.hpp"

namespace relay::world {

/// Fixed token table with stable ordering. Token ids are indices.
struct Vocab {
  std::string name;
  std::vector<std::string> tokens;

  int size() const { return static_cast<int>(tokens.size()); }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) {
      throw IndexError(name + " vocab: token id " + std::to_string(id) +
                       " outside [0, " + std::to_string(size()) + ")");
    }
    return tokens[static_cast<std::size_t>(id)];
  }

  int id(const std::string& tok) const {
    for (int i = 0; i < size(); ++i)
      if (tokens[static_cast<std::size_t>(i)] == tok) return i;
    throw IndexError(name + " vocab: unknown token '" + tok + "'");
  }

  /// Order-sensitive content hash, stored in checkpoints so a model is never
  /// silently evaluated against a shifted token table.
  std::uint64_t hash() const;
};

// ---- query vocabulary -------------------------------------------------

enum class QueryKind : int {
  Attribute = 0,
  Count,
  Existence,
  TemporalOrder,
  SegmentAttribute,
};
inline constexpr int kQueryKinds = 5;
const char* query_kind_name(QueryKind k);
QueryKind query_kind_from_name(const std::string& s);

namespace qt {
// Token ids in the query vocabulary, fixed layout.
inline constexpr int kPad = 0;
inline constexpr int kKindBase = 1;             // 5 kind tokens
inline constexpr int kTargetColor = 6;
inline constexpr int kTargetShape = 7;
inline constexpr int kColorBase = 8;            // 8 colors
inline constexpr int kShapeBase = 16;           // 4 shapes
inline constexpr int kTimeBase = 20;            // kTimeBuckets buckets
inline constexpr int kCount = 20 + kTimeBuckets;

inline int kind(QueryKind k) { return kKindBase + static_cast<int>(k); }
inline int color(Color c) { return kColorBase + static_cast<int>(c); }
inline int shape(Shape s) { return kShapeBase + static_cast<int>(s); }
inline int time_bucket(int j) { return kTimeBase + j; }
}  // namespace qt

struct Query {
  QueryKind kind = QueryKind::Attribute;
  std::vector<int> tokens;  // query-vocab ids; kind token first for real queries
};

/// Tokens may be PAD only for the stage-1 "no query" placeholder.
Query pad_query();

Query attribute_color_query(Shape s);             // "color of the <s>"
Query attribute_shape_query(Color c);             // "shape of the <c> object"
Query count_query(Shape s);                       // "how many <s>"
Query count_color_query(Color c);                 // "how many <c> objects"
Query existence_query(Color c, Shape s);          // "is there a <c> <s>"
Query order_query(Color c1, Shape s1, Color c2, Shape s2);  // first before second?
Query segment_attribute_query(int bucket, Shape s);  // "color of <s> in bucket j"

/// Throws if a token id is outside the vocabulary or the sequence is empty.
void check_query(const Query& q);

// ---- answer vocabulary -------------------------------------------------

struct Answer {
  int label = 0;
};

namespace ans {
inline constexpr int kColorBase = 0;   // 8 colors
inline constexpr int kShapeBase = 8;   // 4 shapes
inline constexpr int kCountBase = 12;  // counts 0..9
inline constexpr int kNo = 22;
inline constexpr int kYes = 23;
inline constexpr int kBefore = 24;
inline constexpr int kAfter = 25;
inline constexpr int kCount = 26;

inline Answer color(Color c) { return {kColorBase + static_cast<int>(c)}; }
inline Answer shape(Shape s) { return {kShapeBase + static_cast<int>(s)}; }
inline Answer count(int n) {
  if (n < 0 || n > 9) throw ContractError("answer count outside 0..9");
  return {kCountBase + n};
}
inline Answer yes_no(bool b) { return {b ? kYes : kNo}; }
inline Answer order(bool before) { return {before ? kBefore : kAfter}; }
}  // namespace ans

// ---- caption vocabulary -------------------------------------------------

namespace ct {
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kEmpty = 3;
inline constexpr int kDelim = 4;
inline constexpr int kShapeBase = 5;     // 4 shapes
inline constexpr int kColorBase = 9;     // 8 colors
inline constexpr int kPosBase = 17;      // 9 position buckets
inline constexpr int kLifeBase = 26;     // 4 lifespan buckets
inline constexpr int kCount = 30;

inline int shape(Shape s) { return kShapeBase + static_cast<int>(s); }
inline int color(Color c) { return kColorBase + static_cast<int>(c); }
inline int pos(int b) { return kPosBase + b; }
inline int life(int b) { return kLifeBase + b; }
}  // namespace ct

/// Longest caption the grammar may emit (content tokens, excluding BOS/EOS).
inline constexpr int kCaptionCap = 96;
/// Longest canonical query.
inline constexpr int kMaxQueryTokens = 5;

const Vocab& query_vocab();
const Vocab& caption_vocab();
const Vocab& answer_vocab();

}  // namespace relay::world
