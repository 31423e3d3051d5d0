#include "relay/worldgen/vocab.hpp"

namespace relay::world {

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1f;  // separator so ["ab","c"] != ["a","bc"]
    h *= 0x100000001b3ULL;
  };
  feed(name);
  for (const std::string& t : tokens) feed(t);
  return h;
}

const char* query_kind_name(QueryKind k) {
  switch (k) {
    case QueryKind::Attribute: return "attribute";
    case QueryKind::Count: return "count";
    case QueryKind::Existence: return "existence";
    case QueryKind::TemporalOrder: return "temporal-order";
    case QueryKind::SegmentAttribute: return "segment-attribute";
  }
  throw ContractError("query_kind_name: bad kind");
}

QueryKind query_kind_from_name(const std::string& s) {
  for (int i = 0; i < kQueryKinds; ++i) {
    const auto v = static_cast<QueryKind>(i);
    if (s == query_kind_name(v)) return v;
  }
  throw DatasetError("unknown query kind '" + s + "'");
}

Query pad_query() { return Query{QueryKind::Attribute, {qt::kPad}}; }

Query attribute_color_query(Shape s) {
  return {QueryKind::Attribute,
          {qt::kind(QueryKind::Attribute), qt::kTargetColor, qt::shape(s)}};
}

Query attribute_shape_query(Color c) {
  return {QueryKind::Attribute,
          {qt::kind(QueryKind::Attribute), qt::kTargetShape, qt::color(c)}};
}

Query count_query(Shape s) {
  return {QueryKind::Count, {qt::kind(QueryKind::Count), qt::shape(s)}};
}

Query count_color_query(Color c) {
  return {QueryKind::Count, {qt::kind(QueryKind::Count), qt::color(c)}};
}

Query existence_query(Color c, Shape s) {
  return {QueryKind::Existence,
          {qt::kind(QueryKind::Existence), qt::color(c), qt::shape(s)}};
}

Query order_query(Color c1, Shape s1, Color c2, Shape s2) {
  return {QueryKind::TemporalOrder,
          {qt::kind(QueryKind::TemporalOrder), qt::color(c1), qt::shape(s1),
           qt::color(c2), qt::shape(s2)}};
}

Query segment_attribute_query(int bucket, Shape s) {
  if (bucket < 0 || bucket >= kTimeBuckets) {
    throw IndexError("segment_attribute_query: bucket " +
                     std::to_string(bucket) + " outside [0, " +
                     std::to_string(kTimeBuckets) + ")");
  }
  return {QueryKind::SegmentAttribute,
          {qt::kind(QueryKind::SegmentAttribute), qt::time_bucket(bucket),
           qt::shape(s)}};
}

void check_query(const Query& q) {
  if (q.tokens.empty()) throw ContractError("query has no tokens");
  for (int t : q.tokens) {
    if (t < 0 || t >= qt::kCount) {
      throw IndexError("query token " + std::to_string(t) +
                       " outside the query vocabulary");
    }
  }
}

const Vocab& query_vocab() {
  static const Vocab v = [] {
    Vocab v;
    v.name = "query";
    v.tokens = {"<pad>", "q:attribute", "q:count", "q:existence",
                "q:temporal-order", "q:segment-attribute", "target:color",
                "target:shape"};
    for (int c = 0; c < kColorCount; ++c)
      v.tokens.push_back(color_name(static_cast<Color>(c)));
    for (int s = 0; s < kShapeCount; ++s)
      v.tokens.push_back(shape_name(static_cast<Shape>(s)));
    for (int j = 0; j < kTimeBuckets; ++j)
      v.tokens.push_back("time:" + std::to_string(j));
    return v;
  }();
  return v;
}

const Vocab& caption_vocab() {
  static const Vocab v = [] {
    Vocab v;
    v.name = "caption";
    v.tokens = {"<pad>", "<bos>", "<eos>", "empty", ";"};
    for (int s = 0; s < kShapeCount; ++s)
      v.tokens.push_back(shape_name(static_cast<Shape>(s)));
    for (int c = 0; c < kColorCount; ++c)
      v.tokens.push_back(color_name(static_cast<Color>(c)));
    for (int b = 0; b < kPositionBuckets; ++b)
      v.tokens.push_back(position_bucket_name(b));
    for (int b = 0; b < kLifespanBuckets; ++b)
      v.tokens.push_back(lifespan_bucket_name(b));
    return v;
  }();
  return v;
}

const Vocab& answer_vocab() {
  static const Vocab v = [] {
    Vocab v;
    v.name = "answer";
    for (int c = 0; c < kColorCount; ++c)
      v.tokens.push_back(color_name(static_cast<Color>(c)));
    for (int s = 0; s < kShapeCount; ++s)
      v.tokens.push_back(shape_name(static_cast<Shape>(s)));
    for (int n = 0; n <= 9; ++n) v.tokens.push_back(std::to_string(n));
    v.tokens.push_back("no");
    v.tokens.push_back("yes");
    v.tokens.push_back("before");
    v.tokens.push_back("after");
    return v;
  }();
  return v;
}

}  // namespace relay::world
