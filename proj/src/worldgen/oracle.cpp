#include "relay/worldgen/oracle.hpp"

#include <set>
#include <string>
#include <vector>

namespace relay::world {

namespace {

[[noreturn]] void reject(const std::string& why) {
  throw ContractError("oracle: " + why);
}

int tok_at(const Query& q, std::size_t i) {
  if (i >= q.tokens.size()) reject("query too short for its kind");
  return q.tokens[i];
}

Shape shape_tok(const Query& q, std::size_t i) {
  const int v = tok_at(q, i) - qt::kShapeBase;
  if (v < 0 || v >= kShapeCount) reject("expected a shape token");
  return static_cast<Shape>(v);
}

Color color_tok(const Query& q, std::size_t i) {
  const int v = tok_at(q, i) - qt::kColorBase;
  if (v < 0 || v >= kColorCount) reject("expected a color token");
  return static_cast<Color>(v);
}

// Colors an object shows over the frames of [t0, t1] it is alive for,
// collected by scanning every frame.
std::set<Color> colors_over(const SymbolicVideo& v, const SymbolicObject& o,
                            int t0, int t1) {
  std::set<Color> cs;
  for (int t = t0; t <= t1; ++t)
    if (o.alive_at(t)) cs.insert(v.color_at(o, t));
  return cs;
}

const SymbolicObject& unique_match(
    const SymbolicVideo& v, const std::vector<const SymbolicObject*>& hits,
    const std::string& what) {
  (void)v;
  if (hits.empty()) reject("no object matches " + what);
  if (hits.size() > 1) reject("ambiguous referent for " + what);
  return *hits[0];
}

}  // namespace

Answer oracle_answer(const SymbolicVideo& v, const Query& q) {
  check_query(q);
  const int all_first = 0, all_last = v.T - 1;

  switch (q.kind) {
    case QueryKind::Attribute: {
      const int target = tok_at(q, 1);
      if (target == qt::kTargetColor) {
        const Shape s = shape_tok(q, 2);
        std::vector<const SymbolicObject*> hits;
        for (const SymbolicObject& o : v.objects)
          if (o.shape == s) hits.push_back(&o);
        const SymbolicObject& ref =
            unique_match(v, hits, std::string("shape ") + shape_name(s));
        std::set<Color> cs = colors_over(v, ref, all_first, all_last);
        if (cs.size() != 1) reject("referent changes color; attribute undefined");
        return ans::color(*cs.begin());
      }
      if (target == qt::kTargetShape) {
        const Color c = color_tok(q, 2);
        std::vector<const SymbolicObject*> hits;
        for (const SymbolicObject& o : v.objects)
          if (colors_over(v, o, all_first, all_last).count(c)) hits.push_back(&o);
        const SymbolicObject& ref =
            unique_match(v, hits, std::string("color ") + color_name(c));
        return ans::shape(ref.shape);
      }
      reject("attribute query without a target token");
    }

    case QueryKind::Count: {
      const int tok = tok_at(q, 1);
      int n = 0;
      if (tok >= qt::kShapeBase && tok < qt::kShapeBase + kShapeCount) {
        const Shape s = static_cast<Shape>(tok - qt::kShapeBase);
        for (const SymbolicObject& o : v.objects)
          if (o.shape == s) ++n;
      } else if (tok >= qt::kColorBase && tok < qt::kColorBase + kColorCount) {
        const Color c = static_cast<Color>(tok - qt::kColorBase);
        for (const SymbolicObject& o : v.objects)
          if (colors_over(v, o, all_first, all_last).count(c)) ++n;
      } else {
        reject("count query needs a shape or color referent");
      }
      if (n > 9) reject("count exceeds the answer vocabulary");
      return ans::count(n);
    }

    case QueryKind::Existence: {
      const Color c = color_tok(q, 1);
      const Shape s = shape_tok(q, 2);
      for (const SymbolicObject& o : v.objects)
        if (o.shape == s && colors_over(v, o, all_first, all_last).count(c))
          return ans::yes_no(true);
      return ans::yes_no(false);
    }

    case QueryKind::TemporalOrder: {
      const Color c1 = color_tok(q, 1);
      const Shape s1 = shape_tok(q, 2);
      const Color c2 = color_tok(q, 3);
      const Shape s2 = shape_tok(q, 4);
      auto find = [&](Color c, Shape s) -> const SymbolicObject& {
        std::vector<const SymbolicObject*> hits;
        for (const SymbolicObject& o : v.objects)
          if (o.shape == s && colors_over(v, o, all_first, all_last).count(c))
            hits.push_back(&o);
        return unique_match(v, hits,
                            std::string(color_name(c)) + " " + shape_name(s));
      };
      const SymbolicObject& a = find(c1, s1);
      const SymbolicObject& b = find(c2, s2);
      if (a.first_frame == b.first_frame)
        reject("referents appear simultaneously; order undefined");
      return ans::order(a.first_frame < b.first_frame);
    }

    case QueryKind::SegmentAttribute: {
      const int bucket = tok_at(q, 1) - qt::kTimeBase;
      if (bucket < 0 || bucket >= kTimeBuckets) reject("expected a time bucket");
      const Shape s = shape_tok(q, 2);
      const auto [b0, b1] = time_bucket_span(v.T, bucket);
      std::vector<const SymbolicObject*> hits;
      for (const SymbolicObject& o : v.objects) {
        if (o.shape != s) continue;
        if (!colors_over(v, o, b0, b1).empty()) hits.push_back(&o);
      }
      const SymbolicObject& ref = unique_match(
          v, hits,
          std::string(shape_name(s)) + " in bucket " + std::to_string(bucket));
      std::set<Color> cs = colors_over(v, ref, b0, b1);
      if (cs.size() != 1) reject("color changes inside the bucket");
      return ans::color(*cs.begin());
    }
  }
  reject("unknown query kind");
}

}  // namespace relay::world
