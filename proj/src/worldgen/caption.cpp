#include "relay/worldgen/caption.hpp"

#include <string>

namespace relay::world {

std::vector<ClauseSummary> summarize(const SymbolicVideo& v) {
  std::vector<ClauseSummary> out;
  for (const SymbolicObject& o : v.objects) {
    out.push_back(ClauseSummary{o.shape, o.color, position_bucket(o, v.H, v.W),
                                lifespan_bucket(o, v.T)});
  }
  return out;
}

std::vector<int> make_caption(const SymbolicVideo& v) {
  if (v.objects.empty()) return {ct::kEmpty};
  std::vector<int> toks;
  bool first = true;
  for (const ClauseSummary& s : summarize(v)) {
    if (!first) toks.push_back(ct::kDelim);
    first = false;
    toks.push_back(ct::shape(s.shape));
    toks.push_back(ct::color(s.color));
    toks.push_back(ct::pos(s.pos_bucket));
    toks.push_back(ct::life(s.life_bucket));
  }
  if (static_cast<int>(toks.size()) > kCaptionCap) {
    throw GenerationError("caption of " + std::to_string(toks.size()) +
                          " tokens exceeds the cap of " +
                          std::to_string(kCaptionCap));
  }
  return toks;
}

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw DatasetError("malformed caption: " + what);
}

int expect_range(const std::vector<int>& t, std::size_t i, int base, int count,
                 const char* what) {
  if (i >= t.size()) bad(std::string("truncated before ") + what);
  const int v = t[i] - base;
  if (v < 0 || v >= count) bad(std::string("expected ") + what);
  return v;
}

}  // namespace

std::vector<ClauseSummary> parse_caption(const std::vector<int>& tokens) {
  if (tokens.empty()) bad("no tokens");
  if (tokens.size() == 1 && tokens[0] == ct::kEmpty) return {};
  std::vector<ClauseSummary> out;
  std::size_t i = 0;
  while (true) {
    ClauseSummary s{};
    s.shape = static_cast<Shape>(
        expect_range(tokens, i++, ct::kShapeBase, kShapeCount, "a shape"));
    s.color = static_cast<Color>(
        expect_range(tokens, i++, ct::kColorBase, kColorCount, "a color"));
    s.pos_bucket =
        expect_range(tokens, i++, ct::kPosBase, kPositionBuckets, "a position");
    s.life_bucket =
        expect_range(tokens, i++, ct::kLifeBase, kLifespanBuckets, "a lifespan");
    out.push_back(s);
    if (i == tokens.size()) return out;
    if (tokens[i++] != ct::kDelim) bad("expected a delimiter between clauses");
  }
}

}  // namespace relay::world
