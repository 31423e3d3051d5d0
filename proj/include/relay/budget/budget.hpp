#pragma once

#include <utility>
#include <vector>

#include "relay/errors.hpp"
#include "relay/numcore/tensor.hpp"
#include "relay/worldgen/vocab.hpp"
#include "relay/worldgen/world.hpp"

namespace relay::budget {

/// Per-agent pixel cap per forward pass.
struct PerceptionBudget {
  std::int64_t max_pixels = 4096;  // 16 frames at 16x16
};

/// Coordinator context capacity, measured in tokens.
struct CommunicationBudget {
  std::int64_t max_tokens = 256;
};

/// How a video is split and compressed: M agents, F frames each at h x w,
/// K communication tokens per agent.
struct ObservationPlan {
  int M = 4;
  int F = 16;
  int h = 16, w = 16;
  int K = 32;
};

/// What one agent actually sees: sampled frames rendered at (h, w).
/// Frames are [3, h, w] tensors; fewer than the requested F survive when the
/// segment is too short to supply distinct indices.
struct Observation {
  std::vector<num::Tensor> frames;
  std::vector<int> source_frames;  // video frame index per entry, ascending
  int first = 0, last = 0;         // the segment this was drawn from
  int h = 0, w = 0;
  int agent = 0;

  int F() const { return static_cast<int>(frames.size()); }
};

inline std::int64_t pix(int F, int h, int w) {
  return static_cast<std::int64_t>(F) * h * w;
}
inline std::int64_t pix(const Observation& o) { return pix(o.F(), o.h, o.w); }

/// Number of tokens a query occupies in the coordinator context.
inline std::int64_t token_count(const world::Query& q) {
  return static_cast<std::int64_t>(q.tokens.size());
}

/// Exact coordinator context load: M agents' K tokens plus the query.
inline std::int64_t context_load(int M, int K, const world::Query& q) {
  return static_cast<std::int64_t>(M) * K + token_count(q);
}

/// Validates a plan against both budgets before any model work happens.
/// `query_tokens` must be the longest query the run can see.
void check_plan(const ObservationPlan& plan, const PerceptionBudget& per,
                const CommunicationBudget& com, std::int64_t query_tokens);

/// Splits the video's frames into M contiguous spans of near-equal length
/// (inclusive bounds, longer spans first).
std::vector<std::pair<int, int>> partition(const world::SymbolicVideo& v, int M);

/// Rasterizes the scene state at frame t onto the full canvas and
/// area-averages down to (h, w). Returns a [3, h, w] tensor in [0, 1].
num::Tensor render_frame(const world::SymbolicVideo& v, int t, int h, int w);

/// Uniform-stride frame sampling over a span, then rendering at (h, w).
/// The first sampled index is the span start; for F > 1 the i-th index is
/// round(start + i*(len-1)/(F-1)); duplicate indices collapse, shrinking F.
/// Throws BudgetExceeded before rendering when F*h*w exceeds the budget.
Observation sample_and_resize(const world::SymbolicVideo& v,
                              std::pair<int, int> span, int F, int h, int w,
                              const PerceptionBudget& b, int agent = 0);

}  // namespace relay::budget
