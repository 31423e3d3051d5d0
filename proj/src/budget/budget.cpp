#include "relay/budget/budget.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace relay::budget {

void check_plan(const ObservationPlan& plan, const PerceptionBudget& per,
                const CommunicationBudget& com, std::int64_t query_tokens) {
  if (plan.M < 1) throw ConfigError("plan: M < 1");
  if (plan.F < 1) throw ConfigError("plan: F < 1");
  if (plan.h < 4 || plan.w < 4) throw ConfigError("plan: resolution below 4x4");
  if (plan.K < 1) throw ConfigError("plan: K < 1");
  if (per.max_pixels < 1) throw ConfigError("perception budget < 1 pixel");
  if (com.max_tokens < 1) throw ConfigError("communication budget < 1 token");
  if (query_tokens < 1) throw ConfigError("plan: query shorter than 1 token");

  const std::int64_t need_pix = pix(plan.F, plan.h, plan.w);
  if (need_pix > per.max_pixels) {
    throw BudgetExceeded(
        BudgetExceeded::Resource::Pixels, need_pix, per.max_pixels,
        "plan needs " + std::to_string(need_pix) + " pixels per agent, budget is " +
            std::to_string(per.max_pixels));
  }
  const std::int64_t need_tok =
      static_cast<std::int64_t>(plan.M) * plan.K + query_tokens;
  if (need_tok > com.max_tokens) {
    throw BudgetExceeded(
        BudgetExceeded::Resource::Tokens, need_tok, com.max_tokens,
        "plan needs " + std::to_string(need_tok) + " context tokens, budget is " +
            std::to_string(com.max_tokens));
  }
}

std::vector<std::pair<int, int>> partition(const world::SymbolicVideo& v, int M) {
  if (M < 1 || M > v.T) {
    throw ConfigError("partition: cannot split " + std::to_string(v.T) +
                      " frames across " + std::to_string(M) + " agents");
  }
  return world::even_spans(v.T, M);
}

namespace {

// Area-average one channel from (H, W) down to (h, w) with fractional
// overlap, so non-divisor targets like 32 -> 12 stay exact.
void downsample_channel(const double* src, int H, int W, double* dst, int h,
                        int w) {
  const double sr = static_cast<double>(H) / h;
  const double sc = static_cast<double>(W) / w;
  for (int i = 0; i < h; ++i) {
    const double r0 = i * sr, r1 = (i + 1) * sr;
    for (int j = 0; j < w; ++j) {
      const double c0 = j * sc, c1 = (j + 1) * sc;
      double acc = 0.0, wsum = 0.0;
      for (int r = static_cast<int>(r0); r < H && r < r1; ++r) {
        const double wr = std::min<double>(r + 1, r1) - std::max<double>(r, r0);
        if (wr <= 0.0) continue;
        for (int c = static_cast<int>(c0); c < W && c < c1; ++c) {
          const double wc = std::min<double>(c + 1, c1) - std::max<double>(c, c0);
          if (wc <= 0.0) continue;
          acc += wr * wc * src[static_cast<std::size_t>(r) * W + c];
          wsum += wr * wc;
        }
      }
      // dividing by the accumulated weight (rather than sr*sc) keeps a
      // saturated region at exactly 1.0 despite fractional-overlap rounding
      dst[static_cast<std::size_t>(i) * w + j] = acc / wsum;
    }
  }
}

}  // namespace

num::Tensor render_frame(const world::SymbolicVideo& v, int t, int h, int w) {
  if (h < 4 || w < 4) throw ConfigError("render_frame: resolution below 4x4");
  if (t < 0 || t >= v.T) {
    throw IndexError("render_frame: frame " + std::to_string(t) +
                     " outside [0, " + std::to_string(v.T) + ")");
  }
  num::Tensor canvas({3, v.H, v.W});
  const std::int64_t plane = static_cast<std::int64_t>(v.H) * v.W;
  for (const world::SymbolicObject& o : v.objects) {
    if (!o.alive_at(t)) continue;
    const std::array<double, 3> rgb = world::color_rgb(v.color_at(o, t));
    const int e = o.edge();
    for (int r = 0; r < e; ++r) {
      for (int c = 0; c < e; ++c) {
        if (!world::shape_pixel(o.shape, o.size, r, c)) continue;
        const std::int64_t px =
            static_cast<std::int64_t>(o.row + r) * v.W + (o.col + c);
        for (int ch = 0; ch < 3; ++ch) canvas[ch * plane + px] = rgb[ch];
      }
    }
  }
  if (h == v.H && w == v.W) return canvas;

  num::Tensor out({3, h, w});
  const std::int64_t oplane = static_cast<std::int64_t>(h) * w;
  for (int ch = 0; ch < 3; ++ch) {
    downsample_channel(canvas.data() + ch * plane, v.H, v.W,
                       out.data() + ch * oplane, h, w);
  }
  return out;
}

Observation sample_and_resize(const world::SymbolicVideo& v,
                              std::pair<int, int> span, int F, int h, int w,
                              const PerceptionBudget& b, int agent) {
  const auto [first, last] = span;
  if (first < 0 || last < first || last >= v.T) {
    throw ContractError("sample_and_resize: span [" + std::to_string(first) +
                        ", " + std::to_string(last) + "] outside the video");
  }
  if (F < 1) throw ConfigError("sample_and_resize: F < 1");
  const std::int64_t need = pix(F, h, w);
  if (need > b.max_pixels) {
    throw BudgetExceeded(BudgetExceeded::Resource::Pixels, need, b.max_pixels,
                         "observation needs " + std::to_string(need) +
                             " pixels, budget is " +
                             std::to_string(b.max_pixels));
  }

  const int len = last - first + 1;
  std::vector<int> idx;
  if (F == 1) {
    idx.push_back(first);
  } else {
    for (int i = 0; i < F; ++i) {
      // round(first + i*(len-1)/(F-1)) in exact integer arithmetic
      const int off = (2 * i * (len - 1) + (F - 1)) / (2 * (F - 1));
      const int t = first + off;
      if (idx.empty() || idx.back() != t) idx.push_back(t);
    }
  }

  Observation obs;
  obs.first = first;
  obs.last = last;
  obs.h = h;
  obs.w = w;
  obs.agent = agent;
  obs.source_frames = idx;
  obs.frames.reserve(idx.size());
  for (int t : idx) obs.frames.push_back(render_frame(v, t, h, w));
  return obs;
}

}  // namespace relay::budget
