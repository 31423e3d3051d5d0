#include "relay/agents/model.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relay/errors.hpp"

namespace relay::agents {

using num::Binding;
using num::ParamStore;
using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

constexpr int kSegFeat = 10;  // sinusoidal features describing a segment span

// ---- deterministic positional features -----------------------------------

/// Classic interleaved sin/cos over an integer position index.
void write_sinusoid(double pos, double* row, int dim) {
  for (int i = 0; i < dim; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
    row[i] = std::sin(pos * freq);
    if (i + 1 < dim) row[i + 1] = std::cos(pos * freq);
  }
}

Tensor index_positions(int len, int dim) {
  Tensor pe({len, dim});
  for (int p = 0; p < len; ++p) write_sinusoid(p, pe.data() + p * dim, dim);
  return pe;
}

/// Per patch token: sinusoid of the source frame index plus low-frequency
/// waves over the normalised patch centre. Normalised coordinates keep the
/// features comparable across render resolutions.
Tensor patch_positions(const budget::Observation& obs, int patch, int dim) {
  const int nr = obs.h / patch;
  const int nc = obs.w / patch;
  const int per_frame = nr * nc;
  Tensor pe({obs.F() * per_frame, dim});
  for (int f = 0; f < obs.F(); ++f) {
    for (int pr = 0; pr < nr; ++pr) {
      for (int pc = 0; pc < nc; ++pc) {
        double* row = pe.data() + (f * per_frame + pr * nc + pc) * dim;
        write_sinusoid(obs.source_frames[static_cast<std::size_t>(f)], row, dim);
        const double u = (pr + 0.5) / nr;
        const double v = (pc + 0.5) / nc;
        const double pi = 3.14159265358979323846;
        for (int i = 0; i + 3 < dim; i += 4) {
          const double k = 1.0 + i / 4;
          row[i] += std::sin(pi * k * u);
          row[i + 1] += std::cos(pi * k * u);
          row[i + 2] += std::sin(pi * k * v);
          row[i + 3] += std::cos(pi * k * v);
        }
      }
    }
  }
  return pe;
}

/// Smooth features of where a segment sits in the video, so the coordinator
/// generalises to agent counts it never trained with. Uses the span centre
/// as a fraction of the whole video.
Tensor segment_features(std::pair<int, int> span, int total_frames) {
  if (total_frames < 1 || span.first < 0 || span.second < span.first ||
      span.second >= total_frames) {
    throw ContractError("segment span [" + std::to_string(span.first) + ", " +
                        std::to_string(span.second) + "] outside video of " +
                        std::to_string(total_frames) + " frames");
  }
  const double u = (span.first + span.second + 1.0) / (2.0 * total_frames);
  const double pi = 3.14159265358979323846;
  Tensor f({1, kSegFeat});
  for (int k = 0; k < kSegFeat / 2; ++k) {
    f[2 * k] = std::sin(pi * (k + 1) * u);
    f[2 * k + 1] = std::cos(pi * (k + 1) * u);
  }
  return f;
}

// ---- parameter creation ----------------------------------------------------

void add_normal(ParamStore& s, Rng& rng, const std::string& name, int r, int c,
                double std_dev = 0.02) {
  Tensor t({r, c});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, std_dev);
  s.add(name, std::move(t));
}

void add_zeros(ParamStore& s, const std::string& name, int n) {
  s.add(name, Tensor({1, n}));
}

void add_ones(ParamStore& s, const std::string& name, int n) {
  s.add(name, Tensor::full({1, n}, 1.0));
}

void add_block(ParamStore& s, Rng& rng, const std::string& pfx, int width,
               int mlp_mult) {
  add_ones(s, pfx + ".ln1.g", width);
  add_zeros(s, pfx + ".ln1.b", width);
  for (const char* m : {"wq", "wk", "wv", "wo"})
    add_normal(s, rng, pfx + ".attn." + m, width, width);
  for (const char* b : {"bq", "bk", "bv", "bo"})
    add_zeros(s, pfx + ".attn." + b, width);
  add_ones(s, pfx + ".ln2.g", width);
  add_zeros(s, pfx + ".ln2.b", width);
  add_normal(s, rng, pfx + ".mlp.w1", width, width * mlp_mult);
  add_zeros(s, pfx + ".mlp.b1", width * mlp_mult);
  add_normal(s, rng, pfx + ".mlp.w2", width * mlp_mult, width);
  add_zeros(s, pfx + ".mlp.b2", width);
}

void add_cross(ParamStore& s, Rng& rng, const std::string& pfx, int width) {
  add_ones(s, pfx + ".lnx.g", width);
  add_zeros(s, pfx + ".lnx.b", width);
  for (const char* m : {"wq", "wk", "wv", "wo"})
    add_normal(s, rng, pfx + ".cross." + m, width, width);
  for (const char* b : {"bq", "bk", "bv", "bo"})
    add_zeros(s, pfx + ".cross." + b, width);
}

// ---- forward pieces --------------------------------------------------------

Var proj(Tape& t, const Binding& P, const std::string& pfx, const char* which,
         Var x) {
  return num::add_rowvec(t, num::matmul(t, x, P[pfx + ".w" + which]),
                         P[pfx + ".b" + which]);
}

/// Pre-LN residual block: x += attn(LN(x)); x += mlp(LN(x)).
Var block(Tape& t, const Binding& P, const std::string& pfx, Var x,
          const num::AttnMask& mask) {
  Var h = num::layernorm(t, x, P[pfx + ".ln1.g"], P[pfx + ".ln1.b"]);
  Var a = num::attention(t, proj(t, P, pfx + ".attn", "q", h),
                         proj(t, P, pfx + ".attn", "k", h),
                         proj(t, P, pfx + ".attn", "v", h), mask);
  x = num::add(t, x, proj(t, P, pfx + ".attn", "o", a));
  Var h2 = num::layernorm(t, x, P[pfx + ".ln2.g"], P[pfx + ".ln2.b"]);
  Var m = num::relu(
      t, num::add_rowvec(t, num::matmul(t, h2, P[pfx + ".mlp.w1"]),
                         P[pfx + ".mlp.b1"]));
  m = num::add_rowvec(t, num::matmul(t, m, P[pfx + ".mlp.w2"]),
                      P[pfx + ".mlp.b2"]);
  return num::add(t, x, m);
}

/// Decoder block: causal self-attention, cross-attention onto `mem`, MLP.
Var dec_block(Tape& t, const Binding& P, const std::string& pfx, Var x,
              Var mem, const num::AttnMask& causal) {
  Var h = num::layernorm(t, x, P[pfx + ".ln1.g"], P[pfx + ".ln1.b"]);
  Var a = num::attention(t, proj(t, P, pfx + ".attn", "q", h),
                         proj(t, P, pfx + ".attn", "k", h),
                         proj(t, P, pfx + ".attn", "v", h), causal);
  x = num::add(t, x, proj(t, P, pfx + ".attn", "o", a));
  Var hx = num::layernorm(t, x, P[pfx + ".lnx.g"], P[pfx + ".lnx.b"]);
  const num::AttnMask open = num::AttnMask::full(
      t.value(x).rows(), t.value(mem).rows());
  Var c = num::attention(t, proj(t, P, pfx + ".cross", "q", hx),
                         proj(t, P, pfx + ".cross", "k", mem),
                         proj(t, P, pfx + ".cross", "v", mem), open);
  x = num::add(t, x, proj(t, P, pfx + ".cross", "o", c));
  Var h2 = num::layernorm(t, x, P[pfx + ".ln2.g"], P[pfx + ".ln2.b"]);
  Var m = num::relu(
      t, num::add_rowvec(t, num::matmul(t, h2, P[pfx + ".mlp.w1"]),
                         P[pfx + ".mlp.b1"]));
  m = num::add_rowvec(t, num::matmul(t, m, P[pfx + ".mlp.w2"]),
                      P[pfx + ".mlp.b2"]);
  return num::add(t, x, m);
}

void check_token_range(const std::vector<int>& toks, int vocab,
                       const char* what) {
  for (int id : toks) {
    if (id < 0 || id >= vocab) {
      throw IndexError(std::string(what) + " token " + std::to_string(id) +
                       " outside [0, " + std::to_string(vocab) + ")");
    }
  }
}

/// Embeds token ids and adds index positions.
Var embed_tokens(Tape& t, const Binding& P, const std::string& table,
                 const std::vector<int>& ids, int dim) {
  Var e = num::gather_rows(t, P[table], ids);
  return num::add(t, e, t.input(index_positions(static_cast<int>(ids.size()),
                                                dim)));
}

/// Runs the caption decoder over [BOS, prefix...] and returns logits for
/// every position, [len+1 x caption_vocab].
Var caption_forward(Tape& t, const Binding& P, const ModelConfig& cfg,
                    Var comm, const std::vector<int>& prefix) {
  if (static_cast<int>(prefix.size()) > world::kCaptionCap) {
    throw ContractError("caption prefix of " + std::to_string(prefix.size()) +
                        " tokens exceeds the cap of " +
                        std::to_string(world::kCaptionCap));
  }
  check_token_range(prefix, cfg.caption_vocab, "caption");
  const Tensor& cv = t.value(comm);
  if (cv.rows() != cfg.K || cv.cols() != cfg.d) {
    throw DimensionError("caption head expects communication block [" +
                         std::to_string(cfg.K) + "x" + std::to_string(cfg.d) +
                         "], got " + Tensor::shape_string(cv.shape()));
  }
  std::vector<int> ids;
  ids.reserve(prefix.size() + 1);
  ids.push_back(world::ct::kBos);
  ids.insert(ids.end(), prefix.begin(), prefix.end());
  Var x = embed_tokens(t, P, "cap.tok_emb", ids, cfg.d);
  const num::AttnMask causal =
      num::AttnMask::causal(static_cast<int>(ids.size()));
  for (int i = 0; i < cfg.n_cap; ++i)
    x = dec_block(t, P, "cap.b" + std::to_string(i), x, comm, causal);
  x = num::layernorm(t, x, P["cap.final_ln.g"], P["cap.final_ln.b"]);
  return num::add_rowvec(t, num::matmul(t, x, P["cap.out.w"]), P["cap.out.b"]);
}

/// Shared tail of coordinate / coordinate_text: blocks + query + readout.
Var fuse(Tape& t, const Binding& P, const ModelConfig& cfg,
         const world::Query& q, std::vector<Var> parts) {
  check_token_range(q.tokens, cfg.query_vocab, "query");
  parts.push_back(embed_tokens(t, P, "coord.query_emb", q.tokens, cfg.d));
  parts.push_back(P["coord.readout"]);
  Var x = num::concat_rows(t, parts);
  const int len = t.value(x).rows();
  const num::AttnMask open = num::AttnMask::full(len, len);
  for (int i = 0; i < cfg.n_coord; ++i)
    x = block(t, P, "coord.b" + std::to_string(i), x, open);
  x = num::layernorm(t, x, P["coord.final_ln.g"], P["coord.final_ln.b"]);
  Var readout = num::slice_rows(t, x, len - 1, 1);
  return num::add_rowvec(t, num::matmul(t, readout, P["coord.answer.w"]),
                         P["coord.answer.b"]);
}

Var segment_embedding(Tape& t, const Binding& P, std::pair<int, int> span,
                      int total_frames) {
  return num::matmul(t, t.input(segment_features(span, total_frames)),
                     P["coord.seg_proj"]);
}

}  // namespace

void check_model_config(const ModelConfig& cfg) {
  auto positive = [](int v, const char* name) {
    if (v < 1)
      throw ConfigError(std::string(name) + " must be positive, got " +
                        std::to_string(v));
  };
  positive(cfg.d_enc, "d_enc");
  positive(cfg.d, "d");
  positive(cfg.d_adp, "d_adp");
  positive(cfg.n_enc, "n_enc");
  positive(cfg.n_coord, "n_coord");
  positive(cfg.n_cap, "n_cap");
  positive(cfg.patch, "patch");
  positive(cfg.K, "K");
  positive(cfg.mlp_mult, "mlp_mult");
  positive(cfg.query_vocab, "query_vocab");
  positive(cfg.caption_vocab, "caption_vocab");
  positive(cfg.answer_vocab, "answer_vocab");
  if (cfg.d_enc % 4 != 0 || cfg.d % 4 != 0) {
    throw ConfigError("widths must be multiples of 4 for positional features");
  }
}

int patch_count(const ModelConfig& cfg, int h, int w) {
  if (h < 1 || w < 1 || h % cfg.patch != 0 || w % cfg.patch != 0) {
    throw ConfigError("frame " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not tiled by patch size " +
                      std::to_string(cfg.patch));
  }
  return (h / cfg.patch) * (w / cfg.patch);
}

ParamStore init_params(const ModelConfig& cfg, Rng& rng) {
  check_model_config(cfg);
  ParamStore s;
  // Local encoder, one set of weights for every agent.
  add_normal(s, rng, "enc.patch.w", cfg.patch * cfg.patch * 3, cfg.d_enc);
  add_zeros(s, "enc.patch.b", cfg.d_enc);
  add_normal(s, rng, "enc.query_emb", cfg.query_vocab, cfg.d_enc);
  add_normal(s, rng, "enc.slots", cfg.K, cfg.d_enc);
  for (int i = 0; i < cfg.n_enc; ++i)
    add_block(s, rng, "enc.b" + std::to_string(i), cfg.d_enc, cfg.mlp_mult);
  add_ones(s, "enc.final_ln.g", cfg.d_enc);
  add_zeros(s, "enc.final_ln.b", cfg.d_enc);
  // Adaptor from encoder width to channel width.
  add_normal(s, rng, "adp.w1", cfg.d_enc, cfg.d_adp);
  add_zeros(s, "adp.b1", cfg.d_adp);
  add_normal(s, rng, "adp.w2", cfg.d_adp, cfg.d);
  add_zeros(s, "adp.b2", cfg.d);
  add_ones(s, "adp.ln.g", cfg.d);
  add_zeros(s, "adp.ln.b", cfg.d);
  // Coordinator.
  add_normal(s, rng, "coord.query_emb", cfg.query_vocab, cfg.d);
  add_normal(s, rng, "coord.seg_proj", kSegFeat, cfg.d);
  add_normal(s, rng, "coord.readout", 1, cfg.d);
  for (int i = 0; i < cfg.n_coord; ++i)
    add_block(s, rng, "coord.b" + std::to_string(i), cfg.d, cfg.mlp_mult);
  add_ones(s, "coord.final_ln.g", cfg.d);
  add_zeros(s, "coord.final_ln.b", cfg.d);
  add_normal(s, rng, "coord.answer.w", cfg.d, cfg.answer_vocab);
  add_zeros(s, "coord.answer.b", cfg.answer_vocab);
  // Caption head; its token table doubles as the text-channel embedding.
  add_normal(s, rng, "cap.tok_emb", cfg.caption_vocab, cfg.d);
  for (int i = 0; i < cfg.n_cap; ++i) {
    const std::string pfx = "cap.b" + std::to_string(i);
    add_block(s, rng, pfx, cfg.d, cfg.mlp_mult);
    add_cross(s, rng, pfx, cfg.d);
  }
  add_ones(s, "cap.final_ln.g", cfg.d);
  add_zeros(s, "cap.final_ln.b", cfg.d);
  add_normal(s, rng, "cap.out.w", cfg.d, cfg.caption_vocab);
  add_zeros(s, "cap.out.b", cfg.caption_vocab);
  return s;
}

CommTokens encode_local(Tape& t, const Binding& P, const ModelConfig& cfg,
                        const budget::Observation& obs, const world::Query& q) {
  if (obs.F() < 1) throw ContractError("encode_local: observation has no frames");
  if (q.tokens.empty()) throw ContractError("encode_local: empty query");
  check_token_range(q.tokens, cfg.query_vocab, "query");
  const int per_frame = patch_count(cfg, obs.h, obs.w);
  const int p = cfg.patch;
  const int n_patch = obs.F() * per_frame;

  // One row per patch: channel-major p*p pixels, a single matmul embeds all.
  Tensor patches({n_patch, p * p * 3});
  for (int f = 0; f < obs.F(); ++f) {
    const Tensor& frame = obs.frames[static_cast<std::size_t>(f)];
    if (frame.rank() != 3 || frame.dim(0) != 3 || frame.dim(1) != obs.h ||
        frame.dim(2) != obs.w) {
      throw DimensionError("observation frame has shape " +
                           Tensor::shape_string(frame.shape()) + ", expected [3x" +
                           std::to_string(obs.h) + "x" + std::to_string(obs.w) +
                           "]");
    }
    const int nc = obs.w / p;
    for (int pr = 0; pr < obs.h / p; ++pr) {
      for (int pc = 0; pc < nc; ++pc) {
        double* row = patches.data() +
                      (static_cast<std::int64_t>(f) * per_frame + pr * nc + pc) *
                          (p * p * 3);
        int k = 0;
        for (int ch = 0; ch < 3; ++ch)
          for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c)
              row[k++] = frame[(static_cast<std::int64_t>(ch) * obs.h +
                                pr * p + r) *
                                   obs.w +
                               pc * p + c];
      }
    }
  }
  Var px = num::add_rowvec(t, num::matmul(t, t.input(std::move(patches)),
                                          P["enc.patch.w"]),
                           P["enc.patch.b"]);
  px = num::add(t, px, t.input(patch_positions(obs, p, cfg.d_enc)));
  Var qx = embed_tokens(t, P, "enc.query_emb", q.tokens, cfg.d_enc);
  Var x = num::concat_rows(t, {px, qx, P["enc.slots"]});

  const int len = n_patch + static_cast<int>(q.tokens.size()) + cfg.K;
  const num::AttnMask open = num::AttnMask::full(len, len);
  for (int i = 0; i < cfg.n_enc; ++i)
    x = block(t, P, "enc.b" + std::to_string(i), x, open);
  x = num::layernorm(t, x, P["enc.final_ln.g"], P["enc.final_ln.b"]);

  Var slots = num::slice_rows(t, x, len - cfg.K, cfg.K);
  Var a = num::relu(t, num::add_rowvec(t, num::matmul(t, slots, P["adp.w1"]),
                                       P["adp.b1"]));
  a = num::add_rowvec(t, num::matmul(t, a, P["adp.w2"]), P["adp.b2"]);
  a = num::layernorm(t, a, P["adp.ln.g"], P["adp.ln.b"]);

  const Tensor& out = t.value(a);
  const double bound = std::sqrt(static_cast<double>(cfg.d)) * 10.0;
  for (int r = 0; r < cfg.K; ++r) {
    double sq = 0.0;
    for (int c = 0; c < cfg.d; ++c) sq += out.at(r, c) * out.at(r, c);
    if (!(std::sqrt(sq) <= bound)) {
      throw ContractError("communication token " + std::to_string(r) +
                          " has norm " + std::to_string(std::sqrt(sq)) +
                          ", bound is " + std::to_string(bound));
    }
  }
  return CommTokens{a, obs.agent, {obs.first, obs.last}};
}

Var coordinate(Tape& t, const Binding& P, const ModelConfig& cfg,
               const world::Query& q, const std::vector<CommTokens>& comms,
               int total_frames, const budget::CommunicationBudget& com) {
  if (comms.empty())
    throw ContractError("coordinate: no communication tokens supplied");
  const int M = static_cast<int>(comms.size());
  const std::int64_t load = budget::context_load(M, cfg.K, q);
  if (load > com.max_tokens) {
    throw BudgetExceeded(BudgetExceeded::Resource::Tokens, load,
                         com.max_tokens,
                         std::to_string(M) + " agents at K=" +
                             std::to_string(cfg.K) + " plus a " +
                             std::to_string(q.tokens.size()) +
                             "-token query need " + std::to_string(load) +
                             " context tokens, budget is " +
                             std::to_string(com.max_tokens));
  }
  std::vector<Var> parts;
  parts.reserve(comms.size());
  for (const CommTokens& c : comms) {
    const Tensor& v = t.value(c.values);
    if (v.rows() != cfg.K || v.cols() != cfg.d) {
      throw DimensionError("agent " + std::to_string(c.agent) +
                           " sent a block of shape " +
                           Tensor::shape_string(v.shape()) + ", expected [" +
                           std::to_string(cfg.K) + "x" + std::to_string(cfg.d) +
                           "]");
    }
    parts.push_back(num::add_rowvec(
        t, c.values, segment_embedding(t, P, c.span, total_frames)));
  }
  return fuse(t, P, cfg, q, std::move(parts));
}

Var coordinate_text(Tape& t, const Binding& P, const ModelConfig& cfg,
                    const world::Query& q,
                    const std::vector<TextMessage>& messages, int total_frames,
                    const budget::CommunicationBudget& com) {
  if (messages.empty())
    throw ContractError("coordinate_text: no messages supplied");
  std::int64_t load = budget::token_count(q);
  for (const TextMessage& m : messages) {
    if (static_cast<int>(m.tokens.size()) > cfg.K) {
      throw ContractError("agent " + std::to_string(m.agent) + " message of " +
                          std::to_string(m.tokens.size()) +
                          " tokens exceeds the channel width K=" +
                          std::to_string(cfg.K));
    }
    check_token_range(m.tokens, cfg.caption_vocab, "message");
    load += static_cast<std::int64_t>(m.tokens.size());
  }
  if (load > com.max_tokens) {
    throw BudgetExceeded(BudgetExceeded::Resource::Tokens, load, com.max_tokens,
                         "text messages plus query need " +
                             std::to_string(load) + " context tokens, budget is " +
                             std::to_string(com.max_tokens));
  }
  std::vector<Var> parts;
  for (const TextMessage& m : messages) {
    if (m.tokens.empty()) continue;  // a silent agent contributes nothing
    Var e = embed_tokens(t, P, "cap.tok_emb", m.tokens, cfg.d);
    parts.push_back(num::add_rowvec(
        t, e, segment_embedding(t, P, m.span, total_frames)));
  }
  return fuse(t, P, cfg, q, std::move(parts));
}

Var decode_caption(Tape& t, const Binding& P, const ModelConfig& cfg, Var comm,
                   const std::vector<int>& prefix) {
  Var logits = caption_forward(t, P, cfg, comm, prefix);
  return num::slice_rows(t, logits, t.value(logits).rows() - 1, 1);
}

Var caption_loss(Tape& t, const Binding& P, const ModelConfig& cfg, Var comm,
                 const std::vector<int>& target) {
  Var logits = caption_forward(t, P, cfg, comm, target);
  std::vector<int> shifted(target.begin(), target.end());
  shifted.push_back(world::ct::kEos);
  return num::cross_entropy_rows(t, logits, std::move(shifted));
}

std::vector<int> greedy_caption(Tape& t, const Binding& P,
                                const ModelConfig& cfg, Var comm,
                                int max_tokens) {
  if (max_tokens < 0) throw ConfigError("greedy_caption: negative cap");
  std::vector<int> out;
  const int cap = std::min(max_tokens, world::kCaptionCap);
  while (static_cast<int>(out.size()) < cap) {
    Var logits = decode_caption(t, P, cfg, comm, out);
    const Tensor& row = t.value(logits);
    int best = 0;
    for (int i = 1; i < cfg.caption_vocab; ++i)
      if (row[i] > row[best]) best = i;
    if (best == world::ct::kEos) break;
    out.push_back(best);
  }
  return out;
}

TextMessage text_channel_encode(const ModelConfig& cfg,
                                const num::ParamStore& params,
                                const budget::Observation& obs,
                                const world::Query& q) {
  // The channel carries symbols, not activations: decode on a private
  // gradient-free tape so training never differentiates through it.
  Tape t;
  t.set_grad_enabled(false);
  Binding P(t, params);
  CommTokens c = encode_local(t, P, cfg, obs, q);
  // Decode what the agent would say unconstrained, then truncate to the K
  // tokens the channel actually carries; the gap is the cost of discreteness.
  std::vector<int> msg = greedy_caption(t, P, cfg, c.values);
  const int decoded = static_cast<int>(msg.size());
  if (decoded > cfg.K) msg.resize(static_cast<std::size_t>(cfg.K));
  return TextMessage{std::move(msg), obs.agent, {obs.first, obs.last}, decoded};
}

std::int64_t state_share_cost(int F, int patches_per_frame, int d_enc) {
  if (F < 1 || patches_per_frame < 1 || d_enc < 1) {
    throw ConfigError("state_share_cost: all factors must be positive");
  }
  return static_cast<std::int64_t>(F) * patches_per_frame * d_enc;
}

std::int64_t state_share_cost(const ModelConfig& cfg,
                              const budget::Observation& obs) {
  return state_share_cost(obs.F(), patch_count(cfg, obs.h, obs.w), cfg.d_enc);
}

}  // namespace relay::agents
