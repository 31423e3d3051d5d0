#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relay/budget/budget.hpp"
#include "relay/numcore/ops.hpp"
#include "relay/numcore/param_store.hpp"
#include "relay/numcore/rng.hpp"
#include "relay/numcore/tape.hpp"
#include "relay/numcore/tensor.hpp"
#include "relay/worldgen/vocab.hpp"

namespace relay::agents {

/// Architecture knobs shared by the local encoder, the adaptor, the
/// coordinator and the caption head. Vocabulary sizes are snapshotted here so
/// a checkpoint is self-describing.
struct ModelConfig {
  int d_enc = 64;    // encoder width
  int d = 64;        // communication token width
  int d_adp = 128;   // adaptor hidden width
  int n_enc = 2;     // encoder blocks
  int n_coord = 4;   // coordinator blocks
  int n_cap = 2;     // caption decoder blocks
  int patch = 4;     // square patch edge, must divide h and w
  int K = 32;        // communication tokens per agent
  int mlp_mult = 4;  // MLP hidden = mlp_mult * width

  int query_vocab = world::qt::kCount;
  int caption_vocab = world::ct::kCount;
  int answer_vocab = world::ans::kCount;

  bool operator==(const ModelConfig&) const = default;
};

/// Throws ConfigError on non-positive dimensions or empty vocabularies.
void check_model_config(const ModelConfig& cfg);

/// Patch tokens one frame contributes at (h, w). Throws ConfigError when the
/// patch size does not tile the frame.
int patch_count(const ModelConfig& cfg, int h, int w);

/// Fresh parameter store for every component, deterministic in `rng`.
/// Insertion order is fixed, so optimiser state and checkpoints line up
/// across runs with the same config.
num::ParamStore init_params(const ModelConfig& cfg, num::Rng& rng);

/// What one agent sends: K rows of width d, plus where its segment sat in
/// the video. The row-norm bound (sqrt(d) * 10) is enforced at creation.
struct CommTokens {
  num::Var values;              // [K x d]
  int agent = 0;
  std::pair<int, int> span{0, 0};
};

/// Discrete message for the text-channel baseline.
struct TextMessage {
  std::vector<int> tokens;      // caption-vocab ids, at most K of them
  int agent = 0;
  std::pair<int, int> span{0, 0};
  int decoded_tokens = 0;       // full greedy length before truncation to K
};

/// Runs the shared local encoder on one observation: patch-embeds the
/// sampled frames, appends the embedded query and K slot tokens, applies the
/// encoder blocks with full attention, and maps the final slot states
/// through the adaptor. Always returns exactly K x d, whatever F, h, w or
/// the query length.
CommTokens encode_local(num::Tape& t, const num::Binding& P,
                        const ModelConfig& cfg, const budget::Observation& obs,
                        const world::Query& q);

/// Fuses agent messages under the communication budget: checks
/// M*K + |q| <= max_tokens before any attention runs, adds a
/// segment-position embedding to every block, appends the embedded query and
/// one readout token, and returns answer logits [1 x answer_vocab] read off
/// the readout position. `total_frames` is the video length the spans refer
/// to. Throws ContractError when `comms` is empty.
num::Var coordinate(num::Tape& t, const num::Binding& P, const ModelConfig& cfg,
                    const world::Query& q, const std::vector<CommTokens>& comms,
                    int total_frames, const budget::CommunicationBudget& com);

/// Same fusion for the text-channel baseline: each message is embedded with
/// the caption token table in place of latent rows. The budget gate uses the
/// actual token count sum(|m_i|) + |q|. Messages longer than K are rejected.
num::Var coordinate_text(num::Tape& t, const num::Binding& P,
                         const ModelConfig& cfg, const world::Query& q,
                         const std::vector<TextMessage>& messages,
                         int total_frames,
                         const budget::CommunicationBudget& com);

/// Next-token logits [1 x caption_vocab] after `prefix`, conditioned on the
/// communication block via cross-attention. The prefix may be empty; longer
/// than the caption cap throws ContractError.
num::Var decode_caption(num::Tape& t, const num::Binding& P,
                        const ModelConfig& cfg, num::Var comm,
                        const std::vector<int>& prefix);

/// Mean teacher-forced cross entropy of `target` (content tokens, no
/// BOS/EOS) under the caption head, conditioned on `comm`.
num::Var caption_loss(num::Tape& t, const num::Binding& P,
                      const ModelConfig& cfg, num::Var comm,
                      const std::vector<int>& target);

/// Greedy decode until EOS or `max_tokens`, whichever comes first. Returns
/// content tokens only.
std::vector<int> greedy_caption(num::Tape& t, const num::Binding& P,
                                const ModelConfig& cfg, num::Var comm,
                                int max_tokens = world::kCaptionCap);

/// The text channel an agent actually gets to use: encode the observation,
/// greedy-decode at most K discrete caption tokens from it. Runs on its own
/// gradient-free tape, so nothing differentiable crosses the channel.
TextMessage text_channel_encode(const ModelConfig& cfg,
                                const num::ParamStore& params,
                                const budget::Observation& obs,
                                const world::Query& q);

/// Scalars moved if an agent shipped its full encoder state instead of K
/// communication tokens: F frames times patch tokens per frame times d_enc.
std::int64_t state_share_cost(int F, int patches_per_frame, int d_enc);
std::int64_t state_share_cost(const ModelConfig& cfg,
                              const budget::Observation& obs);

/// Scalars a latent channel moves per agent: K * d.
inline std::int64_t latent_channel_cost(const ModelConfig& cfg) {
  return static_cast<std::int64_t>(cfg.K) * cfg.d;
}

}  // namespace relay::agents
