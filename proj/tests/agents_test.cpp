#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "relay/agents/checkpoint.hpp"
#include "relay/agents/model.hpp"
#include "relay/budget/budget.hpp"
#include "relay/errors.hpp"
#include "relay/numcore/adam.hpp"
#include "relay/numcore/ops.hpp"
#include "relay/worldgen/generate.hpp"

using namespace relay;
using agents::CommTokens;
using agents::ModelConfig;
using agents::TextMessage;
using num::Binding;
using num::ParamStore;
using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.d_enc = 8;
  cfg.d = 8;
  cfg.d_adp = 12;
  cfg.n_enc = 1;
  cfg.n_coord = 1;
  cfg.n_cap = 1;
  cfg.patch = 4;
  cfg.K = 2;
  cfg.mlp_mult = 2;
  return cfg;
}

world::SymbolicVideo demo_video(int T, std::uint64_t seed = 7) {
  Rng rng(seed);
  world::GenConfig g;
  g.T = T;
  g.difficulty = world::Difficulty::Easy;
  return world::generate_video(rng, g);
}

budget::Observation observe(const world::SymbolicVideo& v,
                            std::pair<int, int> span, int F, int h, int w,
                            int agent = 0) {
  budget::PerceptionBudget big{1 << 20};
  return budget::sample_and_resize(v, span, F, h, w, big, agent);
}

double frob_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    s += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("communication block is K x d whatever the observation looks like") {
  ModelConfig cfg = micro_config();
  Rng rng(1);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(16);
  world::Query q = world::count_query(world::Shape::Square);

  for (int F : {1, 3, 7}) {
    for (int hw : {8, 16, 24}) {
      Tape t;
      Binding P(t, store);
      budget::Observation obs = observe(v, {0, 15}, F, hw, hw);
      CommTokens c = agents::encode_local(t, P, cfg, obs, q);
      CAPTURE(F);
      CAPTURE(hw);
      CHECK(t.value(c.values).rows() == cfg.K);
      CHECK(t.value(c.values).cols() == cfg.d);
      CHECK(t.value(c.values).all_finite());
    }
  }
  // Query length does not leak into the block shape either.
  for (const world::Query& query :
       {world::pad_query(),
        world::order_query(world::Color::Red, world::Shape::Square,
                           world::Color::Blue, world::Shape::Circle)}) {
    Tape t;
    Binding P(t, store);
    CommTokens c =
        agents::encode_local(t, P, cfg, observe(v, {0, 3}, 2, 8, 8), query);
    CHECK(t.value(c.values).rows() == cfg.K);
    CHECK(t.value(c.values).cols() == cfg.d);
  }
}

TEST_CASE("default config fills the budgeted observation shape") {
  ModelConfig cfg;  // 64-wide, K=32
  Rng rng(2);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(48);
  Tape t;
  Binding P(t, store);
  budget::Observation obs = observe(v, {0, 11}, 16, 16, 16);
  CHECK(budget::pix(obs) <= 4096);
  CommTokens c = agents::encode_local(t, P, cfg, obs, world::pad_query());
  CHECK(t.value(c.values).rows() == 32);
  CHECK(t.value(c.values).cols() == 64);
  CHECK(agents::latent_channel_cost(cfg) == 2048);
}

TEST_CASE("token row norms respect the adaptor bound") {
  ModelConfig cfg = micro_config();
  Rng rng(3);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(12, 11);
  Tape t;
  Binding P(t, store);
  CommTokens c = agents::encode_local(t, P, cfg, observe(v, {0, 11}, 4, 8, 8),
                                      world::count_query(world::Shape::Cross));
  const Tensor& val = t.value(c.values);
  const double bound = std::sqrt(static_cast<double>(cfg.d)) * 10.0;
  for (int r = 0; r < cfg.K; ++r) {
    double sq = 0.0;
    for (int col = 0; col < cfg.d; ++col) sq += val.at(r, col) * val.at(r, col);
    CHECK(std::sqrt(sq) <= bound);
  }
}

TEST_CASE("encoding is deterministic across tapes") {
  ModelConfig cfg = micro_config();
  Rng rng(4);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(10);
  world::Query q = world::existence_query(world::Color::Red, world::Shape::Circle);

  Tensor first, second;
  {
    Tape t;
    Binding P(t, store);
    first = t.value(
        agents::encode_local(t, P, cfg, observe(v, {0, 9}, 4, 8, 8), q).values);
  }
  {
    Tape t;
    Binding P(t, store);
    second = t.value(
        agents::encode_local(t, P, cfg, observe(v, {0, 9}, 4, 8, 8), q).values);
  }
  CHECK(frob_diff(first, second) == 0.0);
}

TEST_CASE("observation and query validation") {
  ModelConfig cfg = micro_config();
  Rng rng(5);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(10);
  Tape t;
  Binding P(t, store);

  budget::Observation empty;
  empty.h = empty.w = 8;
  CHECK_THROWS_AS(agents::encode_local(t, P, cfg, empty, world::pad_query()),
                  ContractError);

  budget::Observation obs = observe(v, {0, 9}, 2, 8, 8);
  world::Query no_tokens;
  no_tokens.tokens.clear();
  CHECK_THROWS_AS(agents::encode_local(t, P, cfg, obs, no_tokens),
                  ContractError);

  world::Query oob;
  oob.tokens = {world::qt::kCount};
  CHECK_THROWS_AS(agents::encode_local(t, P, cfg, obs, oob), IndexError);

  // 10x10 frames do not tile with 4x4 patches.
  budget::Observation bad = observe(v, {0, 9}, 2, 10, 10);
  CHECK_THROWS_AS(agents::encode_local(t, P, cfg, bad, world::pad_query()),
                  ConfigError);
}

TEST_CASE("coordinator answers from fused blocks and gates the budget first") {
  ModelConfig cfg = micro_config();
  Rng rng(6);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(16);
  world::Query q = world::count_query(world::Shape::Square);

  Tape t;
  Binding P(t, store);
  std::vector<CommTokens> comms;
  auto spans = budget::partition(v, 4);
  for (int m = 0; m < 4; ++m) {
    comms.push_back(agents::encode_local(
        t, P, cfg, observe(v, spans[static_cast<std::size_t>(m)], 3, 8, 8, m), q));
  }

  budget::CommunicationBudget com{256};
  Var logits = agents::coordinate(t, P, cfg, q, comms, v.T, com);
  CHECK(t.value(logits).rows() == 1);
  CHECK(t.value(logits).cols() == cfg.answer_vocab);
  CHECK(t.value(logits).all_finite());

  // Exactly at the limit is fine; one token under it is not, and the gate
  // fires before any node lands on the tape.
  budget::CommunicationBudget tight{budget::context_load(4, cfg.K, q)};
  CHECK_NOTHROW(agents::coordinate(t, P, cfg, q, comms, v.T, tight));
  budget::CommunicationBudget tighter{tight.max_tokens - 1};
  const int before = t.size();
  CHECK_THROWS_AS(agents::coordinate(t, P, cfg, q, comms, v.T, tighter),
                  BudgetExceeded);
  CHECK(t.size() == before);

  CHECK_THROWS_AS(agents::coordinate(t, P, cfg, q, {}, v.T, com),
                  ContractError);
}

TEST_CASE("six agents with a seven token query load 199 of 256") {
  ModelConfig cfg;
  cfg.K = 32;
  world::Query q = world::pad_query();
  q.tokens.assign(7, world::qt::kPad);
  CHECK(budget::context_load(6, cfg.K, q) == 199);
  CHECK(budget::context_load(6, cfg.K, q) <= 256);
}

TEST_CASE("permuting agents alongside their segment positions changes nothing") {
  ModelConfig cfg = micro_config();
  Rng rng(8);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(24, 3);
  world::Query q = world::attribute_color_query(world::Shape::Triangle);
  budget::CommunicationBudget com{256};
  auto spans = budget::partition(v, 3);

  auto run = [&](const std::vector<int>& order) {
    Tape t;
    Binding P(t, store);
    std::vector<CommTokens> comms;
    for (int m : order) {
      comms.push_back(agents::encode_local(
          t, P, cfg, observe(v, spans[static_cast<std::size_t>(m)], 3, 8, 8, m),
          q));
    }
    return t.value(agents::coordinate(t, P, cfg, q, comms, v.T, com));
  };

  Tensor base = run({0, 1, 2});
  Tensor swapped = run({2, 0, 1});
  CHECK(frob_diff(base, swapped) < 1e-9);

  // Dropping the segment embedding from the transcript would break this:
  // shuffling spans *without* their content must change the logits.
  auto run_crossed = [&](bool cross) {
    Tape t;
    Binding P(t, store);
    std::vector<CommTokens> comms;
    for (int m : {0, 1, 2}) {
      CommTokens c = agents::encode_local(
          t, P, cfg, observe(v, spans[static_cast<std::size_t>(m)], 3, 8, 8, m),
          q);
      if (cross) c.span = spans[static_cast<std::size_t>((m + 1) % 3)];
      comms.push_back(c);
    }
    return t.value(agents::coordinate(t, P, cfg, q, comms, v.T, com));
  };
  CHECK(frob_diff(run_crossed(false), run_crossed(true)) > 1e-9);
}

TEST_CASE("one agent over the whole video is the degenerate case") {
  ModelConfig cfg = micro_config();
  Rng rng(9);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(12);
  world::Query q = world::count_query(world::Shape::Circle);
  Tape t;
  Binding P(t, store);
  CommTokens c = agents::encode_local(t, P, cfg, observe(v, {0, 11}, 4, 8, 8), q);
  Var logits =
      agents::coordinate(t, P, cfg, q, {c}, v.T, budget::CommunicationBudget{64});
  CHECK(t.value(logits).all_finite());
  CHECK(budget::context_load(1, cfg.K, q) == cfg.K + 2);
}

TEST_CASE("every agent reads the same weights") {
  ModelConfig cfg = micro_config();
  Rng rng(10);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(16);
  world::Query q = world::count_query(world::Shape::Square);
  auto spans = budget::partition(v, 2);

  // Re-encoding agent 1's observation with agent 0's identity (same store)
  // gives bit-identical tokens: nothing is keyed on the agent index, and the
  // numeric ops round identically wherever their buffers land (serial
  // reductions; packed matmuls).
  budget::Observation o1 = observe(v, spans[1], 3, 8, 8, 1);
  budget::Observation o1_as0 = o1;
  o1_as0.agent = 0;
  Tape t;
  Binding P(t, store);
  Tensor from1 = t.value(agents::encode_local(t, P, cfg, o1, q).values);
  Tensor from0 = t.value(agents::encode_local(t, P, cfg, o1_as0, q).values);
  CHECK(frob_diff(from1, from0) == 0.0);
}

TEST_CASE("tied weights accumulate gradients across agents") {
  ModelConfig cfg = micro_config();
  Rng rng(11);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(16);
  world::Query q = world::existence_query(world::Color::Blue, world::Shape::Cross);
  auto spans = budget::partition(v, 2);
  budget::Observation a = observe(v, spans[0], 3, 8, 8, 0);
  budget::Observation b = observe(v, spans[1], 3, 8, 8, 1);

  // A loss that is a plain sum over the two comm blocks: the tied gradient
  // must equal the sum of the per-agent gradients computed in isolation.
  auto grad_patch = [&](const std::vector<budget::Observation>& obs) {
    Tape t;
    Binding P(t, store);
    std::vector<Var> sums;
    for (const budget::Observation& o : obs) {
      sums.push_back(
          num::sum_all(t, agents::encode_local(t, P, cfg, o, q).values));
    }
    Var loss = sums.size() == 1 ? sums[0] : num::add(t, sums[0], sums[1]);
    t.backward(loss);
    return t.grad(P["enc.patch.w"]);
  };

  Tensor tied = grad_patch({a, b});
  Tensor alone_a = grad_patch({a});
  Tensor alone_b = grad_patch({b});
  Tensor summed(alone_a.shape());
  for (std::int64_t i = 0; i < summed.size(); ++i) {
    summed[i] = alone_a[i] + alone_b[i];
  }
  CHECK(frob_diff(tied, summed) < 1e-12);
}

TEST_CASE("end to end gradients match central differences") {
  ModelConfig cfg = micro_config();
  Rng rng(12);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(16, 21);
  world::Query q = world::count_query(world::Shape::Square);
  auto spans = budget::partition(v, 2);
  budget::Observation oa = observe(v, spans[0], 2, 8, 8, 0);
  budget::Observation ob = observe(v, spans[1], 2, 8, 8, 1);
  const std::vector<int> caption = {world::ct::shape(world::Shape::Square),
                                    world::ct::color(world::Color::Red),
                                    world::ct::kDelim, world::ct::kEmpty};
  budget::CommunicationBudget com{256};
  const int label = 3;

  // Answer loss through both agents and the coordinator, plus a caption loss
  // through agent 0's block: together they touch every parameter group.
  auto forward = [&](Tape& t, const Binding& P) {
    CommTokens ca = agents::encode_local(t, P, cfg, oa, q);
    CommTokens cb = agents::encode_local(t, P, cfg, ob, q);
    Var logits = agents::coordinate(t, P, cfg, q, {ca, cb}, v.T, com);
    Var answer_ce = num::cross_entropy(t, logits, label);
    Var cap_ce = agents::caption_loss(t, P, cfg, ca.values, caption);
    return num::add(t, answer_ce, cap_ce);
  };

  std::vector<Tensor> grads;
  {
    Tape t;
    Binding P(t, store);
    Var loss = forward(t, P);
    t.backward(loss);
    grads = P.grads(t);
  }

  auto loss_value = [&]() {
    Tape t;
    t.set_grad_enabled(false);
    Binding P(t, store);
    return t.value(forward(t, P))[0];
  };

  Rng pick(99);
  int checked = 0, skipped = 0;
  double worst = 0.0;
  for (const char* name :
       {"enc.patch.w", "enc.slots", "enc.query_emb", "enc.b0.attn.wq",
        "enc.b0.mlp.w1", "enc.final_ln.g", "adp.w1", "adp.w2", "adp.ln.g",
        "coord.seg_proj", "coord.b0.attn.wv", "coord.b0.mlp.w2",
        "coord.query_emb", "coord.readout", "coord.answer.w", "cap.tok_emb",
        "cap.b0.cross.wk", "cap.b0.attn.wo", "cap.out.w"}) {
    Tensor& w = store.at(name);
    const Tensor& g = grads[static_cast<std::size_t>(store.index_of(name))];
    for (int trial = 0; trial < 2; ++trial) {
      const std::int64_t i =
          pick.uniform_int(0, static_cast<int>(w.size()) - 1);
      const double keep = w[i];
      auto central = [&](double h) {
        w[i] = keep + h;
        const double up = loss_value();
        w[i] = keep - h;
        const double down = loss_value();
        w[i] = keep;
        return (up - down) / (2.0 * h);
      };
      const double h = 1e-5 * std::max(1.0, std::abs(keep));
      const double fd = central(h);
      const double fd_small = central(h / 8.0);
      // max(1, .) keeps the comparison absolute for near-zero gradients,
      // where central differences are pure cancellation noise.
      const double scale = std::max({1.0, std::abs(fd), std::abs(g[i])});
      // Two step sizes that disagree mean the interval straddles a ReLU
      // kink; the secant is meaningless there, so skip that coordinate.
      if (std::abs(fd - fd_small) / scale > 1e-5) {
        ++skipped;
        continue;
      }
      const double rel = std::abs(fd - g[i]) / scale;
      CAPTURE(std::string(name));
      CAPTURE(i);
      worst = std::max(worst, rel);
      CHECK(rel < 1e-4);
      ++checked;
    }
  }
  CHECK(checked + skipped == 38);
  CHECK(skipped <= 8);
  CHECK(checked >= 30);
  MESSAGE("worst relative grad error: ", worst, " (", skipped, " kink skips)");
}

TEST_CASE("fresh caption head scores near the uniform baseline") {
  ModelConfig cfg = micro_config();
  Rng rng(13);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(8);
  Tape t;
  Binding P(t, store);
  CommTokens c = agents::encode_local(t, P, cfg, observe(v, {0, 7}, 2, 8, 8),
                                      world::pad_query());
  const std::vector<int> caption = {world::ct::kEmpty};
  double ce = t.value(agents::caption_loss(t, P, cfg, c.values, caption))[0];
  const double uniform = std::log(static_cast<double>(cfg.caption_vocab));
  CHECK(ce > 0.8 * uniform);
  CHECK(ce < 1.2 * uniform);
}

TEST_CASE("greedy captions stop at the cap and honour EOS") {
  ModelConfig cfg = micro_config();
  Rng rng(14);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(8);
  Tape t;
  t.set_grad_enabled(false);
  Binding P(t, store);
  CommTokens c = agents::encode_local(t, P, cfg, observe(v, {0, 7}, 2, 8, 8),
                                      world::pad_query());

  std::vector<int> full = agents::greedy_caption(t, P, cfg, c.values);
  CHECK(static_cast<int>(full.size()) <= world::kCaptionCap);
  for (int tok : full) {
    CHECK(tok >= 0);
    CHECK(tok < cfg.caption_vocab);
    CHECK(tok != world::ct::kEos);
  }
  std::vector<int> clipped = agents::greedy_caption(t, P, cfg, c.values, 5);
  CHECK(static_cast<int>(clipped.size()) <= 5);

  std::vector<int> too_long(world::kCaptionCap + 1, world::ct::kEmpty);
  CHECK_THROWS_AS(agents::decode_caption(t, P, cfg, c.values, too_long),
                  ContractError);
  Var next = agents::decode_caption(t, P, cfg, c.values, {world::ct::kEmpty});
  CHECK(t.value(next).rows() == 1);
  CHECK(t.value(next).cols() == cfg.caption_vocab);
}

TEST_CASE("text channel carries at most K discrete tokens") {
  ModelConfig cfg = micro_config();
  cfg.K = 3;
  Rng rng(15);
  ParamStore store = agents::init_params(cfg, rng);
  world::SymbolicVideo v = demo_video(12);
  world::Query q = world::count_query(world::Shape::Square);
  auto spans = budget::partition(v, 2);

  std::vector<TextMessage> msgs;
  for (int m = 0; m < 2; ++m) {
    budget::Observation obs =
        observe(v, spans[static_cast<std::size_t>(m)], 3, 8, 8, m);
    TextMessage msg = agents::text_channel_encode(cfg, store, obs, q);
    CHECK(static_cast<int>(msg.tokens.size()) <= cfg.K);
    for (int tok : msg.tokens) {
      CHECK(tok >= 0);
      CHECK(tok < cfg.caption_vocab);
    }
    CHECK(msg.span == spans[static_cast<std::size_t>(m)]);
    // Channel is deterministic: same observation, same message.
    CHECK(agents::text_channel_encode(cfg, store, obs, q).tokens == msg.tokens);
    msgs.push_back(std::move(msg));
  }

  Tape t;
  Binding P(t, store);
  Var logits = agents::coordinate_text(t, P, cfg, q, msgs, v.T,
                                       budget::CommunicationBudget{64});
  CHECK(t.value(logits).rows() == 1);
  CHECK(t.value(logits).cols() == cfg.answer_vocab);

  // Oversized or budget-busting messages are rejected up front.
  std::vector<TextMessage> fat = msgs;
  fat[0].tokens.assign(static_cast<std::size_t>(cfg.K) + 1, world::ct::kEmpty);
  CHECK_THROWS_AS(agents::coordinate_text(t, P, cfg, q, fat, v.T,
                                          budget::CommunicationBudget{64}),
                  ContractError);
  CHECK_THROWS_AS(agents::coordinate_text(t, P, cfg, q, msgs, v.T,
                                          budget::CommunicationBudget{2}),
                  BudgetExceeded);
}

TEST_CASE("state sharing dwarfs the latent channel") {
  ModelConfig cfg;  // defaults: d_enc 64, K 32, d 64, patch 4
  CHECK(agents::state_share_cost(16, 16, 64) == 16384);
  CHECK(agents::latent_channel_cost(cfg) == 2048);
  CHECK(agents::state_share_cost(16, 16, 64) > agents::latent_channel_cost(cfg));

  world::SymbolicVideo v = demo_video(16);
  budget::Observation obs = observe(v, {0, 15}, 16, 16, 16);
  CHECK(agents::state_share_cost(cfg, obs) == 16384);
  CHECK_THROWS_AS(agents::state_share_cost(0, 16, 64), ConfigError);
}

TEST_CASE("checkpoints round trip bit for bit") {
  ModelConfig cfg = micro_config();
  Rng rng(16);
  agents::Checkpoint ck;
  ck.model = cfg;
  ck.params = agents::init_params(cfg, rng);
  ck.run_config = {{"lr", 0.001}, {"note", "roundtrip"}};
  ck.vocab_hashes = agents::current_vocab_hashes();
  ck.stages_done = {1, 2};
  ck.opt.init(ck.params);
  ck.opt.step = 17;
  for (Tensor& m : ck.opt.m)
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = rng.normal();

  const std::string path = "agents_ck_roundtrip.bin";
  agents::save_checkpoint(path, ck);
  agents::Checkpoint back = agents::load_checkpoint(path);

  CHECK(back.model == cfg);
  CHECK(back.run_config == ck.run_config);
  CHECK(back.stages_done == ck.stages_done);
  CHECK(back.vocab_hashes == ck.vocab_hashes);
  REQUIRE(back.params.count() == ck.params.count());
  for (int i = 0; i < ck.params.count(); ++i) {
    CHECK(back.params.name_at(i) == ck.params.name_at(i));
    CHECK(frob_diff(back.params.value_at(i), ck.params.value_at(i)) == 0.0);
  }
  CHECK(back.opt.step == 17);
  REQUIRE(back.has_opt());
  for (std::size_t i = 0; i < ck.opt.m.size(); ++i) {
    CHECK(frob_diff(back.opt.m[i], ck.opt.m[i]) == 0.0);
    CHECK(frob_diff(back.opt.v[i], ck.opt.v[i]) == 0.0);
  }

  // Saving the identical content twice yields identical bytes.
  const std::string path2 = "agents_ck_roundtrip_2.bin";
  agents::save_checkpoint(path2, ck);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader refuses foreign and mismatched files") {
  ModelConfig cfg = micro_config();
  Rng rng(17);
  agents::Checkpoint ck;
  ck.model = cfg;
  ck.params = agents::init_params(cfg, rng);
  ck.vocab_hashes = agents::current_vocab_hashes();
  ck.stages_done = {1};

  CHECK_THROWS_AS(agents::load_checkpoint("does_not_exist.bin"), IoError);

  const std::string garbage = "agents_ck_garbage.bin";
  {
    std::ofstream os(garbage, std::ios::binary);
    os << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(agents::load_checkpoint(garbage), IoError);
  std::remove(garbage.c_str());

  const std::string good = "agents_ck_good.bin";
  agents::save_checkpoint(good, ck);
  std::string bytes;
  {
    std::ifstream is(good, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(is)),
                 std::istreambuf_iterator<char>());
  }
  const std::string cut = "agents_ck_cut.bin";
  {
    std::ofstream os(cut, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(agents::load_checkpoint(cut), IoError);
  std::remove(cut.c_str());
  std::remove(good.c_str());

  // A model trained against one token table must not load against another.
  agents::Checkpoint shifted = std::move(ck);
  shifted.vocab_hashes[0] ^= 1;
  const std::string wrong = "agents_ck_wrong_vocab.bin";
  agents::save_checkpoint(wrong, shifted);
  CHECK_THROWS_AS(agents::load_checkpoint(wrong), ContractError);
  std::remove(wrong.c_str());

  shifted.vocab_hashes = agents::current_vocab_hashes();
  shifted.stages_done = {2, 1};
  CHECK_THROWS_AS(agents::save_checkpoint("never_written.bin", shifted),
                  ContractError);
}

TEST_CASE("model config validation") {
  ModelConfig cfg = micro_config();
  CHECK_NOTHROW(agents::check_model_config(cfg));
  cfg.K = 0;
  CHECK_THROWS_AS(agents::check_model_config(cfg), ConfigError);
  cfg = micro_config();
  cfg.d = 10;  // not a multiple of 4
  CHECK_THROWS_AS(agents::check_model_config(cfg), ConfigError);
  cfg = micro_config();
  CHECK(agents::patch_count(cfg, 16, 16) == 16);
  CHECK_THROWS_AS(agents::patch_count(cfg, 15, 16), ConfigError);

  nlohmann::json j = agents::model_config_to_json(micro_config());
  CHECK(agents::model_config_from_json(j) == micro_config());
  j.erase("K");
  CHECK_THROWS_AS(agents::model_config_from_json(j), ConfigError);
}
