// Forward values are checked against independent reference implementations
// (naive triple loops, long-double accumulation); gradients are checked
// against central finite differences.

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "relay/numcore/adam.hpp"
#include "relay/numcore/ops.hpp"
#include "relay/numcore/param_store.hpp"
#include "relay/numcore/rng.hpp"
#include "relay/numcore/tape.hpp"

using namespace relay::num;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

// Loss builder over differentiable leaves; must return a scalar node.
using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

double eval_loss(const GraphFn& f, const std::vector<Tensor>& xs) {
  Tape t;
  std::vector<Var> vars;
  for (const Tensor& x : xs) vars.push_back(t.param(x));
  return t.value(f(t, vars))[0];
}

void check_gradients(const GraphFn& f, std::vector<Tensor> xs,
                     double h = 1e-5, double tol = 1e-4) {
  Tape t;
  std::vector<Var> vars;
  for (const Tensor& x : xs) vars.push_back(t.param(x));
  Var loss = f(t, vars);
  t.backward(loss);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Tensor g = t.grad(vars[i]);
    for (std::int64_t j = 0; j < xs[i].size(); ++j) {
      std::vector<Tensor> xp = xs, xm = xs;
      xp[i][j] += h;
      xm[i][j] -= h;
      double fd = (eval_loss(f, xp) - eval_loss(f, xm)) / (2.0 * h);
      INFO("leaf ", i, " element ", j, ": analytic ", g[j], " vs fd ", fd);
      CHECK(std::abs(fd - g[j]) <=
            1e-6 + tol * std::max(std::abs(fd), std::abs(g[j])));
    }
  }
}

// Weighted sum with fixed weights turns any tensor into a scalar whose
// gradient exercises every element independently.
Var weighted_sum(Tape& t, Var a, const Tensor& w) {
  return sum_all(t, mul_elem(t, a, t.input(w)));
}

}  // namespace

// ---- forward oracles ------------------------------------------------------

TEST_CASE("matmul matches a triple-loop reference") {
  Rng rng(1);
  Tensor a = random_tensor({7, 5}, rng), b = random_tensor({5, 9}, rng);
  Tape t;
  const Tensor& c = t.value(matmul(t, t.input(a), t.input(b)));
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 9; ++j) {
      long double acc = 0;
      for (int k = 0; k < 5; ++k) acc += (long double)a.at(i, k) * b.at(k, j);
      CHECK(std::abs(c.at(i, j) - (double)acc) < 1e-12);
    }
  }
}

TEST_CASE("matmul_bt equals matmul against an explicit transpose") {
  Rng rng(2);
  Tensor a = random_tensor({4, 6}, rng), b = random_tensor({8, 6}, rng);
  Tensor bT({6, 8});
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 6; ++j) bT.mat()(j, i) = b.at(i, j);
  Tape t;
  const Tensor& c1 = t.value(matmul_bt(t, t.input(a), t.input(b)));
  const Tensor& c2 = t.value(matmul(t, t.input(a), t.input(bT)));
  CHECK((c1.cmat() - c2.cmat()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("matmul rejects mismatched inner dimensions naming both shapes") {
  Tape t;
  Var a = t.input(Tensor({2, 3}));
  Var b = t.input(Tensor({4, 2}));
  CHECK_THROWS_WITH_AS(matmul(t, a, b),
                       doctest::Contains("[2x3]"), relay::DimensionError);
  CHECK_THROWS_WITH_AS(matmul(t, a, b),
                       doctest::Contains("[4x2]"), relay::DimensionError);
}

TEST_CASE("softmax matches a long-double reference and is shift invariant") {
  Rng rng(3);
  Tensor x = random_tensor({6, 11}, rng, 3.0);
  Tape t;
  const Tensor& y = t.value(softmax(t, t.input(x)));
  for (int r = 0; r < 6; ++r) {
    long double mx = x.at(r, 0);
    for (int c = 1; c < 11; ++c) mx = std::max<long double>(mx, x.at(r, c));
    long double z = 0;
    for (int c = 0; c < 11; ++c) z += expl((long double)x.at(r, c) - mx);
    long double rowsum = 0;
    for (int c = 0; c < 11; ++c) {
      long double ref = expl((long double)x.at(r, c) - mx) / z;
      CHECK(std::abs(y.at(r, c) - (double)ref) < 1e-10);
      rowsum += y.at(r, c);
    }
    CHECK(std::abs((double)rowsum - 1.0) < 1e-12);
  }

  // Adding a large per-row constant must not change the result.
  Tensor shifted = x;
  shifted.mat().array() += 1000.0;
  Tape t2;
  const Tensor& y2 = t2.value(softmax(t2, t2.input(shifted)));
  CHECK((y.cmat() - y2.cmat()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("masked softmax zeroes forbidden slots exactly") {
  Rng rng(4);
  Tensor x = random_tensor({5, 5}, rng, 2.0);
  AttnMask mask = AttnMask::causal(5);
  Tape t;
  const Tensor& y = t.value(masked_softmax(t, t.input(x), mask));
  for (int r = 0; r < 5; ++r) {
    double rowsum = 0;
    for (int c = 0; c < 5; ++c) {
      if (c > r) CHECK(y.at(r, c) == 0.0);  // exact zero, not merely small
      rowsum += y.at(r, c);
    }
    CHECK(rowsum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Equals the plain softmax restricted to the allowed prefix.
  for (int r = 0; r < 5; ++r) {
    long double z = 0;
    long double mx = -1e30;
    for (int c = 0; c <= r; ++c) mx = std::max<long double>(mx, x.at(r, c));
    for (int c = 0; c <= r; ++c) z += expl((long double)x.at(r, c) - mx);
    for (int c = 0; c <= r; ++c) {
      long double ref = expl((long double)x.at(r, c) - mx) / z;
      CHECK(std::abs(y.at(r, c) - (double)ref) < 1e-10);
    }
  }
}

TEST_CASE("masked softmax rejects a fully forbidden row") {
  Tape t;
  Var x = t.input(Tensor({2, 3}));
  AttnMask mask(2, 3, 1);
  mask.at(1, 0) = mask.at(1, 1) = mask.at(1, 2) = 0;
  CHECK_THROWS_WITH_AS(masked_softmax(t, x, mask), doctest::Contains("row 1"),
                       relay::MaskingError);
}

TEST_CASE("masked softmax with a full mask equals softmax") {
  Rng rng(5);
  Tensor x = random_tensor({3, 7}, rng);
  Tape t;
  const Tensor& a = t.value(masked_softmax(t, t.input(x), AttnMask::full(3, 7)));
  const Tensor& b = t.value(softmax(t, t.input(x)));
  CHECK((a.cmat() - b.cmat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("layernorm_plain standardises each row") {
  Rng rng(6);
  Tensor x = random_tensor({4, 32}, rng, 2.0);
  Tape t;
  const Tensor& y = t.value(layernorm_plain(t, t.input(x)));
  for (int r = 0; r < 4; ++r) {
    double mean = y.cmat().row(r).mean();
    double var = (y.cmat().row(r).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it slightly
  }
}

TEST_CASE("layernorm applies gain and bias after standardising") {
  Rng rng(7);
  Tensor x = random_tensor({3, 8}, rng);
  Tensor g = random_tensor({8}, rng), b = random_tensor({8}, rng);
  Tape t;
  Var xv = t.input(x);
  const Tensor& plain = t.value(layernorm_plain(t, xv));
  const Tensor& affine = t.value(layernorm(t, xv, t.input(g), t.input(b)));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(affine.at(r, c) ==
            doctest::Approx(plain.at(r, c) * g[c] + b[c]).epsilon(1e-12));
}

TEST_CASE("attention matches an explicit reference composition") {
  Rng rng(8);
  const int Tq = 5, Tk = 7, d = 4, dv = 3;
  Tensor q = random_tensor({Tq, d}, rng), k = random_tensor({Tk, d}, rng),
         v = random_tensor({Tk, dv}, rng);
  Tape t;
  const Tensor& out =
      t.value(attention(t, t.input(q), t.input(k), t.input(v), AttnMask::full(Tq, Tk)));
  for (int i = 0; i < Tq; ++i) {
    long double scores[7];
    long double mx = -1e30;
    for (int j = 0; j < Tk; ++j) {
      long double s = 0;
      for (int e = 0; e < d; ++e) s += (long double)q.at(i, e) * k.at(j, e);
      scores[j] = s / sqrtl((long double)d);
      mx = std::max(mx, scores[j]);
    }
    long double z = 0;
    for (int j = 0; j < Tk; ++j) z += expl(scores[j] - mx);
    for (int c = 0; c < dv; ++c) {
      long double acc = 0;
      for (int j = 0; j < Tk; ++j)
        acc += expl(scores[j] - mx) / z * (long double)v.at(j, c);
      CHECK(std::abs(out.at(i, c) - (double)acc) < 1e-10);
    }
  }
}

TEST_CASE("cross entropy matches a long-double reference") {
  Tensor logits({4}, {1.5, -0.5, 3.0, 0.0});
  long double mx = 3.0L, z = 0;
  for (int i = 0; i < 4; ++i) z += expl((long double)logits[i] - mx);
  long double ref = (mx + logl(z)) - 1.5L;
  Tape t;
  const Tensor& l = t.value(cross_entropy(t, t.input(logits), 0));
  CHECK(std::abs(l[0] - (double)ref) < 1e-12);

  CHECK_THROWS_AS(cross_entropy(t, t.input(logits), 4), relay::IndexError);
  CHECK_THROWS_AS(cross_entropy(t, t.input(logits), -1), relay::IndexError);
}

TEST_CASE("row cross entropy averages non-padding rows only") {
  Rng rng(9);
  Tensor logits = random_tensor({3, 5}, rng);
  Tape t;
  double l01 = t.value(cross_entropy_rows(t, t.input(logits), {2, 4, -1}))[0];
  double a = t.value(cross_entropy(t, t.input(logits.reshaped({3, 5})), 2))[0];
  // Row extraction by hand for the reference.
  Tensor r0({5}), r1({5});
  for (int c = 0; c < 5; ++c) {
    r0[c] = logits.at(0, c);
    r1[c] = logits.at(1, c);
  }
  double ce0 = t.value(cross_entropy(t, t.input(r0), 2))[0];
  double ce1 = t.value(cross_entropy(t, t.input(r1), 4))[0];
  (void)a;
  CHECK(l01 == doctest::Approx(0.5 * (ce0 + ce1)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy_rows(t, t.input(logits), {-1, -1, -1}),
                  relay::ContractError);
  CHECK_THROWS_AS(cross_entropy_rows(t, t.input(logits), {0, 1}),
                  relay::DimensionError);
}

TEST_CASE("slicing, gathering and concatenation round trip") {
  Rng rng(10);
  Tensor x = random_tensor({6, 4}, rng);
  Tape t;
  Var xv = t.input(x);
  Var top = slice_rows(t, xv, 0, 2);
  Var rest = slice_rows(t, xv, 2, 4);
  const Tensor& back = t.value(concat_rows(t, {top, rest}));
  CHECK((back.cmat() - x.cmat()).cwiseAbs().maxCoeff() == 0.0);

  const Tensor& picked = t.value(gather_rows(t, xv, {5, 0, 5}));
  CHECK(picked.rows() == 3);
  CHECK((picked.cmat().row(0) - x.cmat().row(5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((picked.cmat().row(1) - x.cmat().row(0)).cwiseAbs().maxCoeff() == 0.0);

  const Tensor& mid = t.value(slice_cols(t, xv, 1, 2));
  CHECK(mid.cols() == 2);
  CHECK(mid.at(3, 0) == x.at(3, 1));

  CHECK_THROWS_AS(slice_rows(t, xv, 4, 3), relay::IndexError);
  CHECK_THROWS_AS(slice_cols(t, xv, 0, 5), relay::IndexError);
  CHECK_THROWS_AS(gather_rows(t, xv, {6}), relay::IndexError);
}

// ---- gradients against finite differences ---------------------------------

TEST_CASE("gradients: matmul and matmul_bt") {
  Rng rng(20);
  Tensor w = random_tensor({3, 6}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, matmul(t, xs[0], xs[1]), w);
      },
      {random_tensor({3, 4}, rng), random_tensor({4, 6}, rng)});
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, matmul_bt(t, xs[0], xs[1]), w);
      },
      {random_tensor({3, 4}, rng), random_tensor({6, 4}, rng)});
}

TEST_CASE("gradients: elementwise ops and broadcast add") {
  Rng rng(21);
  Tensor w = random_tensor({4, 5}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        Var s = add(t, xs[0], xs[1]);
        Var m = mul_elem(t, s, xs[2]);
        return weighted_sum(t, scale(t, m, -1.7), w);
      },
      {random_tensor({4, 5}, rng), random_tensor({4, 5}, rng),
       random_tensor({4, 5}, rng)});
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, add_rowvec(t, xs[0], xs[1]), w);
      },
      {random_tensor({4, 5}, rng), random_tensor({5}, rng)});
}

TEST_CASE("gradients: relu away from the kink") {
  Rng rng(22);
  Tensor x({3, 4});
  for (std::int64_t i = 0; i < x.size(); ++i) {
    double mag = 0.2 + 0.8 * rng.uniform();
    x[i] = rng.bernoulli(0.5) ? mag : -mag;
  }
  Tensor w = random_tensor({3, 4}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, relu(t, xs[0]), w);
      },
      {x});
}

TEST_CASE("gradients: softmax, masked softmax and layernorm") {
  Rng rng(23);
  Tensor w = random_tensor({4, 6}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, softmax(t, xs[0]), w);
      },
      {random_tensor({4, 6}, rng)});

  AttnMask causal = AttnMask::causal(4);
  Tensor w2 = random_tensor({4, 4}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, masked_softmax(t, xs[0], causal), w2);
      },
      {random_tensor({4, 4}, rng)});

  Tensor w3 = random_tensor({3, 8}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, layernorm(t, xs[0], xs[1], xs[2]), w3);
      },
      {random_tensor({3, 8}, rng, 2.0), random_tensor({8}, rng),
       random_tensor({8}, rng)});
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, layernorm_plain(t, xs[0]), w3);
      },
      {random_tensor({3, 8}, rng, 2.0)});
}

TEST_CASE("gradients: attention composite") {
  Rng rng(24);
  Tensor w = random_tensor({4, 3}, rng);
  AttnMask mask = AttnMask::full(4, 5);
  mask.at(2, 1) = 0;  // poke one hole to exercise the masked path
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return weighted_sum(t, attention(t, xs[0], xs[1], xs[2], mask), w);
      },
      {random_tensor({4, 6}, rng), random_tensor({5, 6}, rng),
       random_tensor({5, 3}, rng)});
}

TEST_CASE("gradients: cross entropy variants") {
  Rng rng(25);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return cross_entropy(t, xs[0], 3);
      },
      {random_tensor({7}, rng, 2.0)});
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        return cross_entropy_rows(t, xs[0], {1, -1, 4, 0});
      },
      {random_tensor({4, 5}, rng, 2.0)});
}

TEST_CASE("gradients: structural ops") {
  Rng rng(26);
  Tensor w = random_tensor({5, 3}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        Var cat = concat_rows(t, {xs[0], xs[1]});
        return weighted_sum(t, cat, w);
      },
      {random_tensor({2, 3}, rng), random_tensor({3, 3}, rng)});
  Tensor w2 = random_tensor({2, 2}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        Var s = slice_rows(t, xs[0], 1, 2);
        return weighted_sum(t, slice_cols(t, s, 1, 2), w2);
      },
      {random_tensor({4, 4}, rng)});
  Tensor w3 = random_tensor({4, 3}, rng);
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        // Repeated ids make the scatter-add visible.
        return weighted_sum(t, gather_rows(t, xs[0], {0, 2, 2, 1}), w3);
      },
      {random_tensor({3, 3}, rng)});
  check_gradients(
      [&](Tape& t, const std::vector<Var>& xs) {
        std::vector<Var> parts{sum_all(t, xs[0]), sum_all(t, xs[1]),
                               cross_entropy(t, xs[2], 1)};
        return mean_of(t, parts);
      },
      {random_tensor({2, 2}, rng), random_tensor({3}, rng),
       random_tensor({4}, rng)});
}

// ---- tape semantics --------------------------------------------------------

TEST_CASE("tape accumulates gradients across reuse") {
  Tensor x({2}, {1.0, 2.0});
  Tape t;
  Var xv = t.param(x);
  Var loss = sum_all(t, add(t, xv, xv));
  t.backward(loss);
  Tensor g = t.grad(xv);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 2.0);
}

TEST_CASE("tape rejects non-scalar losses and constant losses") {
  Tape t;
  Var v = t.param(Tensor({2, 2}));
  CHECK_THROWS_AS(t.backward(v), relay::ContractError);
  Var c = t.input(Tensor::scalar(1.0));
  CHECK_THROWS_AS(t.backward(c), relay::ContractError);
}

TEST_CASE("inputs never accumulate gradients") {
  Tensor x({3}, {1, 2, 3});
  Tape t;
  Var a = t.input(x);
  Var b = t.param(x);
  Var loss = sum_all(t, mul_elem(t, a, b));
  t.backward(loss);
  CHECK(t.grad(a).cvec().cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.grad(b).cvec().isApprox(x.cvec()));
}

TEST_CASE("untouched parameters report zero gradients") {
  Tape t;
  Var used = t.param(Tensor::scalar(2.0));
  Var unused = t.param(Tensor({3, 3}));
  t.backward(scale(t, used, 4.0));
  CHECK(t.grad(used)[0] == 4.0);
  CHECK(t.grad(unused).cvec().cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.grad(unused).same_shape(t.value(unused)));
}

TEST_CASE("grad-disabled tapes build no backward graph") {
  Tape t;
  t.set_grad_enabled(false);
  Var a = t.param(Tensor::scalar(1.0));
  Var b = scale(t, a, 2.0);
  CHECK(!t.requires_grad(a));
  CHECK(!t.requires_grad(b));
  CHECK(t.value(b)[0] == 2.0);
  CHECK_THROWS_AS(t.backward(b), relay::ContractError);
}

TEST_CASE("parameter binding ties every use to one gradient buffer") {
  ParamStore store;
  store.add("w", Tensor({2}, {1.0, -1.0}));
  Tape t;
  Binding bind(t, store);
  Var w = bind["w"];
  // Two independent branches through the same parameter node.
  Var branch1 = sum_all(t, scale(t, w, 3.0));
  Var branch2 = sum_all(t, mul_elem(t, w, w));
  t.backward(add(t, branch1, branch2));
  std::vector<Tensor> grads = bind.grads(t);
  REQUIRE(grads.size() == 1);
  CHECK(grads[0][0] == doctest::Approx(3.0 + 2.0 * 1.0));
  CHECK(grads[0][1] == doctest::Approx(3.0 + 2.0 * -1.0));

  CHECK_THROWS_AS(bind["nope"], relay::ContractError);
  CHECK_THROWS_AS(store.add("w", Tensor({1})), relay::ContractError);
}

// ---- optimiser -------------------------------------------------------------

TEST_CASE("adam matches a long-double reference over several steps") {
  ParamStore store;
  store.add("p", Tensor({3}, {1.0, -2.0, 0.5}));
  AdamState state;
  state.init(store);
  AdamConfig cfg;
  cfg.lr = 0.05;

  long double p[3] = {1.0L, -2.0L, 0.5L}, m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
  Rng rng(30);
  for (int step = 1; step <= 7; ++step) {
    Tensor g = random_tensor({3}, rng);
    adam_step(store, state, {g}, cfg);
    for (int i = 0; i < 3; ++i) {
      m[i] = 0.9L * m[i] + 0.1L * g[i];
      v[i] = 0.999L * v[i] + 0.001L * g[i] * g[i];
      long double mh = m[i] / (1.0L - powl(0.9L, step));
      long double vh = v[i] / (1.0L - powl(0.999L, step));
      p[i] -= 0.05L * mh / (sqrtl(vh) + 1e-8L);
      CHECK(std::abs(store.at("p")[i] - (double)p[i]) < 1e-12);
    }
  }
  CHECK(state.step == 7);
}

TEST_CASE("adam drives a quadratic to its minimum") {
  ParamStore store;
  store.add("x", Tensor::scalar(-4.0));
  AdamState state;
  state.init(store);
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    Tape t;
    Binding bind(t, store);
    Var x = bind["x"];
    Var diff = add(t, x, t.input(Tensor::scalar(-3.0)));
    Var loss = mul_elem(t, diff, diff);
    t.backward(sum_all(t, loss));
    adam_step(store, state, bind.grads(t), cfg);
  }
  CHECK(store.at("x")[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("adam lr_scale rescales the step") {
  ParamStore a, b;
  a.add("x", Tensor::scalar(1.0));
  b.add("x", Tensor::scalar(1.0));
  AdamState sa, sb;
  sa.init(a);
  sb.init(b);
  AdamConfig ca, cb;
  ca.lr = 0.02;
  cb.lr = 0.01;
  Tensor g = Tensor::scalar(0.7);
  adam_step(a, sa, {g}, ca, 0.5);
  adam_step(b, sb, {g}, cb, 1.0);
  CHECK(a.at("x")[0] == doctest::Approx(b.at("x")[0]).epsilon(1e-15));
}

TEST_CASE("adam validates gradient shapes") {
  ParamStore store;
  store.add("p", Tensor({2, 2}));
  AdamState state;
  state.init(store);
  CHECK_THROWS_AS(adam_step(store, state, {Tensor({3})}, AdamConfig{}),
                  relay::ContractError);
  CHECK_THROWS_AS(adam_step(store, state, {}, AdamConfig{}),
                  relay::ContractError);
}

// ---- numerical robustness property ----------------------------------------

TEST_CASE("random transformer-flavoured graphs stay finite") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const int rows = rng.uniform_int(2, 6);
    const int d = 2 * rng.uniform_int(1, 4);
    const double spread = std::pow(10.0, rng.uniform() * 4.0 - 2.0);
    Tensor x = random_tensor({rows, d}, rng, spread);
    Tensor wq = random_tensor({d, d}, rng), wk = random_tensor({d, d}, rng),
           wv = random_tensor({d, d}, rng), g = random_tensor({d}, rng),
           b = random_tensor({d}, rng);

    Tape t;
    Var xv = t.param(x);
    Var q = matmul(t, xv, t.param(wq));
    Var k = matmul(t, xv, t.param(wk));
    Var v = matmul(t, xv, t.param(wv));
    AttnMask mask = rng.bernoulli(0.5) ? AttnMask::full(rows, rows)
                                       : AttnMask::causal(rows);
    Var att = attention(t, q, k, v, mask);
    Var ln = layernorm(t, att, t.param(g), t.param(b));
    Var act = relu(t, ln);
    Var loss = cross_entropy_rows(t, act, std::vector<int>(rows, 0));
    INFO("seed ", seed, " spread ", spread);
    CHECK(t.value(loss).all_finite());
    t.backward(loss);
    CHECK(t.grad(xv).all_finite());
    CHECK(t.grad(Var{1}).all_finite());
  }
}
