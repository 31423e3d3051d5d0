#pragma once

#include <cstdint>
#include <vector>

#include "relay/numcore/tape.hpp"
#include "relay/numcore/tensor.hpp"

namespace relay::num {

/// Boolean attention mask over a [rows x cols] score matrix.
/// allow[r * cols + c] != 0 means position (r, c) may attend to c.
struct AttnMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> allow;

  AttnMask() = default;
  AttnMask(int r, int c, std::uint8_t fill)
      : rows(r), cols(c), allow(static_cast<std::size_t>(r) * c, fill) {}

  static AttnMask full(int r, int c) { return AttnMask(r, c, 1); }

  /// Row i may attend to columns [0, i]. Square only.
  static AttnMask causal(int n) {
    AttnMask m(n, n, 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) m.at(i, j) = 1;
    return m;
  }

  std::uint8_t& at(int r, int c) {
    return allow[static_cast<std::size_t>(r) * cols + c];
  }
  std::uint8_t at(int r, int c) const {
    return allow[static_cast<std::size_t>(r) * cols + c];
  }

  bool all_allowed() const {
    for (std::uint8_t a : allow)
      if (!a) return false;
    return true;
  }
};

// ---- differentiable primitives ------------------------------------------
// All operate on the 2-D view of their operands (rows() x cols()) unless
// noted. Shape mismatches raise DimensionError naming both shapes.

/// a [m x k] times b [k x n].
Var matmul(Tape& t, Var a, Var b);

/// a [m x k] times b-transposed, b [n x k]. Avoids materialising bT.
Var matmul_bt(Tape& t, Var a, Var b);

/// Elementwise sum; shapes must match exactly.
Var add(Tape& t, Var a, Var b);

/// Adds row vector v [1 x n] (or [n]) to every row of a [m x n].
Var add_rowvec(Tape& t, Var a, Var v);

/// Elementwise product; shapes must match exactly.
Var mul_elem(Tape& t, Var a, Var b);

Var scale(Tape& t, Var a, double s);

Var relu(Tape& t, Var a);

/// Row-wise softmax with max subtraction.
Var softmax(Tape& t, Var a);

/// Row-wise softmax where forbidden positions get weight exactly 0.
/// Throws MaskingError if any row forbids every position.
Var masked_softmax(Tape& t, Var scores, const AttnMask& mask);

/// Per-row layer normalisation with learned gain and bias (each [1 x n]).
Var layernorm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);

/// Per-row layer normalisation without affine parameters.
Var layernorm_plain(Tape& t, Var x, double eps = 1e-5);

/// softmax(q kT / sqrt(d), mask) v with q [Tq x d], k [Tk x d], v [Tk x dv].
Var attention(Tape& t, Var q, Var k, Var v, const AttnMask& mask);

/// -log softmax(logits)[target] for a single logit row of length n.
Var cross_entropy(Tape& t, Var logits, int target);

/// Mean of per-row cross entropies; logits [L x V], targets length L.
/// Rows whose target is negative are ignored (padding); throws
/// ContractError if every target is negative.
Var cross_entropy_rows(Tape& t, Var logits, std::vector<int> targets);

/// Mean of scalar nodes.
Var mean_of(Tape& t, const std::vector<Var>& scalars);

/// Stacks parts vertically; all must share a column count.
Var concat_rows(Tape& t, const std::vector<Var>& parts);

Var slice_rows(Tape& t, Var a, int begin, int count);

Var slice_cols(Tape& t, Var a, int begin, int count);

/// Rows of `table` selected by ids; backward scatter-adds.
Var gather_rows(Tape& t, Var table, std::vector<int> ids);

Var sum_all(Tape& t, Var a);

}  // namespace relay::num
