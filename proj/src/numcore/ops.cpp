#include "relay/numcore/ops.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <sstream>
#include <utility>

namespace relay::num {

namespace {

std::string two_shapes(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << Tensor::shape_string(a.shape())
     << " and " << Tensor::shape_string(b.shape());
  return os.str();
}

// Row reductions here and below are serial loops on purpose: Eigen's
// vectorised redux splits at alignment boundaries, so its summation order
// (and rounding) depends on where a buffer happens to sit in memory. Serial
// order is what makes training runs bit-reproducible.

// Shared softmax backward: dx = y * (g - rowdot(g, y)).
void softmax_backward(Tape& t, Var x, Var y) {
  if (!t.requires_grad(x)) return;
  ConstMatMap Y = t.value(y).mat();
  ConstMatMap G = t.grad_buffer(y).cmat();
  MatMap GX = t.grad_buffer(x).mat();
  const int m = static_cast<int>(Y.rows()), n = static_cast<int>(Y.cols());
  for (int r = 0; r < m; ++r) {
    double dot = 0.0;
    for (int c = 0; c < n; ++c) dot += G(r, c) * Y(r, c);
    for (int c = 0; c < n; ++c) GX(r, c) += Y(r, c) * (G(r, c) - dot);
  }
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.cols() != bv.rows()) throw DimensionError(two_shapes("matmul", av, bv));
  Tensor out({av.rows(), bv.cols()});
  out.mat().noalias() = av.mat() * bv.mat();
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var c = t.record(std::move(out), rg, nullptr);
  return t.attach(c, [&t, a, b, c] {
    ConstMatMap G = t.grad_buffer(c).cmat();
    if (t.requires_grad(a))
      t.grad_buffer(a).mat().noalias() += G * t.value(b).mat().transpose();
    if (t.requires_grad(b))
      t.grad_buffer(b).mat().noalias() += t.value(a).mat().transpose() * G;
  });
}

Var matmul_bt(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.cols() != bv.cols()) throw DimensionError(two_shapes("matmul_bt", av, bv));
  Tensor out({av.rows(), bv.rows()});
  out.mat().noalias() = av.mat() * bv.mat().transpose();
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var c = t.record(std::move(out), rg, nullptr);
  return t.attach(c, [&t, a, b, c] {
    ConstMatMap G = t.grad_buffer(c).cmat();
    if (t.requires_grad(a))
      t.grad_buffer(a).mat().noalias() += G * t.value(b).mat();
    if (t.requires_grad(b))
      t.grad_buffer(b).mat().noalias() += G.transpose() * t.value(a).mat();
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (!av.same_shape(bv)) throw DimensionError(two_shapes("add", av, bv));
  Tensor out(av.shape());
  out.vec() = av.cvec() + bv.cvec();
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var c = t.record(std::move(out), rg, nullptr);
  return t.attach(c, [&t, a, b, c] {
    ConstVecMap G = t.grad_buffer(c).cvec();
    if (t.requires_grad(a)) t.grad_buffer(a).vec() += G;
    if (t.requires_grad(b)) t.grad_buffer(b).vec() += G;
  });
}

Var add_rowvec(Tape& t, Var a, Var v) {
  const Tensor& av = t.value(a);
  const Tensor& vv = t.value(v);
  if (vv.size() != av.cols()) throw DimensionError(two_shapes("add_rowvec", av, vv));
  Tensor out(av.shape());
  ConstVecMap row = vv.cvec();
  out.mat() = av.mat().rowwise() + row.transpose();
  bool rg = t.requires_grad(a) || t.requires_grad(v);
  Var c = t.record(std::move(out), rg, nullptr);
  return t.attach(c, [&t, a, v, c] {
    ConstMatMap G = t.grad_buffer(c).cmat();
    if (t.requires_grad(a)) t.grad_buffer(a).mat() += G;
    if (t.requires_grad(v)) {
      // Serial column sums: Eigen vectorises this partial redux for
      // packet-friendly widths and the rounding then depends on buffer
      // alignment.
      VecMap gv = t.grad_buffer(v).vec();
      for (Eigen::Index r = 0; r < G.rows(); ++r)
        for (Eigen::Index j = 0; j < G.cols(); ++j) gv(j) += G(r, j);
    }
  });
}

Var mul_elem(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (!av.same_shape(bv)) throw DimensionError(two_shapes("mul_elem", av, bv));
  Tensor out(av.shape());
  out.vec() = av.cvec().cwiseProduct(bv.cvec());
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var c = t.record(std::move(out), rg, nullptr);
  return t.attach(c, [&t, a, b, c] {
    ConstVecMap G = t.grad_buffer(c).cvec();
    if (t.requires_grad(a))
      t.grad_buffer(a).vec() += G.cwiseProduct(t.value(b).cvec());
    if (t.requires_grad(b))
      t.grad_buffer(b).vec() += G.cwiseProduct(t.value(a).cvec());
  });
}

Var scale(Tape& t, Var a, double s) {
  const Tensor& av = t.value(a);
  Tensor out(av.shape());
  out.vec() = av.cvec() * s;
  Var c = t.record(std::move(out), t.requires_grad(a), nullptr);
  return t.attach(c, [&t, a, c, s] {
    if (t.requires_grad(a)) t.grad_buffer(a).vec() += s * t.grad_buffer(c).cvec();
  });
}

Var relu(Tape& t, Var a) {
  const Tensor& av = t.value(a);
  Tensor out(av.shape());
  out.vec() = av.cvec().cwiseMax(0.0);
  Var c = t.record(std::move(out), t.requires_grad(a), nullptr);
  return t.attach(c, [&t, a, c] {
    if (!t.requires_grad(a)) return;
    ConstVecMap X = t.value(a).cvec();
    ConstVecMap G = t.grad_buffer(c).cvec();
    t.grad_buffer(a).vec().array() +=
        G.array() * (X.array() > 0.0).cast<double>();
  });
}

Var softmax(Tape& t, Var a) {
  const Tensor& av = t.value(a);
  Tensor out(av.shape());
  ConstMatMap X = av.mat();
  MatMap Y = out.mat();
  const int m = av.rows(), n = av.cols();
  for (int r = 0; r < m; ++r) {
    double mx = X(r, 0);
    for (int c = 1; c < n; ++c) mx = std::max(mx, X(r, c));
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
      const double e = std::exp(X(r, c) - mx);
      Y(r, c) = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int c = 0; c < n; ++c) Y(r, c) *= inv;
  }
  Var c = t.record(std::move(out), t.requires_grad(a), nullptr);
  return t.attach(c, [&t, a, c] { softmax_backward(t, a, c); });
}

Var masked_softmax(Tape& t, Var scores, const AttnMask& mask) {
  const Tensor& sv = t.value(scores);
  if (mask.rows != sv.rows() || mask.cols != sv.cols()) {
    std::ostringstream os;
    os << "masked_softmax: mask is " << mask.rows << "x" << mask.cols
       << " but scores are " << Tensor::shape_string(sv.shape());
    throw DimensionError(os.str());
  }
  if (mask.all_allowed()) return softmax(t, scores);

  const int m = sv.rows(), n = sv.cols();
  Tensor out(sv.shape());
  ConstMatMap S = sv.mat();
  MatMap Y = out.mat();
  for (int r = 0; r < m; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c)
      if (mask.at(r, c) && S(r, c) > mx) mx = S(r, c);
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw MaskingError("masked_softmax: row " + std::to_string(r) +
                         " forbids every position");
    }
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
      double e = mask.at(r, c) ? std::exp(S(r, c) - mx) : 0.0;
      Y(r, c) = e;
      sum += e;
    }
    Y.row(r) /= sum;
  }
  Var c = t.record(std::move(out), t.requires_grad(scores), nullptr);
  // Forbidden positions carry weight exactly 0, which zeroes their slot in
  // the shared backward, so the mask itself is not needed again.
  return t.attach(c, [&t, scores, c] { softmax_backward(t, scores, c); });
}

namespace {

struct LnCache {
  Tensor xhat;
  Eigen::VectorXd inv_std;
};

std::shared_ptr<LnCache> layernorm_forward(const Tensor& xv, double eps) {
  auto cache = std::make_shared<LnCache>();
  cache->xhat = Tensor(xv.shape());
  const int m = xv.rows(), n = xv.cols();
  cache->inv_std.resize(m);
  ConstMatMap X = xv.mat();
  MatMap H = cache->xhat.mat();
  for (int r = 0; r < m; ++r) {
    double mu = 0.0;
    for (int c = 0; c < n; ++c) mu += X(r, c);
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) var += (X(r, c) - mu) * (X(r, c) - mu);
    var /= n;
    double is = 1.0 / std::sqrt(var + eps);
    cache->inv_std(r) = is;
    for (int c = 0; c < n; ++c) H(r, c) = (X(r, c) - mu) * is;
  }
  return cache;
}

// dx for both layernorm flavours, given dxhat.
void layernorm_input_grad(MatMap GX, const Eigen::MatrixXd& dxhat,
                          const LnCache& cache) {
  ConstMatMap H = cache.xhat.cmat();
  const int m = static_cast<int>(dxhat.rows());
  const int n = static_cast<int>(dxhat.cols());
  for (int r = 0; r < m; ++r) {
    double m1 = 0.0, m2 = 0.0;
    for (int c = 0; c < n; ++c) {
      m1 += dxhat(r, c);
      m2 += dxhat(r, c) * H(r, c);
    }
    m1 /= n;
    m2 /= n;
    for (int c = 0; c < n; ++c) {
      GX(r, c) += cache.inv_std(r) * ((dxhat(r, c) - m1) - H(r, c) * m2);
    }
  }
}

}  // namespace

Var layernorm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  if (gv.size() != xv.cols()) throw DimensionError(two_shapes("layernorm", xv, gv));
  if (bv.size() != xv.cols()) throw DimensionError(two_shapes("layernorm", xv, bv));
  auto cache = layernorm_forward(xv, eps);
  Tensor out(xv.shape());
  MatMap O = out.mat();
  O = cache->xhat.mat();
  O.array().rowwise() *= gv.cvec().transpose().array();
  O.rowwise() += bv.cvec().transpose();
  bool rg = t.requires_grad(x) || t.requires_grad(gain) || t.requires_grad(bias);
  Var c = t.record(std::move(out), rg, nullptr);
  return t.attach(c, [&t, x, gain, bias, c, cache] {
    ConstMatMap G = t.grad_buffer(c).cmat();
    ConstMatMap H = cache->xhat.cmat();
    if (t.requires_grad(gain)) {
      VecMap gg = t.grad_buffer(gain).vec();
      for (Eigen::Index r = 0; r < G.rows(); ++r)
        for (Eigen::Index j = 0; j < G.cols(); ++j) gg(j) += G(r, j) * H(r, j);
    }
    if (t.requires_grad(bias)) {
      VecMap gb = t.grad_buffer(bias).vec();
      for (Eigen::Index r = 0; r < G.rows(); ++r)
        for (Eigen::Index j = 0; j < G.cols(); ++j) gb(j) += G(r, j);
    }
    if (t.requires_grad(x)) {
      Eigen::MatrixXd dxhat = G;
      dxhat.array().rowwise() *= t.value(gain).cvec().transpose().array();
      layernorm_input_grad(t.grad_buffer(x).mat(), dxhat, *cache);
    }
  });
}

Var layernorm_plain(Tape& t, Var x, double eps) {
  const Tensor& xv = t.value(x);
  auto cache = layernorm_forward(xv, eps);
  Tensor out = cache->xhat;
  Var c = t.record(std::move(out), t.requires_grad(x), nullptr);
  return t.attach(c, [&t, x, c, cache] {
    if (!t.requires_grad(x)) return;
    Eigen::MatrixXd dxhat = t.grad_buffer(c).mat();
    layernorm_input_grad(t.grad_buffer(x).mat(), dxhat, *cache);
  });
}

Var attention(Tape& t, Var q, Var k, Var v, const AttnMask& mask) {
  const Tensor& qv = t.value(q);
  const Tensor& kv = t.value(k);
  const Tensor& vv = t.value(v);
  if (qv.cols() != kv.cols()) throw DimensionError(two_shapes("attention q/k", qv, kv));
  if (kv.rows() != vv.rows()) throw DimensionError(two_shapes("attention k/v", kv, vv));
  if (mask.rows != qv.rows() || mask.cols != kv.rows()) {
    std::ostringstream os;
    os << "attention: mask is " << mask.rows << "x" << mask.cols << " but scores are "
       << qv.rows() << "x" << kv.rows();
    throw DimensionError(os.str());
  }
  Var s = matmul_bt(t, q, k);
  Var ss = scale(t, s, 1.0 / std::sqrt(static_cast<double>(qv.cols())));
  Var w = masked_softmax(t, ss, mask);
  return matmul(t, w, v);
}

Var cross_entropy(Tape& t, Var logits, int target) {
  const Tensor& lv = t.value(logits);
  const auto n = lv.size();
  if (target < 0 || target >= n) {
    throw IndexError("cross_entropy: target " + std::to_string(target) +
                     " outside [0, " + std::to_string(n) + ")");
  }
  ConstVecMap L = lv.cvec();
  double mx = L(0);
  for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, L(i));
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += std::exp(L(i) - mx);
  double lse = mx + std::log(acc);
  Var c = t.record(Tensor::scalar(lse - L(target)), t.requires_grad(logits),
                   nullptr);
  return t.attach(c, [&t, logits, c, target, lse] {
    if (!t.requires_grad(logits)) return;
    double g = t.grad_buffer(c)[0];
    ConstVecMap L = t.value(logits).cvec();
    VecMap GL = t.grad_buffer(logits).vec();
    // Scalar exp on purpose: Eigen's packet exp rounds differently from
    // libm, and which elements land in packets depends on the buffer
    // address, so a vectorised expression here is not reproducible.
    for (std::int64_t i = 0; i < L.size(); ++i)
      GL(i) += g * std::exp(L(i) - lse);
    GL(target) -= g;
  });
}

Var cross_entropy_rows(Tape& t, Var logits, std::vector<int> targets) {
  const Tensor& lv = t.value(logits);
  const int m = lv.rows(), n = lv.cols();
  if (static_cast<int>(targets.size()) != m) {
    throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(m) + " rows");
  }
  ConstMatMap L = lv.mat();
  auto lse = std::make_shared<Eigen::VectorXd>(m);
  double total = 0.0;
  int counted = 0;
  for (int r = 0; r < m; ++r) {
    int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt >= n) {
      throw IndexError("cross_entropy_rows: target " + std::to_string(tgt) +
                       " outside [0, " + std::to_string(n) + ") at row " +
                       std::to_string(r));
    }
    double mx = L(r, 0);
    for (int c = 1; c < n; ++c) mx = std::max(mx, L(r, c));
    double acc = 0.0;
    for (int c = 0; c < n; ++c) acc += std::exp(L(r, c) - mx);
    (*lse)(r) = mx + std::log(acc);
    if (tgt >= 0) {
      total += (*lse)(r)-L(r, tgt);
      ++counted;
    }
  }
  if (counted == 0) {
    throw ContractError("cross_entropy_rows: every row is padding");
  }
  Var c = t.record(Tensor::scalar(total / counted), t.requires_grad(logits),
                   nullptr);
  return t.attach(c, [&t, logits, c, targets = std::move(targets), lse, counted] {
    if (!t.requires_grad(logits)) return;
    double g = t.grad_buffer(c)[0] / counted;
    ConstMatMap L = t.value(logits).mat();
    MatMap GL = t.grad_buffer(logits).mat();
    for (int r = 0; r < L.rows(); ++r) {
      int tgt = targets[static_cast<std::size_t>(r)];
      if (tgt < 0) continue;
      for (int cc = 0; cc < L.cols(); ++cc)
        GL(r, cc) += g * std::exp(L(r, cc) - (*lse)(r));
      GL(r, tgt) -= g;
    }
  });
}

Var mean_of(Tape& t, const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ContractError("mean_of: no terms");
  double total = 0.0;
  bool rg = false;
  for (Var s : scalars) {
    if (t.value(s).size() != 1) {
      throw ContractError("mean_of: non-scalar term of shape " +
                          Tensor::shape_string(t.value(s).shape()));
    }
    total += t.value(s)[0];
    rg = rg || t.requires_grad(s);
  }
  const double n = static_cast<double>(scalars.size());
  Var c = t.record(Tensor::scalar(total / n), rg, nullptr);
  return t.attach(c, [&t, scalars, c, n] {
    double g = t.grad_buffer(c)[0] / n;
    for (Var s : scalars)
      if (t.requires_grad(s)) t.grad_buffer(s)[0] += g;
  });
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const int n = t.value(parts[0]).cols();
  int m = 0;
  bool rg = false;
  for (Var p : parts) {
    if (t.value(p).cols() != n) {
      throw DimensionError(two_shapes("concat_rows", t.value(parts[0]), t.value(p)));
    }
    m += t.value(p).rows();
    rg = rg || t.requires_grad(p);
  }
  Tensor out({m, n});
  int at = 0;
  for (Var p : parts) {
    const Tensor& pv = t.value(p);
    out.mat().middleRows(at, pv.rows()) = pv.mat();
    at += pv.rows();
  }
  Var c = t.record(std::move(out), rg, nullptr);
  return t.attach(c, [&t, parts, c] {
    ConstMatMap G = t.grad_buffer(c).cmat();
    int at = 0;
    for (Var p : parts) {
      const int r = t.value(p).rows();
      if (t.requires_grad(p)) t.grad_buffer(p).mat() += G.middleRows(at, r);
      at += r;
    }
  });
}

Var slice_rows(Tape& t, Var a, int begin, int count) {
  const Tensor& av = t.value(a);
  if (begin < 0 || count <= 0 || begin + count > av.rows()) {
    throw IndexError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " +
                     std::to_string(av.rows()) + " rows");
  }
  Tensor out({count, av.cols()});
  out.mat() = av.mat().middleRows(begin, count);
  Var c = t.record(std::move(out), t.requires_grad(a), nullptr);
  return t.attach(c, [&t, a, c, begin, count] {
    if (t.requires_grad(a))
      t.grad_buffer(a).mat().middleRows(begin, count) += t.grad_buffer(c).mat();
  });
}

Var slice_cols(Tape& t, Var a, int begin, int count) {
  const Tensor& av = t.value(a);
  if (begin < 0 || count <= 0 || begin + count > av.cols()) {
    throw IndexError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " +
                     std::to_string(av.cols()) + " cols");
  }
  Tensor out({av.rows(), count});
  out.mat() = av.mat().middleCols(begin, count);
  Var c = t.record(std::move(out), t.requires_grad(a), nullptr);
  return t.attach(c, [&t, a, c, begin, count] {
    if (t.requires_grad(a))
      t.grad_buffer(a).mat().middleCols(begin, count) += t.grad_buffer(c).mat();
  });
}

Var gather_rows(Tape& t, Var table, std::vector<int> ids) {
  const Tensor& tv = t.value(table);
  const int R = tv.rows();
  for (int id : ids) {
    if (id < 0 || id >= R) {
      throw IndexError("gather_rows: id " + std::to_string(id) + " outside [0, " +
                       std::to_string(R) + ")");
    }
  }
  Tensor out({static_cast<int>(ids.size()), tv.cols()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.mat().row(static_cast<Eigen::Index>(i)) = tv.mat().row(ids[i]);
  }
  Var c = t.record(std::move(out), t.requires_grad(table), nullptr);
  return t.attach(c, [&t, table, c, ids = std::move(ids)] {
    if (!t.requires_grad(table)) return;
    ConstMatMap G = t.grad_buffer(c).cmat();
    MatMap GT = t.grad_buffer(table).mat();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      GT.row(ids[i]) += G.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var sum_all(Tape& t, Var a) {
  const Tensor& av = t.value(a);
  double total = 0.0;
  for (std::int64_t i = 0; i < av.size(); ++i) total += av[i];
  Var c = t.record(Tensor::scalar(total), t.requires_grad(a), nullptr);
  return t.attach(c, [&t, a, c] {
    if (t.requires_grad(a))
      t.grad_buffer(a).vec().array() += t.grad_buffer(c)[0];
  });
}

}  // namespace relay::num
