#include "relay/numcore/adam.hpp"

#include <cmath>
#include <string>

namespace relay::num {

void adam_step(ParamStore& store, AdamState& state,
               const std::vector<Tensor>& grads, const AdamConfig& cfg,
               double lr_scale) {
  if (!state.matches(store)) {
    throw ContractError("adam_step: optimiser state does not match the store");
  }
  if (static_cast<int>(grads.size()) != store.count()) {
    throw ContractError("adam_step: " + std::to_string(grads.size()) +
                        " gradients for " + std::to_string(store.count()) +
                        " parameters");
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double lr = cfg.lr * lr_scale;
  for (int i = 0; i < store.count(); ++i) {
    const Tensor& g = grads[static_cast<std::size_t>(i)];
    Tensor& p = store.value_at(i);
    if (!g.same_shape(p)) {
      throw ContractError("adam_step: gradient shape " +
                          Tensor::shape_string(g.shape()) + " for parameter '" +
                          store.name_at(i) + "' of shape " +
                          Tensor::shape_string(p.shape()));
    }
    VecMap m = state.m[static_cast<std::size_t>(i)].vec();
    VecMap v = state.v[static_cast<std::size_t>(i)].vec();
    ConstVecMap ga = g.cvec();
    m.array() = cfg.beta1 * m.array() + (1.0 - cfg.beta1) * ga.array();
    v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * ga.array().square();
    p.vec().array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  }
}

}  // namespace relay::num
