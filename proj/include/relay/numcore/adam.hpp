#pragma once

#include <cstdint>
#include <vector>

#include "relay/errors.hpp"
#include "relay/numcore/param_store.hpp"
#include "relay/numcore/tensor.hpp"

namespace relay::num {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers aligned with ParamStore order.
struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init(const ParamStore& store) {
    step = 0;
    m.clear();
    v.clear();
    for (int i = 0; i < store.count(); ++i) {
      m.emplace_back(store.value_at(i).shape());
      v.emplace_back(store.value_at(i).shape());
    }
  }

  bool matches(const ParamStore& store) const {
    if (static_cast<int>(m.size()) != store.count()) return false;
    for (int i = 0; i < store.count(); ++i) {
      if (!m[static_cast<std::size_t>(i)].same_shape(store.value_at(i)))
        return false;
    }
    return true;
  }
};

/// One bias-corrected Adam update in place. `lr_scale` multiplies the
/// configured learning rate (used for schedules).
void adam_step(ParamStore& store, AdamState& state,
               const std::vector<Tensor>& grads, const AdamConfig& cfg,
               double lr_scale = 1.0);

}  // namespace relay::num
