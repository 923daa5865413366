#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace coxplain {

/// Adam with decoupled weight decay. Moment buffers are congruent to the flat
/// parameter vector in canonical order.
struct AdamState {
  std::size_t step = 0;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> v;

  AdamState(std::size_t n_params, double lr_, double weight_decay_)
      : lr(lr_), weight_decay(weight_decay_), m(n_params, 0.0), v(n_params, 0.0) {}
};

/// One optimizer step in place. The decoupled decay is applied after the
/// adaptive update: p -= lr * m_hat / (sqrt(v_hat) + eps); p -= lr * wd * p.
/// Throws on non-finite gradients, reporting the offending index.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace coxplain
