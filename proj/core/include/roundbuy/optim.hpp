#pragma once

#include <cstdint>

#include "roundbuy/tensor.hpp"

namespace roundbuy::ad {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter moment buffers are created lazily, the first time a gradient
// for that parameter is seen. Parameters absent from a gradient store are left
// untouched by that step.
struct OptimizerState {
  OptimizerConfig config;
  ParamStore first_moment;
  ParamStore second_moment;
  std::int64_t step = 0;

  static OptimizerState adam(double lr) {
    OptimizerState s;
    s.config.kind = OptimizerKind::Adam;
    s.config.learning_rate = lr;
    return s;
  }
  static OptimizerState sgd(double lr) {
    OptimizerState s;
    s.config.kind = OptimizerKind::Sgd;
    s.config.learning_rate = lr;
    return s;
  }
};

// Bias-corrected Adam: m = b1 m + (1-b1) g, v = b2 v + (1-b2) g^2,
// p -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(ParamStore& params, const ParamStore& grads, OptimizerState& state);
void sgd_step(ParamStore& params, const ParamStore& grads, OptimizerState& state);
// Dispatches on state.config.kind.
void optimizer_step(ParamStore& params, const ParamStore& grads, OptimizerState& state);

}  // namespace roundbuy::ad
