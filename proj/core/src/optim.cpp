#include "roundbuy/optim.hpp"

#include <cmath>

#include "roundbuy/error.hpp"

namespace roundbuy::ad {

namespace {
void check_shapes(const ParamStore& params, const ParamStore& grads) {
  for (const auto& [name, g] : grads) {
    const Tensor* p = params.find(name);
    if (!p) throw Error(Errc::MismatchedStores, "gradient for unknown parameter '" + name + "'");
    if (!p->same_shape(g)) throw Error(Errc::ShapeMismatch, "gradient shape differs for '" + name + "'");
  }
}
}  // namespace

void adam_step(ParamStore& params, const ParamStore& grads, OptimizerState& state) {
  check_shapes(params, grads);
  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    if (!state.first_moment.contains(name)) {
      state.first_moment.add(name, Tensor(g.rows(), g.cols()));
      state.second_moment.add(name, Tensor(g.rows(), g.cols()));
    }
    Tensor& m = state.first_moment.at(name);
    Tensor& v = state.second_moment.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      p[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    }
  }
}

void sgd_step(ParamStore& params, const ParamStore& grads, OptimizerState& state) {
  check_shapes(params, grads);
  ++state.step;
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) p[i] -= state.config.learning_rate * g[i];
  }
}

void optimizer_step(ParamStore& params, const ParamStore& grads, OptimizerState& state) {
  if (state.config.kind == OptimizerKind::Adam) adam_step(params, grads, state);
  else sgd_step(params, grads, state);
}

}  // namespace roundbuy::ad
