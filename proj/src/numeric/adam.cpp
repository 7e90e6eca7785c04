#include "tmn/adam.hpp"

#include <cmath>
#include <string>

#include "tmn/error.hpp"

namespace tmn {

AdamState::AdamState(AdamHyper h, std::span<const Tensor> params) : hyper(h) {
  if (!(hyper.step_size > 0.0)) throw ConfigError("adam: step size must be positive");
  if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) || !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(hyper.epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  for (const Tensor& p : params) {
    first_moment.emplace_back(p.rows(), p.cols());
    second_moment.emplace_back(p.rows(), p.cols());
  }
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(state.first_moment.size()) + " accumulators");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(*grads[p]) || !params[p]->same_shape(state.first_moment[p])) {
      throw DimensionError("adam_step: parameter " + std::to_string(p) + " has shape " +
                           params[p]->shape_string() + ", gradient " + grads[p]->shape_string());
    }
  }
  ++state.step;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = *params[p];
    const Tensor& g = *grads[p];
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= h.step_size * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  std::vector<Tensor*> p;
  std::vector<const Tensor*> g;
  for (Tensor& t : params) p.push_back(&t);
  for (const Tensor& t : grads) g.push_back(&t);
  adam_step(p, g, state);
}

}  // namespace tmn
