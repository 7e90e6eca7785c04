#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tmn/tensor.hpp"

namespace tmn {

struct AdamHyper {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one parameter group.
struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamHyper h, std::span<const Tensor> params);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state);
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace tmn
