#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tss/ad/tensor.hpp"

namespace tss::ad {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient (missing gradients count as zero). Throws NumericError, leaving
// parameters untouched, if any gradient is non-finite.
void adam_step(std::span<Tensor> params, AdamState& state);

// Scales all gradients so their joint L2 norm is at most max_norm; returns the
// norm before scaling.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

void zero_grads(std::span<Tensor> params);

}  // namespace tss::ad
