#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tss/ad/tensor.hpp"

namespace tss::ad {

struct GradCheckOptions {
  double h = 1e-5;    // central-difference step, must lie in [1e-7, 1e-3]
  double tol = 1e-4;  // max allowed relative error
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor),
  // so coordinates with vanishing gradients are judged on absolute error.
  double abs_floor = 1e-6;
  // Coordinates probed per tensor; 0 probes every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string failure;  // set when a probe produced a non-finite value
};

// Compares the analytic gradient of loss() with respect to each leaf in
// `leaves` against central differences. loss() must rebuild its graph from the
// current leaf values on every call.
GradCheckReport grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                           const GradCheckOptions& options = {});

// Single-input form: f maps a leaf of `shape` holding `input` to a scalar.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Shape& shape,
                           std::vector<double> input, const GradCheckOptions& options = {});

}  // namespace tss::ad
