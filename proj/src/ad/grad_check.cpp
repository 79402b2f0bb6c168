#include "tss/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tss/errors.hpp"

namespace tss::ad {

GradCheckReport grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                           const GradCheckOptions& options) {
  if (!(options.h >= 1e-7 && options.h <= 1e-3))
    throw DomainError("grad_check: h must lie in [1e-7, 1e-3]");
  GradCheckReport report;

  for (auto& leaf : leaves) leaf.zero_grad();
  {
    const Tensor value = loss();
    if (!std::isfinite(value.item())) {
      report.passed = false;
      report.failure = "non-finite loss at the unperturbed point";
      return report;
    }
    value.backward();
  }

  std::mt19937_64 rng(options.seed);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    const std::size_t n = leaf.numel();
    const std::vector<double> analytic = leaf.grad().empty() ? std::vector<double>(n, 0.0)
                                                             : std::vector<double>(leaf.grad().begin(), leaf.grad().end());
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor > 0 && n > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = leaf.mutable_values();
    for (std::size_t idx : coords) {
      const double original = values[idx];
      values[idx] = original + options.h;
      const double plus = loss().item();
      values[idx] = original - options.h;
      const double minus = loss().item();
      values[idx] = original;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        report.passed = false;
        report.failure = "non-finite loss when probing tensor " + std::to_string(li) + " index " +
                         std::to_string(idx);
        return report;
      }
      const double numeric = (plus - minus) / (2.0 * options.h);
      const double a = analytic[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = li;
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Shape& shape,
                           std::vector<double> input, const GradCheckOptions& options) {
  Tensor leaf = Tensor::parameter(shape, std::move(input));
  return grad_check([&] { return f(leaf); }, {leaf}, options);
}

}  // namespace tss::ad
