#include "tss/ad/adam.hpp"

#include <cmath>
#include <string>

#include "tss/errors.hpp"

namespace tss::ad {

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (!(state.lr > 0.0)) throw DomainError("adam_step: lr must be positive");
  for (std::size_t p = 0; p < params.size(); ++p)
    for (double g : params[p].grad())
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(p));

  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw DomainError("adam_step: parameter count changed");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto grad = params[p].grad();
    if (grad.empty()) continue;
    auto values = params[p].mutable_values();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (m.size() != values.size()) throw DomainError("adam_step: moment shape mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (p.grad().empty()) continue;
      for (double& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace tss::ad
