#include "tss/loss/graph.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tss/ad/ops.hpp"
#include "tss/errors.hpp"

namespace tss::loss {

using ad::Tensor;

void JointLossConfig::validate() const {
  if (!(lambda >= 0.0)) throw DomainError("JointLossConfig: lambda must be >= 0");
  if (!(eps > 0.0)) throw DomainError("JointLossConfig: eps must be > 0");
  if (!(bce_clamp > 0.0 && bce_clamp < 0.5)) throw DomainError("JointLossConfig: bce_clamp must lie in (0, 0.5)");
}

namespace {

void require_length(const Tensor& t, std::size_t n, const char* op) {
  if (t.numel() != n)
    throw DomainError(std::string(op) + ": tensor has " + std::to_string(t.numel()) + " values, expected " +
                      std::to_string(n));
}

Tensor constant_like(const Tensor& t, std::vector<double> values) {
  return Tensor::constant(t.shape(), std::move(values));
}

}  // namespace

Tensor si_snr_eps_head(const Tensor& estimate, std::span<const double> reference, double eps) {
  require_length(estimate, reference.size(), "si_snr_eps_head");
  if (reference.empty()) throw DomainError("si_snr_eps_head: empty input");
  const auto ref_norm = dsp::mean_normalize(reference);
  double ref_energy = 0.0;
  for (double v : ref_norm) ref_energy += v * v;
  const Tensor ref = constant_like(estimate, ref_norm);

  const Tensor est = ad::sub(estimate, ad::broadcast(ad::mean(estimate), estimate.shape()));
  const Tensor alpha = ad::scale(ad::sum(ad::mul(est, ref)), 1.0 / (ref_energy + eps));
  const Tensor proj = ad::scale_by(ref, alpha);
  const Tensor residual = ad::sub(est, proj);
  const Tensor num = ad::sum(ad::mul(proj, proj));
  const Tensor den = ad::add_scalar(ad::sum(ad::mul(residual, residual)), eps);
  const Tensor ratio = ad::add_scalar(ad::div(num, den), eps);
  const Tensor db = ad::scale(ad::log(ratio), -10.0 / std::numbers::ln10);
  return ad::clamp(db, -kSentinelDb, kSentinelDb);
}

double duration_weight(const dsp::VadMask& z) {
  if (z.size() == 0) return 0.0;
  return static_cast<double>(z.count_active()) / static_cast<double>(z.size());
}

Tensor weighted_si_snr_head(const Tensor& estimate, std::span<const double> reference, const dsp::VadMask& z,
                            double eps) {
  require_length(estimate, reference.size(), "weighted_si_snr_head");
  if (z.size() != reference.size()) throw DomainError("weighted_si_snr_head: mask length mismatch");
  if (!z.is_binary()) throw DomainError("weighted_si_snr_head: mask must be binary");
  if (z.count_active() == 0) return {};
  std::vector<double> masked_ref(reference.size());
  for (std::size_t i = 0; i < masked_ref.size(); ++i) masked_ref[i] = reference[i] * z[i];
  const Tensor masked_est = ad::mul(estimate, constant_like(estimate, z.values()));
  return si_snr_eps_head(masked_est, masked_ref, eps);
}

Tensor bce_head(const Tensor& probabilities, std::span<const double> labels, double clamp) {
  require_length(probabilities, labels.size(), "bce_head");
  if (labels.empty()) throw DomainError("bce_head: empty input");
  const Tensor p = ad::clamp(probabilities, clamp, 1.0 - clamp);
  std::vector<double> inv(labels.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - labels[i];
  const Tensor z = constant_like(probabilities, {labels.begin(), labels.end()});
  const Tensor not_z = constant_like(probabilities, std::move(inv));
  const Tensor one_minus_p = ad::add_scalar(ad::scale(p, -1.0), 1.0);
  const Tensor ll = ad::add(ad::mul(z, ad::log(p)), ad::mul(not_z, ad::log(one_minus_p)));
  return ad::scale(ad::mean(ll), -1.0);
}

Tensor joint_item_loss(const JointItem& item, double weight_sum, std::size_t batch_size,
                       const JointLossConfig& config) {
  config.validate();
  if (item.labels == nullptr) throw DomainError("joint_item_loss: missing VAD labels");
  if (batch_size == 0) throw DomainError("joint_item_loss: empty batch");
  const dsp::VadMask& z = *item.labels;
  Tensor total = ad::scale(bce_head(item.vad_probability, z.values(), config.bce_clamp),
                           config.lambda / static_cast<double>(batch_size));
  const double w = duration_weight(z);
  if (w > 0.0 && weight_sum > 0.0) {
    const Tensor sep = weighted_si_snr_head(item.estimate, item.target, z, config.eps);
    total = ad::add(total, ad::scale(sep, w / weight_sum));
  }
  return total;
}

Tensor joint_loss(std::span<const JointItem> batch, const JointLossConfig& config) {
  if (batch.empty()) throw DomainError("joint_loss: empty batch");
  double weight_sum = 0.0;
  for (const auto& item : batch) {
    if (item.labels == nullptr) throw DomainError("joint_loss: missing VAD labels");
    weight_sum += duration_weight(*item.labels);
  }
  Tensor total;
  for (const auto& item : batch) {
    const Tensor term = joint_item_loss(item, weight_sum, batch.size(), config);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

Tensor baseline_item_loss(const Tensor& estimate, std::span<const double> target, std::size_t batch_size,
                          double eps) {
  if (batch_size == 0) throw DomainError("baseline_item_loss: empty batch");
  return ad::scale(si_snr_eps_head(estimate, target, eps), 1.0 / static_cast<double>(batch_size));
}

}  // namespace tss::loss
