#pragma once

#include <span>
#include <vector>

#include "tss/ad/tensor.hpp"
#include "tss/dsp/waveform.hpp"
#include "tss/loss/si_snr.hpp"

// Differentiable loss heads. Estimates are tensors of any shape holding T
// values (the model emits [1, T]); references and labels are constants.
namespace tss::loss {

struct JointLossConfig {
  double lambda = 5.0;
  double eps = kDefaultEps;
  double bce_clamp = kDefaultBceClamp;

  void validate() const;
};

// eps-extended SI-SNR loss, saturated to [-kSentinelDb, kSentinelDb].
ad::Tensor si_snr_eps_head(const ad::Tensor& estimate, std::span<const double> reference,
                           double eps = kDefaultEps);

// Masked loss value of one item (weight is returned separately). Undefined
// tensor when the mask is empty.
ad::Tensor weighted_si_snr_head(const ad::Tensor& estimate, std::span<const double> reference,
                                const dsp::VadMask& z, double eps = kDefaultEps);

ad::Tensor bce_head(const ad::Tensor& probabilities, std::span<const double> labels,
                    double clamp = kDefaultBceClamp);

struct JointItem {
  ad::Tensor estimate;        // s-hat
  ad::Tensor vad_probability; // z-hat
  std::span<const double> target;
  const dsp::VadMask* labels = nullptr;
};

// Batch objective: sum_b w_b v_b / sum_b w_b + lambda * mean_b BCE_b.
// Items with w_b = 0 contribute only through BCE; when every weight is zero the
// separation term is dropped entirely.
ad::Tensor joint_loss(std::span<const JointItem> batch, const JointLossConfig& config);

// Per-item share of joint_loss for a batch whose weights sum to weight_sum and
// which has batch_size items. Summing these over the batch reproduces
// joint_loss, so gradients can be accumulated one item at a time.
ad::Tensor joint_item_loss(const JointItem& item, double weight_sum, std::size_t batch_size,
                           const JointLossConfig& config);

// Baseline objective for one item: plain eps SI-SNR on the full signal.
ad::Tensor baseline_item_loss(const ad::Tensor& estimate, std::span<const double> target,
                              std::size_t batch_size, double eps = kDefaultEps);

double duration_weight(const dsp::VadMask& z);

}  // namespace tss::loss
