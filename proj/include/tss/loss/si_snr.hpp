#pragma once

#include <span>
#include <vector>

#include "tss/dsp/waveform.hpp"

namespace tss::loss {

// |dB| beyond this is reported as +/-infinity by the evaluation-path
// functions and saturated to +/-kSentinelDb by the training graph heads.
inline constexpr double kSentinelDb = 300.0;
inline constexpr double kDefaultEps = 1e-8;

// Negative SI-SNR in dB, both inputs mean-normalized first:
//   -10 log10(|proj|^2 / |est - proj|^2),  proj = <est,ref> ref / |ref|^2.
// Returns -inf when the residual vanishes (est parallel to ref) and +inf when
// the projection vanishes (est orthogonal to ref). Throws
// UndefinedTargetError for a reference that is zero after normalization.
double si_snr_loss(std::span<const double> estimate, std::span<const double> reference);

// Same quantity via the angle between est and ref: 20 log10(|tan theta|).
// Computed from norms and the inner product only, independent of the
// projection arithmetic above.
double si_snr_geometric(std::span<const double> estimate, std::span<const double> reference);

// eps-extended form, finite for every input:
//   -10 log10(|p|^2 / (|est - p|^2 + eps) + eps),  p = <est,ref> ref / (|ref|^2 + eps).
// A zero reference yields -10 log10(eps).
double si_snr_eps(std::span<const double> estimate, std::span<const double> reference,
                  double eps = kDefaultEps);

struct WeightedLossTerm {
  double value = 0.0;   // dB, loss on the masked signals
  double weight = 0.0;  // fraction of active samples, in [0,1]
};

// Loss on est*z vs ref*z with weight (#ones in z)/T. An empty mask gives a
// zero-weight, zero-value term without evaluating the loss.
WeightedLossTerm weighted_si_snr(std::span<const double> estimate, std::span<const double> reference,
                                 const dsp::VadMask& z, double eps = kDefaultEps);

// sum(value * weight) / sum(weight), summed in order. Throws DomainError
// ("degenerate batch") when every weight is zero.
double batch_weighted_si_snr(std::span<const WeightedLossTerm> terms);

inline constexpr double kDefaultBceClamp = 1e-7;

// Mean binary cross-entropy with probabilities clamped to [c, 1-c].
double bce_loss(std::span<const double> probabilities, std::span<const double> labels,
                double clamp = kDefaultBceClamp);

}  // namespace tss::loss
