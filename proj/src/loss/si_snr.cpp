#include "tss/loss/si_snr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tss/errors.hpp"

namespace tss::loss {

namespace {

void require_equal_lengths(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size())
    throw DomainError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  if (a.empty()) throw DomainError(std::string(op) + ": empty input");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double to_db_or_sentinel(double db) {
  if (db > kSentinelDb) return std::numeric_limits<double>::infinity();
  if (db < -kSentinelDb) return -std::numeric_limits<double>::infinity();
  return db;
}

}  // namespace

double si_snr_loss(std::span<const double> estimate, std::span<const double> reference) {
  require_equal_lengths(estimate, reference, "si_snr_loss");
  const auto est = dsp::mean_normalize(estimate);
  const auto ref = dsp::mean_normalize(reference);
  const double ref_energy = dot(ref, ref);
  if (ref_energy == 0.0) throw UndefinedTargetError("si_snr_loss: reference is silent");

  const double alpha = dot(est, ref) / ref_energy;
  double proj_energy = 0.0;
  double residual_energy = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double p = alpha * ref[i];
    const double r = est[i] - p;
    proj_energy += p * p;
    residual_energy += r * r;
  }
  if (residual_energy == 0.0) return -std::numeric_limits<double>::infinity();
  if (proj_energy == 0.0) return std::numeric_limits<double>::infinity();
  return to_db_or_sentinel(-10.0 * std::log10(proj_energy / residual_energy));
}

double si_snr_geometric(std::span<const double> estimate, std::span<const double> reference) {
  require_equal_lengths(estimate, reference, "si_snr_geometric");
  const auto est = dsp::mean_normalize(estimate);
  const auto ref = dsp::mean_normalize(reference);
  const double ee = dot(est, est);
  const double rr = dot(ref, ref);
  if (rr == 0.0) throw UndefinedTargetError("si_snr_geometric: reference is silent");
  const double er = dot(est, ref);
  // |est|^2 |ref|^2 = <est,ref>^2 + |est ^ ref|^2 (Lagrange identity).
  const double cross_sq = std::max(0.0, ee * rr - er * er);
  if (cross_sq == 0.0) return -std::numeric_limits<double>::infinity();
  if (er == 0.0) return std::numeric_limits<double>::infinity();
  const double tan_theta = std::sqrt(cross_sq) / std::abs(er);
  return to_db_or_sentinel(20.0 * std::log10(tan_theta));
}

double si_snr_eps(std::span<const double> estimate, std::span<const double> reference, double eps) {
  require_equal_lengths(estimate, reference, "si_snr_eps");
  if (!(eps > 0.0)) throw DomainError("si_snr_eps: eps must be positive");
  const auto est = dsp::mean_normalize(estimate);
  const auto ref = dsp::mean_normalize(reference);
  const double alpha = dot(est, ref) / (dot(ref, ref) + eps);
  double proj_energy = 0.0;
  double residual_energy = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double p = alpha * ref[i];
    const double r = est[i] - p;
    proj_energy += p * p;
    residual_energy += r * r;
  }
  return -10.0 * std::log10(proj_energy / (residual_energy + eps) + eps);
}

WeightedLossTerm weighted_si_snr(std::span<const double> estimate, std::span<const double> reference,
                                 const dsp::VadMask& z, double eps) {
  require_equal_lengths(estimate, reference, "weighted_si_snr");
  if (z.size() != estimate.size()) throw DomainError("weighted_si_snr: mask length mismatch");
  if (!z.is_binary()) throw DomainError("weighted_si_snr: mask must be binary");
  const std::size_t active = z.count_active();
  if (active == 0) return {0.0, 0.0};
  std::vector<double> est(estimate.size()), ref(reference.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    est[i] = estimate[i] * z[i];
    ref[i] = reference[i] * z[i];
  }
  return {si_snr_eps(est, ref, eps), static_cast<double>(active) / static_cast<double>(z.size())};
}

double batch_weighted_si_snr(std::span<const WeightedLossTerm> terms) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& t : terms) {
    if (!(t.weight >= 0.0 && t.weight <= 1.0)) throw DomainError("batch_weighted_si_snr: weight outside [0,1]");
    if (t.weight == 0.0) continue;
    num += t.value * t.weight;
    den += t.weight;
  }
  if (den == 0.0) throw DomainError("batch_weighted_si_snr: degenerate batch (all weights zero)");
  return num / den;
}

double bce_loss(std::span<const double> probabilities, std::span<const double> labels, double clamp) {
  require_equal_lengths(probabilities, labels, "bce_loss");
  if (!(clamp > 0.0 && clamp < 0.5)) throw DomainError("bce_loss: clamp must lie in (0, 0.5)");
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i], clamp, 1.0 - clamp);
    acc -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return acc / static_cast<double>(labels.size());
}

}  // namespace tss::loss
