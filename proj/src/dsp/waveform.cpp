#include "tss/dsp/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tss/errors.hpp"

namespace tss::dsp {

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw DomainError("Waveform: sample_rate must be positive");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i]))
      throw DomainError("Waveform: non-finite sample at index " + std::to_string(i));
  }
}

Waveform Waveform::zeros(std::size_t length, int sample_rate) {
  return Waveform(std::vector<double>(length, 0.0), sample_rate);
}

VadMask::VadMask(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError("VadMask: value outside [0,1] at index " + std::to_string(i));
  }
}

VadMask VadMask::constant(std::size_t length, double value) {
  return VadMask(std::vector<double>(length, value));
}

bool VadMask::is_binary() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::size_t VadMask::count_active() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), 1.0));
}

std::vector<double> mean_normalize(std::span<const double> x) {
  if (x.empty()) throw DomainError("mean_normalize: empty input");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [mean](double v) { return v - mean; });
  return out;
}

Waveform mean_normalize(const Waveform& x) {
  return Waveform(mean_normalize(x.view()), x.sample_rate());
}

Waveform apply_mask(const Waveform& s, const VadMask& z) {
  if (s.size() != z.size())
    throw DomainError("apply_mask: length mismatch (" + std::to_string(s.size()) + " vs " +
                      std::to_string(z.size()) + ")");
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s[i] * z[i];
  return Waveform(std::move(out), s.sample_rate());
}

double power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace tss::dsp
