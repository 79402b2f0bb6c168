#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tss::dsp {

inline constexpr int kDefaultSampleRate = 16000;

// Mono signal in double precision. Samples are finite; sample_rate > 0.
class Waveform {
 public:
  Waveform() = default;
  explicit Waveform(std::vector<double> samples, int sample_rate = kDefaultSampleRate);

  static Waveform zeros(std::size_t length, int sample_rate = kDefaultSampleRate);

  const std::vector<double>& samples() const { return samples_; }
  std::vector<double>& mutable_samples() { return samples_; }
  std::span<const double> view() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double seconds() const { return static_cast<double>(samples_.size()) / sample_rate_; }
  double operator[](std::size_t i) const { return samples_[i]; }

  bool operator==(const Waveform&) const = default;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kDefaultSampleRate;
};

// Per-sample activity in [0,1]; binary after binarize().
class VadMask {
 public:
  VadMask() = default;
  explicit VadMask(std::vector<double> values);

  static VadMask constant(std::size_t length, double value);

  const std::vector<double>& values() const { return values_; }
  std::span<const double> view() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  bool is_binary() const;
  std::size_t count_active() const;  // number of exact ones

  bool operator==(const VadMask&) const = default;

 private:
  std::vector<double> values_;
};

// Half-open sample span [begin, end).
struct Interval {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end > begin ? end - begin : 0; }
  bool operator==(const Interval&) const = default;
};

Waveform mean_normalize(const Waveform& x);
std::vector<double> mean_normalize(std::span<const double> x);

Waveform apply_mask(const Waveform& s, const VadMask& z);

double power(std::span<const double> x);  // mean square

}  // namespace tss::dsp
