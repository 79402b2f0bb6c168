#pragma once

#include <cstddef>
#include <vector>

#include "tss/dsp/waveform.hpp"

namespace tss::dsp {

inline constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz);  // HTK: 2595 log10(1 + f/700)
double mel_to_hz(double mel);

// Triangular mel filters over the one-sided spectrum of an fft_size FFT,
// spanning 0 Hz to Nyquist on the HTK mel scale.
class MelBank {
 public:
  MelBank(int n_filters = 80, int fft_size = 512, int sample_rate = kDefaultSampleRate);

  int n_filters() const { return n_filters_; }
  int fft_size() const { return fft_size_; }
  int sample_rate() const { return sample_rate_; }
  std::size_t n_bins() const { return static_cast<std::size_t>(fft_size_ / 2 + 1); }
  const std::vector<double>& center_hz() const { return center_hz_; }
  // Row-major [n_filters x n_bins].
  const std::vector<double>& weights() const { return weights_; }
  double weight(int filter, std::size_t bin) const { return weights_[filter * n_bins() + bin]; }

 private:
  int n_filters_;
  int fft_size_;
  int sample_rate_;
  std::vector<double> center_hz_;
  std::vector<double> weights_;
};

// Row-major [frames x n_filters] matrix.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<double> values;

  double at(std::size_t frame, std::size_t dim) const { return values[frame * dims + dim]; }
};

// Number of frames a stride-`step` analysis with a 2*step kernel yields:
// floor((T - 2 step) / step) + 1.
std::size_t frame_count(std::size_t length, std::size_t step);

// Log mel energies with one frame per encoder frame. Frame f is a Hann-windowed
// fft_size window centered on sample f*step + step (the center of the
// encoder's kernel), zero-padded outside the signal.
FeatureMatrix logfbank(const Waveform& x, const MelBank& bank, std::size_t frame_step);

// Per-dimension mean/variance normalization over frames.
void normalize_features(FeatureMatrix& feats, double var_floor = 1e-6);

}  // namespace tss::dsp
