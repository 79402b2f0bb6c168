#include "tss/dsp/features.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>

#include "tss/dsp/fft.hpp"
#include "tss/errors.hpp"

namespace tss::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelBank::MelBank(int n_filters, int fft_size, int sample_rate)
    : n_filters_(n_filters), fft_size_(fft_size), sample_rate_(sample_rate) {
  if (n_filters <= 0 || fft_size <= 1 || sample_rate <= 0)
    throw DomainError("MelBank: n_filters, fft_size and sample_rate must be positive");
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  const double mel_step = mel_max / (n_filters + 1);

  center_hz_.resize(static_cast<std::size_t>(n_filters));
  for (int m = 0; m < n_filters; ++m) center_hz_[m] = mel_to_hz((m + 1) * mel_step);

  const std::size_t bins = n_bins();
  weights_.assign(static_cast<std::size_t>(n_filters) * bins, 0.0);
  for (int m = 0; m < n_filters; ++m) {
    const double lo = m * mel_step;
    const double center = (m + 1) * mel_step;
    const double hi = (m + 2) * mel_step;
    for (std::size_t k = 0; k < bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
      double w = 0.0;
      if (mel > lo && mel <= center) {
        w = (mel - lo) / (center - lo);
      } else if (mel > center && mel < hi) {
        w = (hi - mel) / (hi - center);
      }
      weights_[static_cast<std::size_t>(m) * bins + k] = w;
    }
  }
}

std::size_t frame_count(std::size_t length, std::size_t step) {
  if (step == 0) throw DomainError("frame_count: step must be positive");
  if (length < 2 * step)
    throw DomainError("frame_count: signal of " + std::to_string(length) +
                      " samples is shorter than one frame of " + std::to_string(2 * step));
  return (length - 2 * step) / step + 1;
}

FeatureMatrix logfbank(const Waveform& x, const MelBank& bank, std::size_t frame_step) {
  const std::size_t frames = frame_count(x.size(), frame_step);
  const auto fft_size = static_cast<std::size_t>(bank.fft_size());
  const std::size_t bins = bank.n_bins();
  const auto dims = static_cast<std::size_t>(bank.n_filters());

  std::vector<double> window(fft_size);
  for (std::size_t i = 0; i < fft_size; ++i) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(i) / fft_size);
    window[i] = s * s;
  }

  RealFft fft(fft_size);
  std::vector<double> frame(fft_size);
  std::vector<std::complex<double>> spectrum(bins);
  std::vector<double> power_spec(bins);

  // Nonzero bin range of each triangle.
  std::vector<std::pair<std::size_t, std::size_t>> support(dims, {0, 0});
  for (std::size_t m = 0; m < dims; ++m) {
    const double* w = bank.weights().data() + m * bins;
    std::size_t b = 0;
    while (b < bins && w[b] == 0.0) ++b;
    std::size_t e = bins;
    while (e > b && w[e - 1] == 0.0) --e;
    support[m] = {b, e};
  }

  FeatureMatrix out{frames, dims, std::vector<double>(frames * dims)};
  const auto& samples = x.samples();
  const auto half = static_cast<long long>(fft_size / 2);
  for (std::size_t f = 0; f < frames; ++f) {
    const long long start = static_cast<long long>(f * frame_step + frame_step) - half;
    for (std::size_t i = 0; i < fft_size; ++i) {
      const long long idx = start + static_cast<long long>(i);
      const bool inside = idx >= 0 && idx < static_cast<long long>(samples.size());
      frame[i] = inside ? samples[static_cast<std::size_t>(idx)] * window[i] : 0.0;
    }
    fft.forward(frame, spectrum);
    for (std::size_t k = 0; k < bins; ++k) power_spec[k] = std::norm(spectrum[k]);
    for (std::size_t m = 0; m < dims; ++m) {
      const double* w = bank.weights().data() + m * bins;
      double energy = 0.0;
      for (std::size_t k = support[m].first; k < support[m].second; ++k) energy += w[k] * power_spec[k];
      out.values[f * dims + m] = std::log(energy + kLogFloor);
    }
  }
  return out;
}

void normalize_features(FeatureMatrix& feats, double var_floor) {
  if (feats.frames == 0) return;
  const double n = static_cast<double>(feats.frames);
  for (std::size_t d = 0; d < feats.dims; ++d) {
    double mean = 0.0;
    for (std::size_t f = 0; f < feats.frames; ++f) mean += feats.values[f * feats.dims + d];
    mean /= n;
    double var = 0.0;
    for (std::size_t f = 0; f < feats.frames; ++f) {
      const double c = feats.values[f * feats.dims + d] - mean;
      var += c * c;
    }
    const double inv = 1.0 / std::sqrt(var / n + var_floor);
    for (std::size_t f = 0; f < feats.frames; ++f) {
      double& v = feats.values[f * feats.dims + d];
      v = (v - mean) * inv;
    }
  }
}

}  // namespace tss::dsp
