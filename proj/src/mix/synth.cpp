#include "tss/mix/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include "tss/dsp/fft.hpp"
#include "tss/errors.hpp"

namespace tss::mix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> white(std::size_t length, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(length);
  for (double& v : out) v = dist(rng);
  return out;
}

// Filters `x` in place by multiplying its spectrum with gain(bin).
template <typename Gain>
void shape_spectrum(std::vector<double>& x, Gain gain) {
  if (x.size() < 2) return;
  dsp::RealFft fft(x.size());
  std::vector<std::complex<double>> spec(fft.n_bins());
  fft.forward(x, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= gain(k);
  fft.inverse(spec, x);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ (index * 0xd1342543de82ef95ULL + 1));
}

SpeakerProfile speaker_profile(int index, int count) {
  if (count < 1 || index < 0 || index >= count) throw DomainError("speaker_profile: index out of range");
  const double lo = std::log(400.0);
  const double hi = std::log(4000.0);
  const double t = count == 1 ? 0.5 : static_cast<double>(index) / (count - 1);
  const double center = std::exp(lo + t * (hi - lo));
  char id[16];
  std::snprintf(id, sizeof id, "spk%02d", index);
  return {id, center / 1.35, center * 1.35, 3.0 + 4.0 * t};
}

std::vector<double> band_noise(std::size_t length, double low_hz, double high_hz, int sample_rate,
                               std::uint64_t seed) {
  if (!(low_hz >= 0.0 && high_hz > low_hz)) throw DomainError("band_noise: invalid band");
  std::mt19937_64 rng(seed);
  std::vector<double> x = white(length, rng);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(length);
  shape_spectrum(x, [&](std::size_t k) {
    const double f = static_cast<double>(k) * bin_hz;
    return (f >= low_hz && f <= high_hz) ? 1.0 : 0.0;
  });
  return x;
}

std::vector<double> pink_noise(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> x = white(length, rng);
  shape_spectrum(x, [](std::size_t k) { return k == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(k)); });
  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (energy > 0.0) {
    const double scale = 1.0 / std::sqrt(energy / static_cast<double>(length));
    for (double& v : x) v *= scale;
  }
  return x;
}

SourceUtterance synth_source(const SpeakerProfile& profile, double duration_s, std::uint64_t seed,
                             int sample_rate) {
  if (!(duration_s > 0.0)) throw DomainError("synth_source: duration must be positive");
  const auto length = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto samples = [&](double lo_s, double hi_s) {
    return static_cast<std::size_t>(std::llround((lo_s + (hi_s - lo_s) * unit(rng)) * sample_rate));
  };

  std::vector<dsp::Interval> activity;
  std::size_t pos = samples(0.0, 0.2);
  while (pos < length) {
    const std::size_t end = std::min(length, pos + samples(0.25, 0.8));
    activity.push_back({pos, end});
    pos = end + samples(0.1, 0.4);
  }
  if (activity.empty()) activity.push_back({0, length});

  std::vector<double> x = band_noise(length, profile.band_low_hz, profile.band_high_hz, sample_rate, rng());
  std::vector<double> out(length, 0.0);
  const double w = 2.0 * std::numbers::pi * profile.modulation_hz / sample_rate;
  double energy = 0.0;
  std::size_t active = 0;
  for (const auto& iv : activity) {
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (std::size_t i = iv.begin; i < iv.end; ++i) {
      out[i] = x[i] * (0.6 + 0.4 * std::sin(w * static_cast<double>(i - iv.begin) + phase));
      energy += out[i] * out[i];
    }
    active += iv.length();
  }
  if (energy > 0.0) {
    const double scale = kActiveRms / std::sqrt(energy / static_cast<double>(active));
    for (double& v : out) v *= scale;
  }
  return {dsp::Waveform(std::move(out), sample_rate), profile.id, std::move(activity)};
}

}  // namespace tss::mix
