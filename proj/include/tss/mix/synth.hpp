#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tss/dsp/waveform.hpp"

namespace tss::mix {

// Parameters of one synthetic talker: a pass band for the carrier noise and
// the rate of the amplitude modulation applied inside each "word".
struct SpeakerProfile {
  std::string id;
  double band_low_hz = 0.0;
  double band_high_hz = 0.0;
  double modulation_hz = 0.0;
};

struct SourceUtterance {
  dsp::Waveform wave;
  std::string speaker_id;
  std::vector<dsp::Interval> activity;  // sorted, disjoint, within the waveform
};

inline constexpr double kActiveRms = 0.1;

// Profile `index` of `count`: band centers log-spaced over 400-4000 Hz with
// neighbouring bands partially overlapping.
SpeakerProfile speaker_profile(int index, int count);

// Band-limited noise, amplitude modulated at the profile rate, in words of
// 0.25-0.8 s separated by 0.1-0.4 s gaps. Samples outside the activity
// intervals are exactly zero; the active part has RMS kActiveRms.
SourceUtterance synth_source(const SpeakerProfile& profile, double duration_s, std::uint64_t seed,
                             int sample_rate = dsp::kDefaultSampleRate);

// White noise restricted to [low_hz, high_hz] through an FFT bin mask.
std::vector<double> band_noise(std::size_t length, double low_hz, double high_hz, int sample_rate,
                               std::uint64_t seed);
// 1/f noise, zero mean, unit RMS.
std::vector<double> pink_noise(std::size_t length, std::uint64_t seed);

// Independent stream seed for item `index` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace tss::mix
