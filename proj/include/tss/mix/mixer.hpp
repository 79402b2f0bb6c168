#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tss/dsp/waveform.hpp"
#include "tss/mix/synth.hpp"

namespace tss::mix {

enum class MixMode { kMin, kMax };

std::string to_string(MixMode mode);
MixMode parse_mix_mode(const std::string& text);

enum class OverlapDenominator { kTotalLength, kActiveUnion };

struct MixSpec {
  MixMode mode = MixMode::kMax;
  double speaker_snr_low_db = -5.0;
  double speaker_snr_high_db = 5.0;
  double noise_prob = 0.5;
  double noise_snr_low_db = 10.0;
  double noise_snr_high_db = 20.0;
  double clip_seconds = 3.0;
  std::uint64_t rng_seed = 0;
  // WAV files to draw noise from; seeded pink noise when empty.
  std::vector<std::filesystem::path> noise_files;
  OverlapDenominator overlap_denominator = OverlapDenominator::kTotalLength;

  void validate() const;
};

struct MixMetadata {
  std::string mode;  // "min", "max" or "sparse"
  double snr_db = 0.0;
  std::optional<double> noise_snr_db;
  std::uint64_t seed = 0;
  std::string target_id;
  std::string interferer_id;
};

struct MixtureExample {
  dsp::Waveform mixture;
  dsp::Waveform target;
  dsp::VadMask z;
  double overlap_ratio = 0.0;
  // Spans occupied by each utterance inside the mixture.
  dsp::Interval target_span;
  dsp::Interval interferer_span;
  MixMetadata meta;
};

// Mean square over the samples covered by `intervals`.
double active_power(std::span<const double> x, std::span<const dsp::Interval> intervals);

// Scale factor g such that 10 log10(clean_power / (g^2 interference_power)) = target_db.
double snr_gain(double clean_power, double interference_power, double target_db);

// Interference scaled against the clean source, both powers taken over the
// respective activity intervals.
dsp::Waveform rescale_to_snr(const SourceUtterance& clean, const SourceUtterance& interference, double target_db);

double overlap_ratio(std::span<const dsp::Interval> target, std::span<const dsp::Interval> interference,
                     std::size_t total_length, OverlapDenominator denominator = OverlapDenominator::kTotalLength);

// Two-speaker mixture of target `a` and interferer `b` in min or max mode.
MixtureExample mix(const SourceUtterance& a, const SourceUtterance& b, const MixSpec& spec);

// Same, with `a` and `b` placed at explicit offsets on a timeline of
// `total_length` samples (both must fit). Used for overlap-controlled sets.
MixtureExample mix_placed(const SourceUtterance& a, std::size_t a_offset, const SourceUtterance& b,
                          std::size_t b_offset, std::size_t total_length, const MixSpec& spec,
                          std::uint64_t seed, const std::string& mode_label);

struct SparseItem {
  std::optional<MixtureExample> example;  // empty when skipped
  double requested_overlap = 0.0;
  std::string skip_reason;
};

// n examples spread evenly over the overlap targets. Each drawn pair is used
// twice with the speakers swapping the target role. `noisy` keeps spec.noise_prob,
// otherwise noise is disabled.
std::vector<SparseItem> gen_sparse_set(std::span<const SourceUtterance> pool, std::size_t n,
                                       std::span<const double> overlap_targets, bool noisy, const MixSpec& spec,
                                       std::uint64_t seed);

// Seeded random crops of clip_seconds; shorter examples are zero-padded at the
// end with z = 0 in the padding.
std::vector<MixtureExample> clip_batch(std::span<const MixtureExample> examples, double clip_seconds,
                                       std::uint64_t seed);
MixtureExample clip_example(const MixtureExample& example, std::size_t clip_length, std::uint64_t seed);

}  // namespace tss::mix
