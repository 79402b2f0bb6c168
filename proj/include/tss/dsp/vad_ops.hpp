#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "tss/dsp/waveform.hpp"

namespace tss::dsp {

inline constexpr double kDefaultThreshold = 0.4;
inline constexpr double kSmoothingWindowMs = 100.0;

std::size_t window_samples(double window_ms, int sample_rate);

// Centered moving average with edge truncation (divides by the number of
// samples actually inside the signal).
VadMask mean_filter(const VadMask& z, double window_ms, int sample_rate);
VadMask mean_filter_samples(const VadMask& z, std::size_t window);

// 1 where value >= threshold, else 0.
VadMask binarize(const VadMask& z, double threshold);

VadMask intervals_to_mask(std::span<const Interval> intervals, std::size_t length);
std::vector<Interval> mask_to_intervals(const VadMask& z);  // runs of ones

// Interval sidecar files: one "start_sec end_sec" line per active run.
void write_intervals(const std::filesystem::path& path, std::span<const Interval> intervals,
                     int sample_rate);
std::vector<Interval> read_intervals(const std::filesystem::path& path, int sample_rate);

}  // namespace tss::dsp
