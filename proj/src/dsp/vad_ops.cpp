#include "tss/dsp/vad_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "tss/errors.hpp"

namespace tss::dsp {

std::size_t window_samples(double window_ms, int sample_rate) {
  if (!(window_ms > 0.0)) throw DomainError("mean_filter: window_ms must be positive");
  const auto w = static_cast<std::size_t>(std::llround(window_ms / 1000.0 * sample_rate));
  return std::max<std::size_t>(w, 1);
}

VadMask mean_filter(const VadMask& z, double window_ms, int sample_rate) {
  return mean_filter_samples(z, window_samples(window_ms, sample_rate));
}

VadMask mean_filter_samples(const VadMask& z, std::size_t window) {
  if (window == 0) throw DomainError("mean_filter: window must be positive");
  const std::size_t n = z.size();
  if (n == 0) return z;
  // Prefix sums of the offset signal keep constant inputs exact.
  const double base = z[0];
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (z[i] - base);

  const std::size_t left = window / 2;
  const std::size_t right = window - 1 - left;
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= left ? t - left : 0;
    const std::size_t hi = std::min(n, t + right + 1);
    const double mean = base + (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    out[t] = std::clamp(mean, 0.0, 1.0);
  }
  return VadMask(std::move(out));
}

VadMask binarize(const VadMask& z, double threshold) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z[i] >= threshold ? 1.0 : 0.0;
  return VadMask(std::move(out));
}

VadMask intervals_to_mask(std::span<const Interval> intervals, std::size_t length) {
  std::vector<double> out(length, 0.0);
  for (const auto& iv : intervals) {
    const std::size_t end = std::min(iv.end, length);
    for (std::size_t i = iv.begin; i < end; ++i) out[i] = 1.0;
  }
  return VadMask(std::move(out));
}

std::vector<Interval> mask_to_intervals(const VadMask& z) {
  std::vector<Interval> out;
  std::size_t i = 0;
  while (i < z.size()) {
    if (z[i] == 1.0) {
      const std::size_t begin = i;
      while (i < z.size() && z[i] == 1.0) ++i;
      out.push_back({begin, i});
    } else {
      ++i;
    }
  }
  return out;
}

void write_intervals(const std::filesystem::path& path, std::span<const Interval> intervals,
                     int sample_rate) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_intervals: cannot open " + path.string());
  char line[64];
  for (const auto& iv : intervals) {
    std::snprintf(line, sizeof(line), "%.6f %.6f\n", static_cast<double>(iv.begin) / sample_rate,
                  static_cast<double>(iv.end) / sample_rate);
    out << line;
  }
  if (!out) throw IoError("write_intervals: write failed for " + path.string());
}

std::vector<Interval> read_intervals(const std::filesystem::path& path, int sample_rate) {
  std::ifstream in(path);
  if (!in) throw IoError("read_intervals: cannot open " + path.string());
  std::vector<Interval> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    double start = 0.0, end = 0.0;
    if (!(fields >> start >> end) || start < 0.0 || end < start)
      throw FormatError("read_intervals: bad line " + std::to_string(line_no) + " in " +
                        path.string());
    Interval iv{static_cast<std::size_t>(std::llround(start * sample_rate)),
                static_cast<std::size_t>(std::llround(end * sample_rate))};
    if (!out.empty() && iv.begin < out.back().end)
      throw FormatError("read_intervals: intervals not sorted/disjoint in " + path.string());
    out.push_back(iv);
  }
  return out;
}

}  // namespace tss::dsp
