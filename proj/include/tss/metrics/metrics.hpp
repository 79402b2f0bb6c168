#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tss::metrics {

inline constexpr double kCapDb = 300.0;

// Energy-ratio SDR, 10 log10(|s|^2 / |s - s_hat|^2) after mean normalization
// (not BSS-eval). +inf when s_hat equals s; UndefinedTargetError for s = 0.
double sdr(std::span<const double> estimate, std::span<const double> reference);
// Negated SI-SNR loss, same sentinel conventions.
double si_snr_metric(std::span<const double> estimate, std::span<const double> reference);

struct EvalResult {
  double sdr_db = 0.0;
  double si_snr_db = 0.0;
  double sdri_db = 0.0;
  double si_snri_db = 0.0;
  bool silent_estimate = false;
  bool capped = false;  // some value hit the +/-kCapDb sentinel cap
};

bool is_digital_silence(std::span<const double> x);

// Improvements of the estimate over the unprocessed mixture. A silent estimate
// gets 0 dB improvements and is flagged.
EvalResult improvements(std::span<const double> mixture, std::span<const double> estimate,
                        std::span<const double> reference);

// Nearest 20% bucket of an overlap ratio: 0, 20, ..., 100.
int overlap_bucket(double overlap_ratio);

struct TaggedResult {
  EvalResult result;
  int bucket = 0;
};

struct BucketRow {
  std::string label;  // "0%".."100%" or "Average"
  std::size_t n = 0;
  std::optional<double> sdri_mean;  // empty for a missing bucket
  std::optional<double> si_snri_mean;
  std::size_t n_silent_flagged = 0;
};

struct BucketReport {
  std::vector<BucketRow> buckets;  // requested buckets in ascending order
  BucketRow average;

  std::string to_csv() const;
};

// `buckets` lists the buckets to emit; empty means those present in results.
BucketReport bucket_report(std::span<const TaggedResult> results, std::vector<int> buckets = {});

struct RtfMeasurement {
  double processing_seconds = 0.0;
  double audio_seconds = 0.0;
  double rtf() const;
};

// Times `process` for each item sequentially on the calling thread and sums
// durations. `audio_seconds` gives each item's duration.
RtfMeasurement measure_rtf(std::size_t count, const std::function<void(std::size_t)>& process,
                           const std::function<double(std::size_t)>& audio_seconds);
double rtf(double processing_seconds, double audio_seconds);

struct RtfRow {
  int k = 0;
  double sdri_mean = 0.0;
  double si_snri_mean = 0.0;
  double rtf = 0.0;
};

std::string rtf_csv(std::span<const RtfRow> rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tss::metrics
