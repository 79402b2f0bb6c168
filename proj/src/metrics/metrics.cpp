#include "tss/metrics/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "tss/dsp/waveform.hpp"
#include "tss/errors.hpp"
#include "tss/loss/si_snr.hpp"

namespace tss::metrics {

namespace {

double cap(double db, bool& capped) {
  if (db > kCapDb) {
    capped = true;
    return kCapDb;
  }
  if (db < -kCapDb) {
    capped = true;
    return -kCapDb;
  }
  return db;
}

std::string format_value(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

double sdr(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) throw DomainError("sdr: length mismatch");
  const std::vector<double> e = dsp::mean_normalize(estimate);
  const std::vector<double> s = dsp::mean_normalize(reference);
  double ss = 0.0;
  double dd = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ss += s[i] * s[i];
    dd += (s[i] - e[i]) * (s[i] - e[i]);
  }
  if (ss == 0.0) throw UndefinedTargetError("sdr: reference is zero after mean normalization");
  if (dd == 0.0) return std::numeric_limits<double>::infinity();
  const double db = 10.0 * std::log10(ss / dd);
  if (db > loss::kSentinelDb) return std::numeric_limits<double>::infinity();
  return db;
}

double si_snr_metric(std::span<const double> estimate, std::span<const double> reference) {
  return -loss::si_snr_loss(estimate, reference);
}

bool is_digital_silence(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

EvalResult improvements(std::span<const double> mixture, std::span<const double> estimate,
                        std::span<const double> reference) {
  if (mixture.size() != estimate.size() || estimate.size() != reference.size())
    throw DomainError("improvements: length mismatch");
  EvalResult r;
  if (is_digital_silence(estimate)) {
    r.silent_estimate = true;
    r.sdr_db = cap(sdr(estimate, reference), r.capped);
    r.si_snr_db = -kCapDb;
    return r;
  }
  r.sdr_db = cap(sdr(estimate, reference), r.capped);
  r.si_snr_db = cap(si_snr_metric(estimate, reference), r.capped);
  const double sdr_mix = cap(sdr(mixture, reference), r.capped);
  const double si_mix = cap(si_snr_metric(mixture, reference), r.capped);
  r.sdri_db = r.sdr_db - sdr_mix;
  r.si_snri_db = r.si_snr_db - si_mix;
  return r;
}

int overlap_bucket(double overlap_ratio) {
  if (!(overlap_ratio >= 0.0 && overlap_ratio <= 1.0)) throw DomainError("overlap_bucket: ratio outside [0, 1]");
  return static_cast<int>(std::lround(overlap_ratio * 5.0)) * 20;
}

BucketReport bucket_report(std::span<const TaggedResult> results, std::vector<int> buckets) {
  struct Acc {
    std::size_t n = 0;
    double sdri = 0.0;
    double si = 0.0;
    std::size_t silent = 0;
  };
  std::map<int, Acc> acc;
  Acc total;
  for (const auto& t : results) {
    for (Acc* a : {&acc[t.bucket], &total}) {
      ++a->n;
      a->sdri += t.result.sdri_db;
      a->si += t.result.si_snri_db;
      a->silent += t.result.silent_estimate ? 1 : 0;
    }
  }
  if (buckets.empty())
    for (const auto& [b, a] : acc) buckets.push_back(b);
  std::sort(buckets.begin(), buckets.end());
  auto row = [](std::string label, const Acc& a) {
    BucketRow r;
    r.label = std::move(label);
    r.n = a.n;
    r.n_silent_flagged = a.silent;
    if (a.n > 0) {
      r.sdri_mean = a.sdri / static_cast<double>(a.n);
      r.si_snri_mean = a.si / static_cast<double>(a.n);
    }
    return r;
  };
  BucketReport report;
  for (int b : buckets) {
    const auto it = acc.find(b);
    report.buckets.push_back(row(std::to_string(b) + "%", it == acc.end() ? Acc{} : it->second));
  }
  report.average = row("Average", total);
  return report;
}

std::string BucketReport::to_csv() const {
  std::string out = "bucket,n,SDRi_mean,SISNRi_mean,n_silent_flagged\n";
  auto line = [&](const BucketRow& r) {
    out += r.label + "," + std::to_string(r.n) + "," + format_value(r.sdri_mean) + "," +
           format_value(r.si_snri_mean) + "," + std::to_string(r.n_silent_flagged) + "\n";
  };
  for (const auto& r : buckets) line(r);
  line(average);
  return out;
}

double rtf(double processing_seconds, double audio_seconds) {
  if (!(audio_seconds > 0.0)) throw DomainError("rtf: audio duration is zero");
  return processing_seconds / audio_seconds;
}

double RtfMeasurement::rtf() const { return metrics::rtf(processing_seconds, audio_seconds); }

RtfMeasurement measure_rtf(std::size_t count, const std::function<void(std::size_t)>& process,
                           const std::function<double(std::size_t)>& audio_seconds) {
  RtfMeasurement m;
  for (std::size_t i = 0; i < count; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    process(i);
    const auto t1 = std::chrono::steady_clock::now();
    m.processing_seconds += std::chrono::duration<double>(t1 - t0).count();
    m.audio_seconds += audio_seconds(i);
  }
  if (!(m.audio_seconds > 0.0)) throw DomainError("measure_rtf: audio duration is zero");
  return m;
}

std::string rtf_csv(std::span<const RtfRow> rows) {
  std::string out = "k,SDRi_mean,SISNRi_mean,RTF\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,%.4f\n", r.k, r.sdri_mean, r.si_snri_mean, r.rtf);
    out += buf;
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace tss::metrics
