#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "helpers.hpp"
#include "tss/errors.hpp"
#include "tss/loss/si_snr.hpp"
#include "tss/metrics/metrics.hpp"

using namespace tss;
using namespace tss::metrics;
using tss::testing::gaussian;

namespace {

// Independent scalar SDR in long double, mean removal done inline.
double sdr_oracle(const std::vector<double>& e, const std::vector<double>& s) {
  long double me = 0, ms = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    me += e[i];
    ms += s[i];
  }
  me /= s.size();
  ms /= s.size();
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const long double sv = s[i] - ms;
    const long double d = sv - (e[i] - me);
    num += sv * sv;
    den += d * d;
  }
  return static_cast<double>(10.0L * std::log10(num / den));
}

TaggedResult tagged(int bucket, double sdri, double si, bool silent = false) {
  TaggedResult t;
  t.bucket = bucket;
  t.result.sdri_db = sdri;
  t.result.si_snri_db = si;
  t.result.silent_estimate = silent;
  return t;
}

}  // namespace

TEST_CASE("sdr definition examples") {
  // Zero-mean reference and an orthogonal, zero-mean error with 1/100 of its energy.
  const std::vector<double> s{1.0, -1.0, 1.0, -1.0};
  const std::vector<double> e{0.1, 0.1, -0.1, -0.1};
  std::vector<double> est(4);
  for (int i = 0; i < 4; ++i) est[i] = s[i] + e[i];
  CHECK(sdr(est, s) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(sdr(std::vector<double>(4, 0.0), s) == doctest::Approx(0.0));
  CHECK(sdr(s, s) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(sdr(s, std::vector<double>(4, 0.0)), UndefinedTargetError);
  CHECK_THROWS_AS(sdr(s, std::vector<double>(3, 1.0)), DomainError);
}

TEST_CASE("sdr matches an independent computation on random pairs") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = gaussian(1000, seed);
    auto e = gaussian(1000, seed + 1000, 0.3);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += 0.7 * s[i] + 0.05;
    CHECK(sdr(e, s) == doctest::Approx(sdr_oracle(e, s)).epsilon(1e-10));
  }
}

TEST_CASE("si_snr_metric is the negated loss and is scale and offset invariant") {
  const std::vector<double> s{1.0, -1.0, 1.0, -1.0};
  const std::vector<double> e{1.0, 0.0, 0.0, 0.0};
  CHECK(si_snr_metric(e, s) == doctest::Approx(-3.0103).epsilon(1e-4));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = gaussian(500, seed);
    const auto b = gaussian(500, seed + 50);
    const double base = si_snr_metric(a, b);
    CHECK(base == -loss::si_snr_loss(a, b));
    std::vector<double> scaled(a), shifted(b);
    for (double& v : scaled) v *= 2.5;
    for (double& v : shifted) v += 0.3;
    CHECK(std::abs(si_snr_metric(scaled, b) - base) < 1e-9);
    CHECK(std::abs(si_snr_metric(a, shifted) - base) < 1e-9);
  }
}

TEST_CASE("improvements") {
  const auto s = gaussian(800, 1);
  auto x = gaussian(800, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += s[i];

  const EvalResult same = improvements(x, x, s);
  CHECK(same.sdri_db == 0.0);
  CHECK(same.si_snri_db == 0.0);
  CHECK_FALSE(same.silent_estimate);

  const EvalResult silent = improvements(x, std::vector<double>(800, 0.0), s);
  CHECK(silent.silent_estimate);
  CHECK(silent.sdri_db == 0.0);
  CHECK(silent.si_snri_db == 0.0);

  const EvalResult perfect = improvements(x, s, s);
  CHECK(perfect.capped);
  CHECK(perfect.sdr_db == kCapDb);
  CHECK(perfect.si_snr_db == kCapDb);
  CHECK(perfect.sdri_db == doctest::Approx(kCapDb - sdr(x, s)));

  auto better = s;
  const auto noise = gaussian(800, 3, 0.1);
  for (std::size_t i = 0; i < better.size(); ++i) better[i] += noise[i];
  const EvalResult r = improvements(x, better, s);
  CHECK(r.sdri_db == doctest::Approx(sdr(better, s) - sdr(x, s)));
  CHECK(r.si_snri_db == doctest::Approx(si_snr_metric(better, s) - si_snr_metric(x, s)));
  CHECK(r.sdri_db > 0.0);
}

TEST_CASE("the silent rule triggers iff the estimate peak is zero") {
  const auto s = gaussian(100, 4);
  const auto x = gaussian(100, 5);
  std::vector<double> tiny(100, 0.0);
  tiny[50] = 1e-300;
  CHECK_FALSE(improvements(x, tiny, s).silent_estimate);
  CHECK(is_digital_silence(std::vector<double>(100, 0.0)));
  CHECK(is_digital_silence(std::vector<double>(100, -0.0)));
  CHECK_FALSE(is_digital_silence(tiny));
}

TEST_CASE("overlap buckets") {
  CHECK(overlap_bucket(0.0) == 0);
  CHECK(overlap_bucket(0.09) == 0);
  CHECK(overlap_bucket(0.11) == 20);
  CHECK(overlap_bucket(0.41) == 40);
  CHECK(overlap_bucket(0.99) == 100);
  CHECK(overlap_bucket(1.0) == 100);
  CHECK_THROWS_AS(overlap_bucket(1.2), DomainError);
}

TEST_CASE("bucket report averages") {
  std::vector<TaggedResult> two;
  for (int i = 0; i < 5; ++i) {
    two.push_back(tagged(0, 10.0, 10.0));
    two.push_back(tagged(100, 20.0, 20.0));
  }
  const BucketReport r = bucket_report(two);
  REQUIRE(r.buckets.size() == 2);
  CHECK(*r.average.sdri_mean == 15.0);
  CHECK(r.average.n == 10);

  const std::vector<TaggedResult> one{tagged(40, 7.0, 8.0), tagged(40, 9.0, 10.0, true)};
  const BucketReport single = bucket_report(one);
  CHECK(*single.average.sdri_mean == *single.buckets[0].sdri_mean);
  CHECK(single.average.n_silent_flagged == 1);

  const BucketReport full = bucket_report(one, {0, 20, 40, 60, 80, 100});
  REQUIRE(full.buckets.size() == 6);
  CHECK_FALSE(full.buckets[0].sdri_mean.has_value());
  CHECK(full.buckets[0].n == 0);
  CHECK(full.to_csv() ==
        "bucket,n,SDRi_mean,SISNRi_mean,n_silent_flagged\n"
        "0%,0,,,0\n20%,0,,,0\n40%,2,8.0000,9.0000,1\n60%,0,,,0\n80%,0,,,0\n100%,0,,,0\n"
        "Average,2,8.0000,9.0000,1\n");
  CHECK(full.to_csv() == bucket_report(one, {0, 20, 40, 60, 80, 100}).to_csv());
}

TEST_CASE("overall average is the count-weighted bucket mean") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TaggedResult> results;
    // Values on a 1/8 grid keep every sum exact in double precision.
    for (int i = 0; i < 50; ++i)
      results.push_back(tagged(static_cast<int>(rng() % 6) * 20, static_cast<double>(rng() % 160) / 8.0,
                               static_cast<double>(rng() % 160) / 8.0));
    const BucketReport r = bucket_report(results);
    double weighted = 0.0;
    std::size_t n = 0;
    for (const auto& b : r.buckets) {
      weighted += *b.sdri_mean * static_cast<double>(b.n);
      n += b.n;
    }
    CHECK(n == r.average.n);
    CHECK(weighted / static_cast<double>(n) == doctest::Approx(*r.average.sdri_mean).epsilon(1e-14));
  }
}

TEST_CASE("real-time factor") {
  CHECK(rtf(1.5, 3.0) == 0.5);
  CHECK_THROWS_AS(rtf(1.0, 0.0), DomainError);
  const RtfMeasurement m = measure_rtf(
      3, [](std::size_t) { std::this_thread::sleep_for(std::chrono::milliseconds(5)); },
      [](std::size_t) { return 1.0; });
  CHECK(m.audio_seconds == 3.0);
  CHECK(m.processing_seconds >= 0.015);
  CHECK(m.rtf() == m.processing_seconds / 3.0);
  CHECK_THROWS_AS(measure_rtf(0, [](std::size_t) {}, [](std::size_t) { return 1.0; }), DomainError);

  const RtfRow rows[] = {{1, 5.0, 6.0, 0.25}, {4, 7.5, 8.25, 0.5}};
  CHECK(rtf_csv(rows) == "k,SDRi_mean,SISNRi_mean,RTF\n1,5.0000,6.0000,0.2500\n4,7.5000,8.2500,0.5000\n");
}
