#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "tss/ad/grad_check.hpp"
#include "tss/ad/ops.hpp"
#include "tss/errors.hpp"
#include "tss/loss/graph.hpp"
#include "tss/loss/si_snr.hpp"

using namespace tss;
using namespace tss::loss;
using tss::testing::gaussian;

namespace {

// Independent SI-SNR loss written from the definition, in long double.
double reference_loss(const std::vector<double>& est, const std::vector<double>& ref) {
  const std::size_t n = est.size();
  long double me = 0, mr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    me += est[i];
    mr += ref[i];
  }
  me /= n;
  mr /= n;
  long double dot = 0, rr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += (est[i] - me) * (ref[i] - mr);
    rr += (ref[i] - mr) * (ref[i] - mr);
  }
  long double pp = 0, ee = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double p = dot / rr * (ref[i] - mr);
    pp += p * p;
    ee += (est[i] - me - p) * (est[i] - me - p);
  }
  return static_cast<double>(-10.0L * std::log10(pp / ee));
}

}  // namespace

TEST_CASE("hand-computed SI-SNR example") {
  // Mean-normalized estimate [.75,-.25,-.25,-.25]; <e,s> = 1, |s|^2 = 4, so the
  // projection has energy 1/4 and the residual [.5,0,-.5,0] has energy 1/2.
  const std::vector<double> s{1, -1, 1, -1};
  const std::vector<double> e{1, 0, 0, 0};
  CHECK(si_snr_loss(e, s) == doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(si_snr_loss(e, s) == doctest::Approx(3.0103).epsilon(1e-5));
  CHECK(si_snr_geometric(e, s) == doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
}

TEST_CASE("SI-SNR loss agrees with an independent long-double evaluation") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = gaussian(257, seed);
    const auto e = gaussian(257, seed + 1000);
    CHECK(si_snr_loss(e, s) == doctest::Approx(reference_loss(e, s)).epsilon(1e-10));
  }
}

TEST_CASE("projection and angle forms agree") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = gaussian(64, seed);
    auto e = gaussian(64, seed + 5000);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += (seed % 7) * 0.3 * s[i];
    CHECK(std::abs(si_snr_loss(e, s) - si_snr_geometric(e, s)) < 1e-9);
  }
}

TEST_CASE("SI-SNR invariances and sentinels") {
  const auto s = gaussian(100, 1);
  const auto e = gaussian(100, 2);
  std::vector<double> scaled(e), shifted(e);
  for (auto& v : scaled) v *= 7.5;
  for (auto& v : shifted) v += 3.0;
  CHECK(si_snr_loss(scaled, s) == doctest::Approx(si_snr_loss(e, s)).epsilon(1e-12));
  CHECK(si_snr_loss(shifted, s) == doctest::Approx(si_snr_loss(e, s)).epsilon(1e-10));

  CHECK(si_snr_loss(s, s) == -std::numeric_limits<double>::infinity());
  std::vector<double> twice(s);
  for (auto& v : twice) v *= 2.0;
  CHECK(si_snr_loss(twice, s) == -std::numeric_limits<double>::infinity());
  const std::vector<double> a{1, -1, 0, 0};
  const std::vector<double> b{0, 0, 1, -1};
  CHECK(si_snr_loss(b, a) == std::numeric_limits<double>::infinity());
  CHECK(si_snr_geometric(b, a) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(si_snr_loss(e, std::vector<double>(100, 2.0)), UndefinedTargetError);
  CHECK_THROWS_AS(si_snr_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), DomainError);
}

TEST_CASE("eps-extended loss") {
  const auto e = gaussian(80, 3);
  CHECK(si_snr_eps(e, std::vector<double>(80, 0.0), 1e-8) == 80.0);
  CHECK(si_snr_eps(e, std::vector<double>(80, 0.0), 1e-6) == doctest::Approx(60.0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = gaussian(500, seed);
    auto est = gaussian(500, seed + 99);
    for (std::size_t i = 0; i < est.size(); ++i) est[i] += s[i];
    CHECK(std::abs(si_snr_eps(est, s) - si_snr_loss(est, s)) <= 1e-6);
  }
  // Finite for every input, even a perfect estimate.
  const auto s = gaussian(50, 7);
  CHECK(std::isfinite(si_snr_eps(s, s)));
}

TEST_CASE("weighted SI-SNR degeneracies") {
  const auto s = gaussian(200, 11);
  const auto e = gaussian(200, 12);
  const auto all = weighted_si_snr(e, s, dsp::VadMask::constant(200, 1.0));
  CHECK(all.weight == 1.0);
  CHECK(all.value == si_snr_eps(e, s));
  const auto none = weighted_si_snr(e, s, dsp::VadMask::constant(200, 0.0));
  CHECK(none.weight == 0.0);
  CHECK(none.value == 0.0);

  std::vector<double> z(200, 0.0);
  for (std::size_t i = 50; i < 100; ++i) z[i] = 1.0;
  const auto part = weighted_si_snr(e, s, dsp::VadMask(z));
  CHECK(part.weight == 0.25);
  std::vector<double> em(e), sm(s);
  for (std::size_t i = 0; i < 200; ++i) {
    em[i] *= z[i];
    sm[i] *= z[i];
  }
  CHECK(part.value == si_snr_eps(em, sm));
  CHECK_THROWS_AS(weighted_si_snr(e, s, dsp::VadMask::constant(200, 0.5)), DomainError);
}

TEST_CASE("batch aggregation is the weight-normalized mean") {
  const WeightedLossTerm terms[] = {{-10.0, 0.5}, {4.0, 0.25}, {-2.0, 0.25}};
  // (-5 + 1 - 0.5) / 1
  CHECK(batch_weighted_si_snr(terms) == -4.5);
  const WeightedLossTerm zeros[] = {{1.0, 0.0}, {2.0, 0.0}};
  CHECK_THROWS_AS(batch_weighted_si_snr(zeros), DomainError);
  const WeightedLossTerm one[] = {{3.0, 0.0}, {-6.0, 0.125}};
  CHECK(batch_weighted_si_snr(one) == -6.0);
}

TEST_CASE("binary cross-entropy with clamping") {
  const std::vector<double> p{0.9, 0.2};
  const std::vector<double> y{1.0, 0.0};
  CHECK(bce_loss(p, y) == doctest::Approx(-(std::log(0.9) + std::log(0.8)) / 2.0));
  const std::vector<double> hard{1.0, 0.0};
  const std::vector<double> wrong{0.0, 1.0};
  CHECK(bce_loss(hard, wrong) == doctest::Approx(-std::log(1e-7)));
  CHECK(std::isfinite(bce_loss(hard, wrong)));
}

TEST_CASE("graph heads reproduce the scalar losses") {
  const auto s = gaussian(120, 21);
  const auto e = gaussian(120, 22);
  const ad::Tensor est = ad::Tensor::constant({1, 120}, e);
  CHECK(si_snr_eps_head(est, s).item() == doctest::Approx(si_snr_eps(e, s)).epsilon(1e-12));

  std::vector<double> z(120, 0.0);
  for (std::size_t i = 10; i < 70; ++i) z[i] = 1.0;
  const dsp::VadMask mask(z);
  CHECK(weighted_si_snr_head(est, s, mask).item() == doctest::Approx(weighted_si_snr(e, s, mask).value).epsilon(1e-12));
  CHECK_FALSE(weighted_si_snr_head(est, s, dsp::VadMask::constant(120, 0.0)).defined());

  const auto p = tss::testing::uniform(120, 23, 0.05, 0.95);
  CHECK(bce_head(ad::Tensor::constant({1, 120}, p), z).item() == doctest::Approx(bce_loss(p, z)).epsilon(1e-12));
}

TEST_CASE("joint loss equals weighted SI-SNR plus lambda times mean BCE") {
  JointLossConfig cfg;
  std::vector<std::vector<double>> targets, ests, probs;
  std::vector<dsp::VadMask> masks;
  const std::size_t n = 90;
  for (int b = 0; b < 3; ++b) {
    targets.push_back(gaussian(n, 30 + b));
    ests.push_back(gaussian(n, 40 + b));
    probs.push_back(tss::testing::uniform(n, 50 + b, 0.05, 0.95));
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(20 * b); ++i) z[i] = 1.0;  // item 0 silent
    masks.emplace_back(z);
  }
  std::vector<JointItem> items;
  std::vector<WeightedLossTerm> terms;
  double bce = 0.0;
  for (int b = 0; b < 3; ++b) {
    items.push_back({ad::Tensor::constant({1, n}, ests[b]), ad::Tensor::constant({1, n}, probs[b]), targets[b], &masks[b]});
    terms.push_back(weighted_si_snr(ests[b], targets[b], masks[b]));
    bce += bce_loss(probs[b], masks[b].values()) / 3.0;
  }
  const double expected = batch_weighted_si_snr(terms) + cfg.lambda * bce;
  CHECK(joint_loss(items, cfg).item() == doctest::Approx(expected).epsilon(1e-12));

  // All-silent batch: only the BCE term remains.
  std::vector<JointItem> silent{items[0]};
  CHECK(joint_loss(silent, cfg).item() == doctest::Approx(cfg.lambda * bce_loss(probs[0], masks[0].values())).epsilon(1e-12));

  JointLossConfig bad;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("loss heads pass gradient checks") {
  const std::size_t n = 60;
  const auto s = gaussian(n, 61);
  std::vector<double> z(n, 0.0);
  for (std::size_t i = 5; i < 45; ++i) z[i] = 1.0;
  const dsp::VadMask mask(z);
  const auto check = [](const ad::GradCheckReport& r) {
    INFO("max rel error " << r.max_rel_error << " " << r.failure);
    CHECK(r.passed);
  };
  check(ad::grad_check([&](const ad::Tensor& e) { return si_snr_eps_head(e, s); }, {1, n}, gaussian(n, 62)));
  check(ad::grad_check([&](const ad::Tensor& e) { return weighted_si_snr_head(e, s, mask); }, {1, n}, gaussian(n, 63)));
  check(ad::grad_check([&](const ad::Tensor& p) { return bce_head(p, z); }, {1, n},
                       tss::testing::uniform(n, 64, 0.05, 0.95)));
  ad::Tensor est = ad::Tensor::parameter({1, n}, gaussian(n, 65));
  ad::Tensor logits = ad::Tensor::parameter({1, n}, gaussian(n, 66));
  check(ad::grad_check(
      [&] {
        const JointItem item{est, ad::sigmoid(logits), s, &mask};
        return joint_loss(std::span<const JointItem>(&item, 1), {});
      },
      {est, logits}));
}
