#include <doctest.h>

#include <cmath>
#include <cstring>

#include "helpers.hpp"
#include "tss/ad/adam.hpp"
#include "tss/ad/checkpoint.hpp"
#include "tss/ad/grad_check.hpp"
#include "tss/ad/ops.hpp"
#include "tss/ad/tensor.hpp"
#include "tss/errors.hpp"

using namespace tss;
using namespace tss::ad;
using tss::testing::gaussian;
using tss::testing::uniform;

namespace {

// Weighted sum with fixed random coefficients, so every output coordinate
// reaches the loss with a distinct sensitivity.
Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  return sum(mul(y, Tensor::constant(y.shape(), gaussian(y.numel(), seed))));
}

void require_pass(const GradCheckReport& r) {
  INFO("max rel error " << r.max_rel_error << " tensor " << r.worst_tensor << " index " << r.worst_index
                        << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric << " " << r.failure);
  CHECK(r.passed);
  CHECK(r.coords_checked > 0);
}

std::vector<double> naive_conv(const std::vector<double>& x, std::size_t cin, std::size_t t, const std::vector<double>& w,
                               std::size_t cout, std::size_t k, const std::vector<double>& b, const Conv1dSpec& s) {
  const std::size_t cin_g = cin / s.groups;
  const std::size_t cout_g = cout / s.groups;
  const std::size_t span = s.dilation * (k - 1) + 1;
  const std::size_t tout = (t + 2 * s.padding - span) / s.stride + 1;
  std::vector<double> y(cout * tout, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    const std::size_t g = o / cout_g;
    for (std::size_t f = 0; f < tout; ++f) {
      double acc = b.empty() ? 0.0 : b[o];
      for (std::size_t c = 0; c < cin_g; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const long long idx = static_cast<long long>(f * s.stride + j * s.dilation) - static_cast<long long>(s.padding);
          if (idx < 0 || idx >= static_cast<long long>(t)) continue;
          acc += w[(o * cin_g + c) * k + j] * x[(g * cin_g + c) * t + static_cast<std::size_t>(idx)];
        }
      y[o * tout + f] = acc;
    }
  }
  return y;
}

}  // namespace

TEST_CASE("tensor basics") {
  const Tensor a = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(a.rank() == 2);
  CHECK(a.dim(1) == 3);
  CHECK(shape_string(a.shape()) == "[2, 3]");
  CHECK_THROWS_AS(Tensor::constant({2, 2}, {1, 2, 3}), DomainError);
  CHECK_THROWS_AS(a.item(), DomainError);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  Tensor p = Tensor::parameter({2}, {1, 2});
  CHECK(p.requires_grad());
  CHECK_FALSE(a.requires_grad());
  CHECK_THROWS_AS(add(p, p).mutable_values(), StateError);
}

TEST_CASE("backward accumulates into leaves and releases the tape") {
  Tensor x = Tensor::parameter({3}, {1.0, 2.0, 3.0});
  Tensor y = sum(mul(x, x));
  y.backward();
  CHECK(x.grad()[1] == 4.0);
  sum(x).backward();
  CHECK(x.grad()[1] == 5.0);
  CHECK(y.node()->inputs.empty());
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("no-grad guard records nothing") {
  Tensor x = Tensor::parameter({2}, {1.0, 2.0});
  Tensor y;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    y = sum(mul(x, x));
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->inputs.empty());
}

TEST_CASE("elementwise values") {
  const Tensor a = Tensor::constant({3}, {1, -2, 3});
  const Tensor b = Tensor::constant({3}, {4, 5, -6});
  const Tensor c = add(a, b);
  CHECK(std::vector<double>(c.values().begin(), c.values().end()) == std::vector<double>{5, 3, -3});
  CHECK(relu(a).values()[1] == 0.0);
  CHECK(std::isnan(relu(Tensor::constant({1}, {std::nan("")})).values()[0]));
  CHECK(sigmoid(Tensor::constant({1}, {0.0})).values()[0] == 0.5);
  CHECK(sigmoid(Tensor::constant({1}, {-800.0})).values()[0] >= 0.0);
  CHECK(clamp(a, -1.0, 2.0).values()[2] == 2.0);
  CHECK_THROWS_AS(div(a, Tensor::constant({3}, {1, 0, 1})), NumericError);
  CHECK_THROWS_AS(ad::log(a), NumericError);
  CHECK_THROWS_AS(add(a, Tensor::constant({2}, {1, 2})), DomainError);
}

TEST_CASE("grad check options are validated") {
  GradCheckOptions o;
  o.h = 1e-2;
  CHECK_THROWS_AS(grad_check([](const Tensor& x) { return sum(x); }, {2}, {1.0, 2.0}, o), DomainError);
}

TEST_CASE("grad check flags a wrong gradient") {
  // relu's kink: probing exactly at 0 gives numeric 0.5 against analytic 0.
  const auto r = grad_check([](const Tensor& x) { return sum(relu(x)); }, {1}, {0.0});
  CHECK_FALSE(r.passed);
}

TEST_CASE("gradients of elementwise primitives") {
  const Shape s{3, 4};
  const auto x0 = gaussian(12, 1);
  const auto pos = uniform(12, 2, 0.5, 2.0);
  const Tensor other = Tensor::constant(s, gaussian(12, 3));
  const Tensor positive = Tensor::constant(s, uniform(12, 4, 0.5, 2.0));
  require_pass(grad_check([&](const Tensor& x) { return probe(add(x, other)); }, s, x0));
  require_pass(grad_check([&](const Tensor& x) { return probe(sub(other, x)); }, s, x0));
  require_pass(grad_check([&](const Tensor& x) { return probe(mul(x, other)); }, s, x0));
  require_pass(grad_check([&](const Tensor& x) { return probe(div(other, x)); }, s, pos));
  require_pass(grad_check([&](const Tensor& x) { return probe(div(x, positive)); }, s, x0));
  require_pass(grad_check([&](const Tensor& x) { return probe(scale(x, -2.5)); }, s, x0));
  require_pass(grad_check([&](const Tensor& x) { return probe(add_scalar(x, 3.0)); }, s, x0));
  require_pass(grad_check([&](const Tensor& x) { return probe(sigmoid(x)); }, s, x0));
  require_pass(grad_check([&](const Tensor& x) { return probe(ad::log(x)); }, s, pos));
  require_pass(grad_check([&](const Tensor& x) { return mean(mul(x, x)); }, s, x0));
  // Keep probes away from the kinks.
  const auto away = uniform(12, 5, 0.1, 1.0);
  std::vector<double> signed_away(away);
  for (std::size_t i = 0; i < signed_away.size(); i += 2) signed_away[i] = -signed_away[i];
  require_pass(grad_check([&](const Tensor& x) { return probe(relu(x)); }, s, signed_away));
  require_pass(grad_check([&](const Tensor& x) { return probe(clamp(x, -0.5, 0.5)); }, s, signed_away));
}

TEST_CASE("gradients of scalar-broadcast primitives") {
  const auto x0 = gaussian(6, 7);
  Tensor x = Tensor::parameter({2, 3}, x0);
  Tensor s = Tensor::parameter({}, {0.7});
  require_pass(grad_check([&] { return probe(scale_by(x, s)); }, {x, s}));
  require_pass(grad_check([&] { return probe(broadcast(s, {2, 3})); }, {s}));
}

TEST_CASE("prelu gradients, shared and per-channel slope") {
  std::vector<double> x0 = uniform(12, 8, 0.1, 1.0);
  for (std::size_t i = 1; i < x0.size(); i += 3) x0[i] = -x0[i];
  Tensor x = Tensor::parameter({3, 4}, x0);
  Tensor shared = Tensor::parameter({1}, {0.25});
  Tensor per = Tensor::parameter({3}, {0.1, 0.2, 0.3});
  require_pass(grad_check([&] { return probe(prelu(x, shared)); }, {x, shared}));
  require_pass(grad_check([&] { return probe(prelu(x, per)); }, {x, per}));
  CHECK(prelu(Tensor::constant({1, 1}, {-2.0}), Tensor::constant({1}, {0.25})).values()[0] == -0.5);
}

TEST_CASE("shape primitives: values and gradients") {
  Tensor a = Tensor::parameter({2, 3}, gaussian(6, 10));
  Tensor b = Tensor::parameter({1, 3}, gaussian(3, 11));
  const Tensor parts[] = {a, b};
  const Tensor c = concat_rows(parts);
  CHECK(c.shape() == Shape{3, 3});
  CHECK(c.values()[6] == b.values()[0]);
  require_pass(grad_check([&] {
    const Tensor p[] = {a, b};
    return probe(concat_rows(p));
  }, {a, b}));

  Tensor v = Tensor::parameter({3}, gaussian(3, 12));
  const Tensor r = repeat_cols(v, 4);
  CHECK(r.shape() == Shape{3, 4});
  CHECK(r.values()[5] == v.values()[1]);
  require_pass(grad_check([&] { return probe(repeat_cols(v, 4)); }, {v}));

  Tensor table = Tensor::parameter({4, 3}, gaussian(12, 13));
  CHECK(select_row(table, 2).values()[1] == table.values()[7]);
  require_pass(grad_check([&] { return probe(select_row(table, 2)); }, {table}));
  CHECK_THROWS_AS(select_row(table, 4), DomainError);

  Tensor m = Tensor::parameter({2, 5}, gaussian(10, 14));
  const Tensor sl = slice_cols(m, 1, 4);
  CHECK(sl.shape() == Shape{2, 3});
  CHECK(sl.values()[3] == m.values()[6]);
  require_pass(grad_check([&] { return probe(slice_cols(m, 1, 4)); }, {m}));

  CHECK(fit_length(m, 3).shape() == Shape{2, 3});
  const Tensor padded = fit_length(m, 7);
  CHECK(padded.values()[5] == 0.0);
  CHECK(padded.values()[7] == m.values()[5]);
  require_pass(grad_check([&] { return probe(fit_length(m, 3)); }, {m}));
  require_pass(grad_check([&] { return probe(fit_length(m, 7)); }, {m}));
}

TEST_CASE("conv1d matches a direct loop") {
  struct Case {
    std::size_t cin, cout, t, k;
    Conv1dSpec spec;
    bool bias;
  };
  const Case cases[] = {
      {1, 4, 60, 8, {4, 1, 0, 1}, false},  // encoder-like
      {3, 5, 17, 1, {1, 1, 0, 1}, true},   // pointwise
      {4, 4, 23, 3, {1, 4, 4, 4}, true},   // depthwise dilated, same padding
      {4, 6, 19, 3, {2, 2, 1, 2}, true},   // grouped, strided
  };
  std::uint64_t seed = 20;
  for (const auto& c : cases) {
    const auto x = gaussian(c.cin * c.t, ++seed);
    const auto w = gaussian(c.cout * (c.cin / c.spec.groups) * c.k, ++seed);
    const auto b = c.bias ? gaussian(c.cout, ++seed) : std::vector<double>{};
    const Tensor y = conv1d(Tensor::constant({c.cin, c.t}, x), Tensor::constant({c.cout, c.cin / c.spec.groups, c.k}, w),
                            c.bias ? Tensor::constant({c.cout}, b) : Tensor{}, c.spec);
    const auto ref = naive_conv(x, c.cin, c.t, w, c.cout, c.k, b, c.spec);
    REQUIRE(y.numel() == ref.size());
    CHECK(y.dim(1) == conv1d_output_length(c.t, c.k, c.spec));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv1d gradients on every path") {
  const Conv1dSpec specs[] = {{4, 1, 0, 1}, {1, 1, 0, 1}, {1, 2, 2, 3}, {2, 1, 1, 1}, {1, 2, 2, 1}};
  const std::size_t groups_cin[] = {1, 3, 3, 3, 3};
  const std::size_t cout[] = {2, 4, 3, 2, 3};
  const std::size_t kernel[] = {8, 1, 3, 3, 3};
  for (int i = 0; i < 5; ++i) {
    const std::size_t cin = groups_cin[i];
    const std::size_t t = 24;
    Tensor x = Tensor::parameter({cin, t}, gaussian(cin * t, 40 + i));
    Tensor w = Tensor::parameter({cout[i], cin / specs[i].groups, kernel[i]},
                                 gaussian(cout[i] * (cin / specs[i].groups) * kernel[i], 50 + i));
    Tensor b = Tensor::parameter({cout[i]}, gaussian(cout[i], 60 + i));
    require_pass(grad_check([&] { return probe(conv1d(x, w, b, specs[i])); }, {x, w, b}));
  }
}

TEST_CASE("transposed conv matches a direct loop and has correct gradients") {
  const std::size_t cin = 3, cout = 2, t = 7, k = 6, stride = 3;
  const auto x = gaussian(cin * t, 70);
  const auto w = gaussian(cin * cout * k, 71);
  const auto b = gaussian(cout, 72);
  const Tensor y = conv_transpose1d(Tensor::constant({cin, t}, x), Tensor::constant({cin, cout, k}, w),
                                    Tensor::constant({cout}, b), stride);
  const std::size_t len = (t - 1) * stride + k;
  REQUIRE(y.shape() == Shape{cout, len});
  std::vector<double> ref(cout * len);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < len; ++i) ref[o * len + i] = b[o];
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t f = 0; f < t; ++f)
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t j = 0; j < k; ++j) ref[o * len + f * stride + j] += x[c * t + f] * w[(c * cout + o) * k + j];
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  Tensor xp = Tensor::parameter({cin, t}, x);
  Tensor wp = Tensor::parameter({cin, cout, k}, w);
  Tensor bp = Tensor::parameter({cout}, b);
  require_pass(grad_check([&] { return probe(conv_transpose1d(xp, wp, bp, stride)); }, {xp, wp, bp}));
  require_pass(grad_check([&] { return probe(conv_transpose1d(xp, wp, {}, stride)); }, {xp, wp}));
}

TEST_CASE("affine values and gradients") {
  Tensor x = Tensor::parameter({2, 3}, gaussian(6, 80));
  Tensor w = Tensor::parameter({4, 3}, gaussian(12, 81));
  Tensor b = Tensor::parameter({4}, gaussian(4, 82));
  const Tensor y = affine(x, w, b);
  REQUIRE(y.shape() == Shape{2, 4});
  double ref = b.values()[2];
  for (int i = 0; i < 3; ++i) ref += w.values()[2 * 3 + i] * x.values()[3 + i];
  CHECK(y.values()[4 + 2] == doctest::Approx(ref));
  require_pass(grad_check([&] { return probe(affine(x, w, b)); }, {x, w, b}));
  Tensor v = Tensor::parameter({3}, gaussian(3, 83));
  require_pass(grad_check([&] { return probe(affine(v, w, {})); }, {v, w}));
}

TEST_CASE("global layer norm matches its definition and has correct gradients") {
  const std::size_t c = 3, t = 5;
  const auto x = gaussian(c * t, 90, 2.0);
  const auto g = uniform(c, 91, 0.5, 1.5);
  const auto b = gaussian(c, 92);
  const Tensor y = global_layer_norm(Tensor::constant({c, t}, x), Tensor::constant({c}, g), Tensor::constant({c}, b), 1e-8);
  double mean = 0.0;
  for (double v : x) mean += v / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean) / static_cast<double>(x.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < t; ++i)
      CHECK(y.values()[ch * t + i] ==
            doctest::Approx(g[ch] * (x[ch * t + i] - mean) / std::sqrt(var + 1e-8) + b[ch]).epsilon(1e-12));

  Tensor xp = Tensor::parameter({c, t}, x);
  Tensor gp = Tensor::parameter({c}, g);
  Tensor bp = Tensor::parameter({c}, b);
  require_pass(grad_check([&] { return probe(global_layer_norm(xp, gp, bp)); }, {xp, gp, bp}));
}

TEST_CASE("adam matches a hand-rolled update") {
  Tensor p = Tensor::parameter({2}, {1.0, -1.0});
  AdamState st;
  st.lr = 0.1;
  const double g1[] = {0.5, -2.0};
  const double g2[] = {0.1, 0.3};
  double m[2] = {0, 0};
  double v[2] = {0, 0};
  double ref[2] = {1.0, -1.0};
  std::vector<Tensor> params{p};
  for (int step = 1; step <= 2; ++step) {
    const double* g = step == 1 ? g1 : g2;
    auto grad = p.mutable_grad();
    grad[0] = g[0];
    grad[1] = g[1];
    adam_step(params, st);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, step));
      const double vh = v[i] / (1 - std::pow(0.999, step));
      ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(p.values()[0] == doctest::Approx(ref[0]).epsilon(1e-14));
  CHECK(p.values()[1] == doctest::Approx(ref[1]).epsilon(1e-14));
  CHECK(st.step == 2);
}

TEST_CASE("adam refuses non-finite gradients without touching parameters") {
  Tensor p = Tensor::parameter({2}, {1.0, 2.0});
  p.mutable_grad()[0] = NAN;
  AdamState st;
  std::vector<Tensor> params{p};
  CHECK_THROWS_AS(adam_step(params, st), NumericError);
  CHECK(p.values()[0] == 1.0);
  CHECK(st.step == 0);
}

TEST_CASE("gradient clipping rescales to the global norm") {
  Tensor a = Tensor::parameter({1}, {0.0});
  Tensor b = Tensor::parameter({1}, {0.0});
  a.mutable_grad()[0] = 3.0;
  b.mutable_grad()[0] = 4.0;
  std::vector<Tensor> params{a, b};
  CHECK(clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(params, 10.0) == doctest::Approx(1.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = tss::testing::scratch_dir("ckpt");
  std::vector<NamedArray> arrays{{"a.weight", {2, 3}, gaussian(6, 100)},
                                 {"b", {1}, {std::nextafter(1.0, 2.0)}},
                                 {"empty_scalar", {}, {-0.0}}};
  save_checkpoint(dir / "m.ckpt", arrays);
  const auto back = load_checkpoint(dir / "m.ckpt");
  REQUIRE(back.size() == arrays.size());
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    CHECK(back[i].name == arrays[i].name);
    CHECK(back[i].shape == arrays[i].shape);
    REQUIRE(back[i].values.size() == arrays[i].values.size());
    for (std::size_t j = 0; j < arrays[i].values.size(); ++j)
      CHECK(std::memcmp(&back[i].values[j], &arrays[i].values[j], sizeof(double)) == 0);
  }
  save_checkpoint(dir / "f.ckpt", arrays, DType::kFloat32);
  const auto f32 = load_checkpoint(dir / "f.ckpt");
  CHECK(f32[0].values[0] == static_cast<double>(static_cast<float>(arrays[0].values[0])));

  std::string bytes = tss::testing::read_file(dir / "m.ckpt");
  bytes.resize(bytes.size() - 3);
  std::FILE* f = std::fopen((dir / "t.ckpt").string().c_str(), "wb");
  std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "none.ckpt"), IoError);
}
