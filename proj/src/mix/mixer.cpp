#include "tss/mix/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "tss/dsp/vad_ops.hpp"
#include "tss/dsp/wav_io.hpp"
#include "tss/errors.hpp"

namespace tss::mix {

namespace {

struct Placed {
  std::vector<double> x;  // timeline length
  std::vector<dsp::Interval> activity;
  dsp::Interval span;
  std::string id;
};

// Copies utt[src_begin, src_end) to `offset` on a zero timeline of `total` samples.
Placed place(const SourceUtterance& utt, std::size_t src_begin, std::size_t src_end, std::size_t offset,
             std::size_t total) {
  Placed p;
  p.x.assign(total, 0.0);
  p.id = utt.speaker_id;
  p.span = {offset, offset + (src_end - src_begin)};
  std::copy(utt.wave.samples().begin() + static_cast<std::ptrdiff_t>(src_begin),
            utt.wave.samples().begin() + static_cast<std::ptrdiff_t>(src_end),
            p.x.begin() + static_cast<std::ptrdiff_t>(offset));
  for (const auto& iv : utt.activity) {
    const std::size_t b = std::max(iv.begin, src_begin);
    const std::size_t e = std::min(iv.end, src_end);
    if (b < e) p.activity.push_back({b - src_begin + offset, e - src_begin + offset});
  }
  return p;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t max_inclusive) {
  return std::uniform_int_distribution<std::size_t>(0, max_inclusive)(rng);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> draw_noise(std::size_t length, const MixSpec& spec, std::mt19937_64& rng) {
  const std::uint64_t noise_seed = rng();
  if (spec.noise_files.empty()) return pink_noise(length, noise_seed);
  std::mt19937_64 pick(noise_seed);
  const auto& path = spec.noise_files[uniform_index(pick, spec.noise_files.size() - 1)];
  const dsp::Waveform w = dsp::read_wav(path);
  if (w.empty()) throw FormatError("noise file " + path.string() + " is empty");
  const std::size_t start = uniform_index(pick, w.size() - 1);
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = w[(start + i) % w.size()];
  return out;
}

MixtureExample assemble(const Placed& a, const Placed& b, std::size_t total, int sample_rate, const MixSpec& spec,
                        std::mt19937_64& rng, std::uint64_t seed, const std::string& mode_label) {
  MixtureExample ex;
  ex.meta.mode = mode_label;
  ex.meta.seed = seed;
  ex.meta.target_id = a.id;
  ex.meta.interferer_id = b.id;
  ex.meta.snr_db = uniform_real(rng, spec.speaker_snr_low_db, spec.speaker_snr_high_db);
  const double gain = snr_gain(active_power(a.x, a.activity), active_power(b.x, b.activity), ex.meta.snr_db);

  std::vector<double> mixture(total);
  for (std::size_t i = 0; i < total; ++i) mixture[i] = a.x[i] + gain * b.x[i];

  const bool with_noise = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.noise_prob;
  if (with_noise) {
    const double noise_db = uniform_real(rng, spec.noise_snr_low_db, spec.noise_snr_high_db);
    const std::vector<double> noise = draw_noise(total, spec, rng);
    const double g = snr_gain(dsp::power(mixture), dsp::power(noise), noise_db);
    for (std::size_t i = 0; i < total; ++i) mixture[i] += g * noise[i];
    ex.meta.noise_snr_db = noise_db;
  }

  ex.z = dsp::intervals_to_mask(a.activity, total);
  std::vector<double> target(a.x);
  for (std::size_t i = 0; i < total; ++i) target[i] *= ex.z[i];
  ex.mixture = dsp::Waveform(std::move(mixture), sample_rate);
  ex.target = dsp::Waveform(std::move(target), sample_rate);
  ex.target_span = a.span;
  ex.interferer_span = b.span;
  const dsp::Interval sa[] = {a.span};
  const dsp::Interval sb[] = {b.span};
  ex.overlap_ratio = overlap_ratio(sa, sb, total, spec.overlap_denominator);
  return ex;
}

void check_source(const SourceUtterance& u, const char* what) {
  if (u.wave.empty()) throw DomainError(std::string("mix: empty ") + what + " utterance");
}

}  // namespace

std::string to_string(MixMode mode) { return mode == MixMode::kMin ? "min" : "max"; }

MixMode parse_mix_mode(const std::string& text) {
  if (text == "min") return MixMode::kMin;
  if (text == "max") return MixMode::kMax;
  throw DomainError("unknown mix mode '" + text + "' (expected min or max)");
}

void MixSpec::validate() const {
  if (!(speaker_snr_low_db <= speaker_snr_high_db)) throw DomainError("MixSpec: speaker SNR range is reversed");
  if (!(noise_snr_low_db <= noise_snr_high_db)) throw DomainError("MixSpec: noise SNR range is reversed");
  if (!(noise_prob >= 0.0 && noise_prob <= 1.0)) throw DomainError("MixSpec: noise_prob must lie in [0, 1]");
  if (!(clip_seconds > 0.0)) throw DomainError("MixSpec: clip_seconds must be positive");
}

double active_power(std::span<const double> x, std::span<const dsp::Interval> intervals) {
  double energy = 0.0;
  std::size_t count = 0;
  for (const auto& iv : intervals) {
    if (iv.end > x.size()) throw DomainError("active_power: interval beyond signal");
    for (std::size_t i = iv.begin; i < iv.end; ++i) energy += x[i] * x[i];
    count += iv.length();
  }
  return count == 0 ? 0.0 : energy / static_cast<double>(count);
}

double snr_gain(double clean_power, double interference_power, double target_db) {
  if (!(clean_power > 0.0) || !(interference_power > 0.0))
    throw DomainError("rescale_to_snr: zero-power input");
  return std::sqrt(clean_power / (interference_power * std::pow(10.0, target_db / 10.0)));
}

dsp::Waveform rescale_to_snr(const SourceUtterance& clean, const SourceUtterance& interference, double target_db) {
  const double g = snr_gain(active_power(clean.wave.view(), clean.activity),
                            active_power(interference.wave.view(), interference.activity), target_db);
  std::vector<double> out(interference.wave.samples());
  for (double& v : out) v *= g;
  return dsp::Waveform(std::move(out), interference.wave.sample_rate());
}

double overlap_ratio(std::span<const dsp::Interval> target, std::span<const dsp::Interval> interference,
                     std::size_t total_length, OverlapDenominator denominator) {
  if (total_length == 0) throw DomainError("overlap_ratio: total length is zero");
  std::size_t both = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < target.size() && j < interference.size()) {
    const std::size_t b = std::max(target[i].begin, interference[j].begin);
    const std::size_t e = std::min(target[i].end, interference[j].end);
    if (b < e) both += e - b;
    if (target[i].end < interference[j].end)
      ++i;
    else
      ++j;
  }
  if (denominator == OverlapDenominator::kTotalLength) return static_cast<double>(both) / total_length;
  std::size_t uni = 0;
  for (const auto& iv : target) uni += iv.length();
  for (const auto& iv : interference) uni += iv.length();
  uni -= both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

MixtureExample mix(const SourceUtterance& a, const SourceUtterance& b, const MixSpec& spec) {
  spec.validate();
  check_source(a, "target");
  check_source(b, "interferer");
  std::mt19937_64 rng(spec.rng_seed);
  const std::size_t la = a.wave.size();
  const std::size_t lb = b.wave.size();
  Placed pa;
  Placed pb;
  std::size_t total = 0;
  if (spec.mode == MixMode::kMin) {
    total = std::min(la, lb);
    const std::size_t oa = uniform_index(rng, la - total);
    const std::size_t ob = uniform_index(rng, lb - total);
    pa = place(a, oa, oa + total, 0, total);
    pb = place(b, ob, ob + total, 0, total);
  } else {
    total = std::max(la, lb);
    const std::size_t oa = uniform_index(rng, total - la);
    const std::size_t ob = uniform_index(rng, total - lb);
    pa = place(a, 0, la, oa, total);
    pb = place(b, 0, lb, ob, total);
  }
  return assemble(pa, pb, total, a.wave.sample_rate(), spec, rng, spec.rng_seed, to_string(spec.mode));
}

MixtureExample mix_placed(const SourceUtterance& a, std::size_t a_offset, const SourceUtterance& b,
                          std::size_t b_offset, std::size_t total_length, const MixSpec& spec, std::uint64_t seed,
                          const std::string& mode_label) {
  spec.validate();
  check_source(a, "target");
  check_source(b, "interferer");
  if (a_offset + a.wave.size() > total_length || b_offset + b.wave.size() > total_length)
    throw DomainError("mix_placed: utterance exceeds the timeline");
  std::mt19937_64 rng(seed);
  return assemble(place(a, 0, a.wave.size(), a_offset, total_length),
                  place(b, 0, b.wave.size(), b_offset, total_length), total_length, a.wave.sample_rate(), spec, rng,
                  seed, mode_label);
}

namespace {

SourceUtterance crop(const SourceUtterance& u, std::size_t begin, std::size_t length) {
  const Placed p = place(u, begin, begin + length, 0, length);
  return {dsp::Waveform(p.x, u.wave.sample_rate()), u.speaker_id, p.activity};
}

}  // namespace

std::vector<SparseItem> gen_sparse_set(std::span<const SourceUtterance> pool, std::size_t n,
                                       std::span<const double> overlap_targets, bool noisy, const MixSpec& spec,
                                       std::uint64_t seed) {
  spec.validate();
  if (overlap_targets.empty()) throw DomainError("gen_sparse_set: no overlap targets");
  for (double r : overlap_targets)
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("gen_sparse_set: overlap targets must lie in [0, 1]");
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < pool.size(); ++i) by_speaker[pool[i].speaker_id].push_back(i);
  if (by_speaker.size() < 2) throw DomainError("gen_sparse_set: pool needs at least two speakers");

  MixSpec item_spec = spec;
  if (!noisy) item_spec.noise_prob = 0.0;

  std::vector<SparseItem> out;
  std::uint64_t counter = 0;
  const std::size_t buckets = overlap_targets.size();
  for (std::size_t bucket = 0; bucket < buckets; ++bucket) {
    const double r = overlap_targets[bucket];
    const std::size_t count = n / buckets + (bucket < n % buckets ? 1 : 0);
    for (std::size_t made = 0; made < count; made += 2) {
      std::mt19937_64 rng(derive_seed(seed, counter++));
      const std::size_t ia = uniform_index(rng, pool.size() - 1);
      std::size_t ib = ia;
      while (pool[ib].speaker_id == pool[ia].speaker_id) ib = uniform_index(rng, pool.size() - 1);

      SourceUtterance first = pool[ia];
      SourceUtterance second = pool[ib];
      if (rng() & 1U) std::swap(first, second);
      std::size_t l1 = first.wave.size();
      std::size_t l2 = second.wave.size();
      std::size_t ov = 0;
      if (r > 0.0) {
        const std::size_t shorter = std::min(l1, l2);
        const auto cap = static_cast<std::size_t>(std::floor(static_cast<double>(shorter) / r));
        auto trim = [&](SourceUtterance& u, std::size_t& len) {
          if (len > cap) {
            u = crop(u, uniform_index(rng, len - cap), cap);
            len = cap;
          }
        };
        trim(first, l1);
        trim(second, l2);
        ov = std::min({static_cast<std::size_t>(std::llround(r * static_cast<double>(l1 + l2) / (1.0 + r))), l1, l2});
      }
      const std::size_t total = l1 + l2 - ov;
      const std::size_t o1 = 0;
      const std::size_t o2 = l1 - ov;

      for (int role = 0; role < 2 && made + static_cast<std::size_t>(role) < count; ++role) {
        SparseItem item;
        item.requested_overlap = r;
        const SourceUtterance& tgt = role == 0 ? first : second;
        const SourceUtterance& itf = role == 0 ? second : first;
        if (tgt.activity.empty() || itf.activity.empty()) {
          item.skip_reason = "no voiced samples left after truncation";
        } else {
          MixtureExample ex = mix_placed(tgt, role == 0 ? o1 : o2, itf, role == 0 ? o2 : o1, total, item_spec,
                                         derive_seed(seed, counter++), "sparse");
          if (std::abs(ex.overlap_ratio - r) > 0.02)
            item.skip_reason = "overlap " + std::to_string(r) + " infeasible for these durations";
          else
            item.example = std::move(ex);
        }
        out.push_back(std::move(item));
      }
    }
  }
  return out;
}

MixtureExample clip_example(const MixtureExample& example, std::size_t clip_length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t len = example.mixture.size();
  const std::size_t offset = len > clip_length ? uniform_index(rng, len - clip_length) : 0;
  const std::size_t take = std::min(clip_length, len - offset);
  auto cut = [&](const std::vector<double>& v) {
    std::vector<double> out(clip_length, 0.0);
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(offset), take, out.begin());
    return out;
  };
  auto shift = [&](dsp::Interval iv) {
    const std::size_t b = std::clamp(iv.begin, offset, offset + take) - offset;
    const std::size_t e = std::clamp(iv.end, offset, offset + take) - offset;
    return dsp::Interval{b, e};
  };
  MixtureExample out;
  const int sr = example.mixture.sample_rate();
  out.mixture = dsp::Waveform(cut(example.mixture.samples()), sr);
  out.target = dsp::Waveform(cut(example.target.samples()), sr);
  out.z = dsp::VadMask(cut(example.z.values()));
  out.overlap_ratio = example.overlap_ratio;
  out.target_span = shift(example.target_span);
  out.interferer_span = shift(example.interferer_span);
  out.meta = example.meta;
  return out;
}

std::vector<MixtureExample> clip_batch(std::span<const MixtureExample> examples, double clip_seconds,
                                       std::uint64_t seed) {
  if (!(clip_seconds > 0.0)) throw DomainError("clip_batch: clip_seconds must be positive");
  std::vector<MixtureExample> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto length =
        static_cast<std::size_t>(std::llround(clip_seconds * examples[i].mixture.sample_rate()));
    out.push_back(clip_example(examples[i], length, derive_seed(seed, i)));
  }
  return out;
}

}  // namespace tss::mix
