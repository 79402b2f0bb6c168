#include "tss/model/inference.hpp"

#include <algorithm>
#include <string>

#include "tss/ad/ops.hpp"
#include "tss/errors.hpp"

namespace tss::model {

using ad::Tensor;

namespace {

dsp::VadMask to_mask(const Tensor& t) {
  return dsp::VadMask(std::vector<double>(t.values().begin(), t.values().end()));
}

dsp::Waveform to_wave(const Tensor& t, int sample_rate) {
  return dsp::Waveform(std::vector<double>(t.values().begin(), t.values().end()), sample_rate);
}

dsp::VadMask make_gate(const dsp::VadMask& probability, const InferenceOptions& options, int sample_rate) {
  if (options.gate_override) {
    if (options.gate_override->size() != probability.size())
      throw DomainError("infer: gate override has " + std::to_string(options.gate_override->size()) +
                        " samples, input has " + std::to_string(probability.size()));
    if (!options.gate_override->is_binary()) throw DomainError("infer: gate override must be binary");
    return *options.gate_override;
  }
  return dsp::binarize(dsp::mean_filter(probability, options.smoothing_ms, sample_rate), options.gamma);
}

}  // namespace

std::vector<bool> active_frames(const dsp::VadMask& gate, std::size_t frames, std::size_t stride,
                                std::size_t kernel) {
  std::vector<std::size_t> prefix(gate.size() + 1, 0);
  for (std::size_t i = 0; i < gate.size(); ++i) prefix[i + 1] = prefix[i] + (gate[i] == 1.0 ? 1 : 0);
  std::vector<bool> active(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t begin = std::min(f * stride, gate.size());
    const std::size_t end = std::min(begin + kernel, gate.size());
    active[f] = prefix[end] > prefix[begin];
  }
  return active;
}

std::vector<dsp::Interval> padded_segments(const std::vector<bool>& active, std::size_t pad) {
  std::vector<dsp::Interval> out;
  const std::size_t n = active.size();
  std::size_t f = 0;
  while (f < n) {
    if (!active[f]) {
      ++f;
      continue;
    }
    std::size_t end = f;
    while (end < n && active[end]) ++end;
    const dsp::Interval seg{f > pad ? f - pad : 0, std::min(n, end + pad)};
    if (!out.empty() && seg.begin <= out.back().end)
      out.back().end = std::max(out.back().end, seg.end);
    else
      out.push_back(seg);
    f = end;
  }
  return out;
}

InferenceResult infer(const SeparatorModel& model, const dsp::Waveform& x, const Tensor& embedding,
                      const InferenceOptions& options) {
  if (!model.trained()) throw StateError("infer: model has no trained parameters");
  const ModelConfig& cfg = model.config();
  if (!(options.gamma > 0.0 && options.gamma < 1.0)) throw DomainError("infer: gamma must lie in (0, 1)");
  const int k = options.exit_stack.value_or(cfg.vad_tap);
  if (k < 1 || k > cfg.n_stacks) throw DomainError("infer: exit stack must lie in [1, n_stacks]");

  if (!cfg.with_vad && options.early_exit) throw StateError("infer: early exit needs a VAD branch");

  ad::NoGradGuard no_grad;
  const int sr = x.sample_rate();
  const std::size_t length = x.size();
  const Tensor encoded = model.encode(x);
  const std::size_t frames = encoded.dim(1);
  const bool skip = options.early_exit && k < cfg.n_stacks;

  const BackboneOutput bb =
      model.backbone(encoded, model.features(x), embedding, skip ? std::optional<int>(k) : std::nullopt);
  InferenceResult result;
  result.frames = frames;
  if (!cfg.with_vad) {
    result.raw_estimate = to_wave(model.separation_branch(bb.after_stack.back(), encoded, length), sr);
    result.frames_after_exit = frames;
    result.vad_probability = dsp::VadMask::constant(length, 1.0);
    result.gate = result.vad_probability;
    result.estimate = result.raw_estimate;
    return result;
  }
  result.vad_probability = to_mask(model.vad_branch(bb.after_stack[static_cast<std::size_t>(k - 1)], length));
  result.gate = make_gate(result.vad_probability, options, sr);

  if (!skip) {
    result.raw_estimate = to_wave(model.separation_branch(bb.after_stack.back(), encoded, length), sr);
    result.frames_after_exit = frames;
  } else {
    const std::size_t stride = model.stride();
    const auto kernel = static_cast<std::size_t>(cfg.kernel);
    const std::vector<bool> active = active_frames(result.gate, frames, stride, kernel);
    const std::vector<dsp::Interval> segments =
        padded_segments(active, stack_half_receptive_field(cfg, cfg.n_stacks - k));
    const Tensor& hidden_k = bb.after_stack.back();
    std::vector<double> out((frames - 1) * stride + kernel, 0.0);
    for (const dsp::Interval& seg : segments) {
      Tensor h = ad::slice_cols(hidden_k, seg.begin, seg.end);
      for (int s = k; s < cfg.n_stacks; ++s) h = model.run_stack(s, h, embedding);
      Tensor y = ad::mul(ad::slice_cols(encoded, seg.begin, seg.end), model.mask(h));
      if (std::find(active.begin() + seg.begin, active.begin() + seg.end, false) != active.begin() + seg.end) {
        std::vector<double> keep(y.numel());
        const std::size_t width = seg.end - seg.begin;
        for (std::size_t c = 0; c < y.dim(0); ++c)
          for (std::size_t f = 0; f < width; ++f) keep[c * width + f] = active[seg.begin + f] ? 1.0 : 0.0;
        y = ad::mul(y, Tensor::constant(y.shape(), std::move(keep)));
      }
      const Tensor decoded = model.decode(y);
      const std::size_t offset = seg.begin * stride;
      for (std::size_t i = 0; i < decoded.numel(); ++i) out[offset + i] += decoded.values()[i];
      result.frames_after_exit += seg.end - seg.begin;
    }
    out.resize(length, 0.0);
    result.raw_estimate = dsp::Waveform(std::move(out), sr);
  }
  result.estimate = dsp::apply_mask(result.raw_estimate, result.gate);
  return result;
}

}  // namespace tss::model
