#pragma once

#include <cstddef>
#include <optional>

#include "tss/ad/tensor.hpp"
#include "tss/dsp/vad_ops.hpp"
#include "tss/dsp/waveform.hpp"
#include "tss/model/separator.hpp"

namespace tss::model {

struct InferenceOptions {
  double gamma = dsp::kDefaultThreshold;
  double smoothing_ms = dsp::kSmoothingWindowMs;
  bool early_exit = false;
  // Stack after which the VAD branch is read (and, in early-exit mode, after
  // which inactive frames stop). Defaults to the model's vad_tap.
  std::optional<int> exit_stack;
  // Binary per-sample gate used in place of the smoothed, thresholded VAD.
  std::optional<dsp::VadMask> gate_override;
};

struct InferenceResult {
  dsp::Waveform estimate;      // gated output
  dsp::Waveform raw_estimate;  // separation output before gating
  dsp::VadMask vad_probability;
  dsp::VadMask gate;
  std::size_t frames = 0;
  std::size_t frames_after_exit = 0;  // frames run through stacks past the exit point
};

// Without a VAD branch the separation output is returned ungated.
InferenceResult infer(const SeparatorModel& model, const dsp::Waveform& x, const ad::Tensor& embedding,
                      const InferenceOptions& options = {});

// Frames whose span [fS, fS + L) holds at least one active gate sample.
std::vector<bool> active_frames(const dsp::VadMask& gate, std::size_t frames, std::size_t stride,
                                std::size_t kernel);
// Runs of active frames widened by `pad` on each side, clipped and merged.
std::vector<dsp::Interval> padded_segments(const std::vector<bool>& active, std::size_t pad);

}  // namespace tss::model
