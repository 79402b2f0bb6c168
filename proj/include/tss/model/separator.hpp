#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tss/ad/checkpoint.hpp"
#include "tss/ad/tensor.hpp"
#include "tss/dsp/features.hpp"
#include "tss/dsp/waveform.hpp"
#include "tss/model/config.hpp"
#include "tss/model/embedding.hpp"

namespace tss::model {

struct SpeakerEmbedding {
  std::vector<double> vector;
  std::string speaker_id;
};

// Where the embedding of a target speaker comes from.
struct SpeakerRef {
  std::string speaker_id;
  std::optional<dsp::Waveform> enrollment;
};

struct JointOutput {
  ad::Tensor estimate;         // [1, T]
  ad::Tensor vad_probability;  // [1, T]; undefined without a VAD branch
};

// Hidden maps after each TCN stack, [bottleneck, T'].
struct BackboneOutput {
  std::vector<ad::Tensor> after_stack;
};

// Time-domain target speaker separator: conv encoder, logfbank + encoder
// features through a shared TCN backbone conditioned on a speaker embedding,
// a masking separation branch and a personal-VAD branch.
class SeparatorModel {
 public:
  explicit SeparatorModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::size_t stride() const { return static_cast<std::size_t>(config_.stride()); }
  std::size_t frames_for(std::size_t length) const;

  std::vector<ad::Tensor>& parameters() { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  const ad::Tensor& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  std::vector<ad::NamedArray> state() const;
  void load_state(const std::vector<ad::NamedArray>& arrays);

  // Directory layout: config.json + model.ckpt.
  void save(const std::filesystem::path& dir) const;
  static SeparatorModel load(const std::filesystem::path& dir);

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  // Speaker conditioning as a [embed_dim] tensor. Lookup embeddings are
  // differentiable rows of the table; enrollment embeddings are constants.
  ad::Tensor embedding_for(const SpeakerRef& ref) const;
  ad::Tensor embedding_tensor(const std::vector<double>& vector) const;
  std::vector<double> enrollment_embedding(const dsp::Waveform& enrollment) const;

  dsp::FeatureMatrix features(const dsp::Waveform& x) const;  // normalized logfbank

  ad::Tensor encode(const dsp::Waveform& x) const;  // [N, T'], ReLU output
  // Concat with logfbank, global norm, 1x1 projection -> [bottleneck, T'].
  ad::Tensor frontend(const ad::Tensor& encoded, const dsp::FeatureMatrix& feats) const;
  // One TCN stack (0-based). The embedding is concatenated in the first layer
  // of stack 0 only.
  ad::Tensor run_stack(int stack, const ad::Tensor& hidden, const ad::Tensor& embedding) const;
  // Runs stacks 1..k_stop (all when k_stop is empty).
  BackboneOutput backbone(const ad::Tensor& encoded, const dsp::FeatureMatrix& feats, const ad::Tensor& embedding,
                          std::optional<int> k_stop = std::nullopt) const;

  ad::Tensor mask(const ad::Tensor& hidden) const;  // ReLU(1x1 conv), [N, T']
  ad::Tensor decode(const ad::Tensor& masked) const;  // transposed conv, [1, (T'-1)S + L]
  ad::Tensor separation_branch(const ad::Tensor& hidden, const ad::Tensor& encoded, std::size_t length) const;
  ad::Tensor vad_logits(const ad::Tensor& hidden) const;
  ad::Tensor vad_branch(const ad::Tensor& hidden, std::size_t length) const;

  // Full pipeline; the VAD branch reads the hidden map after stack vad_tap.
  JointOutput forward_joint(const dsp::Waveform& x, const ad::Tensor& embedding) const;
  JointOutput forward_joint(const dsp::Waveform& x, const dsp::FeatureMatrix& feats,
                            const ad::Tensor& embedding) const;

 private:
  ad::Tensor& add_param(const std::string& name, ad::Shape shape, double bound, std::mt19937_64& rng);
  ad::Tensor& add_constant_param(const std::string& name, ad::Shape shape, double value);
  const ad::Tensor& p(const std::string& name) const { return parameter(name); }

  ModelConfig config_;
  std::vector<ad::Tensor> params_;
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
  std::shared_ptr<const dsp::MelBank> bank_;
  std::shared_ptr<const EnrollmentEmbedder> embedder_;
  bool trained_ = false;
};

// Frames of context one side of a frame can see through `stacks` TCN stacks.
std::size_t stack_half_receptive_field(const ModelConfig& config, int stacks);
// Full receptive field of one stack: 1 + (P - 1)(2^layers - 1) frames.
std::size_t stack_receptive_field(const ModelConfig& config);

}  // namespace tss::model
