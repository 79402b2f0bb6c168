#include "tss/model/separator.hpp"

#include <cmath>
#include <random>
#include <string>

#include "tss/ad/ops.hpp"
#include "tss/errors.hpp"

namespace tss::model {

using ad::Tensor;

namespace {

std::string layer_name(int stack, int layer, const char* part) {
  return "tcn." + std::to_string(stack) + "." + std::to_string(layer) + "." + part;
}

std::size_t to_size(int v) { return static_cast<std::size_t>(v); }

}  // namespace

std::size_t stack_receptive_field(const ModelConfig& config) {
  return 1 + to_size(config.conv_kernel - 1) * ((std::size_t{1} << config.layers_per_stack) - 1);
}

std::size_t stack_half_receptive_field(const ModelConfig& config, int stacks) {
  if (stacks <= 0) return 0;
  return to_size(stacks) * (stack_receptive_field(config) - 1) / 2;
}

SeparatorModel::SeparatorModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  bank_ = std::make_shared<dsp::MelBank>(config_.n_mels, config_.fft_size, config_.sample_rate);
  if (config_.provider == EmbeddingProvider::kEnrollment) {
    embedder_ = std::make_shared<EnrollmentEmbedder>(config_.n_mels, config_.fft_size, config_.embed_dim, stride(),
                                                     config_.sample_rate, config_.projection_seed);
  }

  std::mt19937_64 rng(config_.init_seed);
  const auto N = to_size(config_.filters);
  const auto L = to_size(config_.kernel);
  const auto B = to_size(config_.bottleneck);
  const auto H = to_size(config_.hidden);
  const auto D = to_size(config_.embed_dim);
  const auto M = to_size(config_.n_mels);
  const auto P = to_size(config_.conv_kernel);
  auto bound = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };

  add_param("encoder.weight", {N, 1, L}, bound(L), rng);
  add_constant_param("frontend.norm.gain", {N + M}, 1.0);
  add_constant_param("frontend.norm.bias", {N + M}, 0.0);
  add_param("frontend.proj.weight", {B, N + M, 1}, bound(N + M), rng);
  add_param("frontend.proj.bias", {B}, bound(N + M), rng);
  for (int s = 0; s < config_.n_stacks; ++s) {
    for (int l = 0; l < config_.layers_per_stack; ++l) {
      const std::size_t in = (s == 0 && l == 0) ? B + D : B;
      add_param(layer_name(s, l, "in.weight"), {H, in, 1}, bound(in), rng);
      add_param(layer_name(s, l, "in.bias"), {H}, bound(in), rng);
      add_constant_param(layer_name(s, l, "prelu1"), {1}, 0.25);
      add_constant_param(layer_name(s, l, "norm1.gain"), {H}, 1.0);
      add_constant_param(layer_name(s, l, "norm1.bias"), {H}, 0.0);
      add_param(layer_name(s, l, "dw.weight"), {H, 1, P}, bound(P), rng);
      add_param(layer_name(s, l, "dw.bias"), {H}, bound(P), rng);
      add_constant_param(layer_name(s, l, "prelu2"), {1}, 0.25);
      add_constant_param(layer_name(s, l, "norm2.gain"), {H}, 1.0);
      add_constant_param(layer_name(s, l, "norm2.bias"), {H}, 0.0);
      add_param(layer_name(s, l, "out.weight"), {B, H, 1}, bound(H), rng);
      add_param(layer_name(s, l, "out.bias"), {B}, bound(H), rng);
    }
  }
  add_param("sep.mask.weight", {N, B, 1}, bound(B), rng);
  add_param("sep.mask.bias", {N}, bound(B), rng);
  add_param("sep.decoder.weight", {N, 1, L}, bound(N), rng);
  if (config_.with_vad) {
    add_param("vad.head.weight", {N, B, 1}, bound(B), rng);
    add_param("vad.head.bias", {N}, bound(B), rng);
    add_param("vad.decoder.weight", {N, 1, L}, bound(N), rng);
    add_constant_param("vad.decoder.bias", {1}, 0.0);
  }
  if (config_.provider == EmbeddingProvider::kLookup) {
    add_param("embedding.table", {config_.speaker_ids.size(), D}, 1.0, rng);
  }
}

Tensor& SeparatorModel::add_param(const std::string& name, ad::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(ad::numel(shape));
  for (double& v : values) v = dist(rng);
  index_[name] = params_.size();
  names_.push_back(name);
  params_.push_back(Tensor::parameter(std::move(shape), std::move(values)));
  return params_.back();
}

Tensor& SeparatorModel::add_constant_param(const std::string& name, ad::Shape shape, double value) {
  const std::size_t n = ad::numel(shape);
  index_[name] = params_.size();
  names_.push_back(name);
  params_.push_back(Tensor::parameter(std::move(shape), std::vector<double>(n, value)));
  return params_.back();
}

const Tensor& SeparatorModel::parameter(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("SeparatorModel: unknown parameter " + name);
  return params_[it->second];
}

std::size_t SeparatorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.numel();
  return n;
}

std::size_t SeparatorModel::frames_for(std::size_t length) const {
  const auto L = to_size(config_.kernel);
  if (length < L)
    throw DomainError("SeparatorModel: input of " + std::to_string(length) + " samples is shorter than L=" +
                      std::to_string(L));
  return (length - L) / stride() + 1;
}

std::vector<ad::NamedArray> SeparatorModel::state() const {
  std::vector<ad::NamedArray> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    out.push_back({names_[i], params_[i].shape(), {params_[i].values().begin(), params_[i].values().end()}});
  return out;
}

void SeparatorModel::load_state(const std::vector<ad::NamedArray>& arrays) {
  if (arrays.size() != params_.size())
    throw FormatError("load_state: checkpoint has " + std::to_string(arrays.size()) + " tensors, model expects " +
                      std::to_string(params_.size()));
  for (const auto& a : arrays) {
    const auto it = index_.find(a.name);
    if (it == index_.end()) throw FormatError("load_state: unexpected tensor " + a.name);
    Tensor& t = params_[it->second];
    if (t.shape() != a.shape)
      throw FormatError("load_state: shape mismatch for " + a.name + ": " + ad::shape_string(a.shape) + " vs " +
                        ad::shape_string(t.shape()));
    auto values = t.mutable_values();
    std::copy(a.values.begin(), a.values.end(), values.begin());
  }
}

void SeparatorModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_model_config(dir / "config.json", config_);
  ad::save_checkpoint(dir / "model.ckpt", state());
}

SeparatorModel SeparatorModel::load(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "model.ckpt"))
    throw StateError("SeparatorModel::load: no checkpoint in " + dir.string());
  SeparatorModel m(load_model_config(dir / "config.json"));
  m.load_state(ad::load_checkpoint(dir / "model.ckpt"));
  m.trained_ = true;
  return m;
}

Tensor SeparatorModel::embedding_tensor(const std::vector<double>& vector) const {
  if (vector.size() != to_size(config_.embed_dim))
    throw DomainError("SeparatorModel: embedding has dimension " + std::to_string(vector.size()) + ", expected " +
                      std::to_string(config_.embed_dim));
  return Tensor::constant({vector.size()}, vector);
}

std::vector<double> SeparatorModel::enrollment_embedding(const dsp::Waveform& enrollment) const {
  if (!embedder_) throw StateError("SeparatorModel: model uses a lookup embedding provider");
  return embedder_->embed(enrollment);
}

Tensor SeparatorModel::embedding_for(const SpeakerRef& ref) const {
  if (config_.provider == EmbeddingProvider::kLookup) {
    const auto& ids = config_.speaker_ids;
    const auto it = std::find(ids.begin(), ids.end(), ref.speaker_id);
    if (it == ids.end()) throw DomainError("SeparatorModel: unknown speaker id '" + ref.speaker_id + "'");
    return ad::select_row(p("embedding.table"), static_cast<std::size_t>(it - ids.begin()));
  }
  if (!ref.enrollment) throw DomainError("SeparatorModel: enrollment audio required for speaker '" + ref.speaker_id + "'");
  return embedding_tensor(enrollment_embedding(*ref.enrollment));
}

dsp::FeatureMatrix SeparatorModel::features(const dsp::Waveform& x) const {
  auto feats = dsp::logfbank(x, *bank_, stride());
  dsp::normalize_features(feats);
  return feats;
}

Tensor SeparatorModel::encode(const dsp::Waveform& x) const {
  frames_for(x.size());
  const Tensor input = Tensor::constant({1, x.size()}, x.samples());
  ad::Conv1dSpec spec;
  spec.stride = stride();
  return ad::relu(ad::conv1d(input, p("encoder.weight"), {}, spec));
}

Tensor SeparatorModel::frontend(const Tensor& encoded, const dsp::FeatureMatrix& feats) const {
  const std::size_t frames = encoded.dim(1);
  if (feats.frames != frames)
    throw DomainError("SeparatorModel: logfbank has " + std::to_string(feats.frames) + " frames, encoder " +
                      std::to_string(frames));
  if (feats.dims != to_size(config_.n_mels)) throw DomainError("SeparatorModel: logfbank dimension mismatch");
  std::vector<double> transposed(feats.dims * frames);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t d = 0; d < feats.dims; ++d) transposed[d * frames + f] = feats.at(f, d);
  const Tensor parts[] = {encoded, Tensor::constant({feats.dims, frames}, std::move(transposed))};
  const Tensor joined = ad::concat_rows(parts);
  const Tensor normed =
      ad::global_layer_norm(joined, p("frontend.norm.gain"), p("frontend.norm.bias"), config_.norm_eps);
  return ad::conv1d(normed, p("frontend.proj.weight"), p("frontend.proj.bias"), {});
}

Tensor SeparatorModel::run_stack(int stack, const Tensor& hidden, const Tensor& embedding) const {
  if (stack < 0 || stack >= config_.n_stacks) throw DomainError("run_stack: stack index out of range");
  const std::size_t frames = hidden.dim(1);
  Tensor h = hidden;
  for (int l = 0; l < config_.layers_per_stack; ++l) {
    Tensor in = h;
    if (stack == 0 && l == 0) {
      if (!embedding.defined() || embedding.numel() != to_size(config_.embed_dim))
        throw DomainError("run_stack: speaker embedding of dimension " + std::to_string(config_.embed_dim) +
                          " required");
      const Tensor parts[] = {h, ad::repeat_cols(embedding, frames)};
      in = ad::concat_rows(parts);
    }
    const std::size_t dilation = std::size_t{1} << l;
    Tensor y = ad::conv1d(in, p(layer_name(stack, l, "in.weight")), p(layer_name(stack, l, "in.bias")), {});
    y = ad::prelu(y, p(layer_name(stack, l, "prelu1")));
    y = ad::global_layer_norm(y, p(layer_name(stack, l, "norm1.gain")), p(layer_name(stack, l, "norm1.bias")),
                              config_.norm_eps);
    ad::Conv1dSpec dw;
    dw.dilation = dilation;
    dw.padding = dilation * to_size(config_.conv_kernel - 1) / 2;
    dw.groups = to_size(config_.hidden);
    y = ad::conv1d(y, p(layer_name(stack, l, "dw.weight")), p(layer_name(stack, l, "dw.bias")), dw);
    y = ad::prelu(y, p(layer_name(stack, l, "prelu2")));
    y = ad::global_layer_norm(y, p(layer_name(stack, l, "norm2.gain")), p(layer_name(stack, l, "norm2.bias")),
                              config_.norm_eps);
    y = ad::conv1d(y, p(layer_name(stack, l, "out.weight")), p(layer_name(stack, l, "out.bias")), {});
    h = ad::add(h, y);
  }
  return h;
}

BackboneOutput SeparatorModel::backbone(const Tensor& encoded, const dsp::FeatureMatrix& feats,
                                        const Tensor& embedding, std::optional<int> k_stop) const {
  const int stop = k_stop.value_or(config_.n_stacks);
  if (stop < 1 || stop > config_.n_stacks) throw DomainError("backbone: k_stop must lie in [1, n_stacks]");
  BackboneOutput out;
  Tensor h = frontend(encoded, feats);
  for (int s = 0; s < stop; ++s) {
    h = run_stack(s, h, embedding);
    out.after_stack.push_back(h);
  }
  return out;
}

Tensor SeparatorModel::mask(const Tensor& hidden) const {
  return ad::relu(ad::conv1d(hidden, p("sep.mask.weight"), p("sep.mask.bias"), {}));
}

Tensor SeparatorModel::decode(const Tensor& masked) const {
  return ad::conv_transpose1d(masked, p("sep.decoder.weight"), {}, stride());
}

Tensor SeparatorModel::separation_branch(const Tensor& hidden, const Tensor& encoded, std::size_t length) const {
  const Tensor y = ad::mul(encoded, mask(hidden));
  return ad::fit_length(decode(y), length);
}

Tensor SeparatorModel::vad_logits(const Tensor& hidden) const {
  if (!config_.with_vad) throw StateError("SeparatorModel: model has no VAD branch");
  const Tensor v = ad::relu(ad::conv1d(hidden, p("vad.head.weight"), p("vad.head.bias"), {}));
  return ad::conv_transpose1d(v, p("vad.decoder.weight"), p("vad.decoder.bias"), stride());
}

Tensor SeparatorModel::vad_branch(const Tensor& hidden, std::size_t length) const {
  return ad::sigmoid(ad::fit_length(vad_logits(hidden), length));
}

JointOutput SeparatorModel::forward_joint(const dsp::Waveform& x, const Tensor& embedding) const {
  return forward_joint(x, features(x), embedding);
}

JointOutput SeparatorModel::forward_joint(const dsp::Waveform& x, const dsp::FeatureMatrix& feats,
                                          const Tensor& embedding) const {
  const Tensor encoded = encode(x);
  const BackboneOutput bb = backbone(encoded, feats, embedding);
  JointOutput out;
  out.estimate = separation_branch(bb.after_stack.back(), encoded, x.size());
  if (config_.with_vad) out.vad_probability = vad_branch(bb.after_stack[to_size(config_.vad_tap - 1)], x.size());
  return out;
}

}  // namespace tss::model
