#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tss::model {

enum class EmbeddingProvider {
  kLookup,      // trainable table keyed by speaker id
  kEnrollment,  // fixed projection of averaged enrollment logfbank
};

struct ModelConfig {
  int kernel = 40;            // encoder kernel L (samples); stride is L/2
  int filters = 256;          // encoder filters N
  int n_stacks = 4;
  int layers_per_stack = 8;   // layer b of a stack uses dilation 2^b
  int bottleneck = 256;       // backbone channels between TCN layers
  int hidden = 512;           // channels inside a TCN layer
  int conv_kernel = 3;        // depthwise kernel, odd
  int embed_dim = 256;
  int n_mels = 80;
  int fft_size = 512;
  int vad_tap = 4;            // stack (1-based) feeding the VAD branch
  bool with_vad = true;       // false for the separation-only baseline
  EmbeddingProvider provider = EmbeddingProvider::kEnrollment;
  std::vector<std::string> speaker_ids;  // lookup-table rows
  std::uint64_t init_seed = 0;
  std::uint64_t projection_seed = 20210901;
  int sample_rate = 16000;
  double norm_eps = 1e-8;

  int stride() const { return kernel / 2; }
  void validate() const;

  // Full-size defaults (the plain ModelConfig{}).
  static ModelConfig full_default();
  // N=8, 1 stack x 2 layers; used for gradient checks.
  static ModelConfig tiny();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

ModelConfig load_model_config(const std::filesystem::path& path);
void save_model_config(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace tss::model
