#include "tss/model/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

#include "tss/errors.hpp"

namespace tss::model {

NLOHMANN_JSON_SERIALIZE_ENUM(EmbeddingProvider, {{EmbeddingProvider::kLookup, "lookup"},
                                                 {EmbeddingProvider::kEnrollment, "enrollment"}})

void ModelConfig::validate() const {
  if (kernel < 2 || kernel % 2 != 0) throw DomainError("ModelConfig: kernel L must be even and >= 2");
  if (filters < 1 || bottleneck < 1 || hidden < 1 || embed_dim < 1 || n_mels < 1)
    throw DomainError("ModelConfig: all widths must be >= 1");
  if (n_stacks < 1 || layers_per_stack < 1) throw DomainError("ModelConfig: need at least one TCN layer");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw DomainError("ModelConfig: conv_kernel must be odd");
  if (vad_tap < 1 || vad_tap > n_stacks) throw DomainError("ModelConfig: vad_tap must lie in [1, n_stacks]");
  if (fft_size < 2) throw DomainError("ModelConfig: fft_size must be >= 2");
  if (sample_rate <= 0) throw DomainError("ModelConfig: sample_rate must be positive");
  if (provider == EmbeddingProvider::kLookup && speaker_ids.empty())
    throw DomainError("ModelConfig: lookup provider needs speaker_ids");
}

ModelConfig ModelConfig::full_default() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.filters = 8;
  c.n_stacks = 1;
  c.layers_per_stack = 2;
  c.bottleneck = 8;
  c.hidden = 8;
  c.embed_dim = 4;
  c.n_mels = 8;
  c.vad_tap = 1;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"kernel", c.kernel},
                     {"filters", c.filters},
                     {"n_stacks", c.n_stacks},
                     {"layers_per_stack", c.layers_per_stack},
                     {"bottleneck", c.bottleneck},
                     {"hidden", c.hidden},
                     {"conv_kernel", c.conv_kernel},
                     {"embed_dim", c.embed_dim},
                     {"n_mels", c.n_mels},
                     {"fft_size", c.fft_size},
                     {"vad_tap", c.vad_tap},
                     {"with_vad", c.with_vad},
                     {"provider", c.provider},
                     {"speaker_ids", c.speaker_ids},
                     {"init_seed", c.init_seed},
                     {"projection_seed", c.projection_seed},
                     {"sample_rate", c.sample_rate},
                     {"norm_eps", c.norm_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.kernel = j.value("kernel", d.kernel);
  c.filters = j.value("filters", d.filters);
  c.n_stacks = j.value("n_stacks", d.n_stacks);
  c.layers_per_stack = j.value("layers_per_stack", d.layers_per_stack);
  c.bottleneck = j.value("bottleneck", d.bottleneck);
  c.hidden = j.value("hidden", d.hidden);
  c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.n_mels = j.value("n_mels", d.n_mels);
  c.fft_size = j.value("fft_size", d.fft_size);
  c.vad_tap = j.value("vad_tap", d.vad_tap);
  c.with_vad = j.value("with_vad", d.with_vad);
  c.provider = j.value("provider", d.provider);
  c.speaker_ids = j.value("speaker_ids", d.speaker_ids);
  c.init_seed = j.value("init_seed", d.init_seed);
  c.projection_seed = j.value("projection_seed", d.projection_seed);
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.norm_eps = j.value("norm_eps", d.norm_eps);
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_model_config: cannot open " + path.string());
  try {
    ModelConfig c = nlohmann::json::parse(in).get<ModelConfig>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_model_config: " + std::string(e.what()));
  }
}

void save_model_config(const std::filesystem::path& path, const ModelConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("save_model_config: cannot open " + path.string());
  out << nlohmann::json(config).dump(2) << '\n';
}

}  // namespace tss::model
