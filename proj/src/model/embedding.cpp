#include "tss/model/embedding.hpp"

#include <cmath>
#include <random>

#include "tss/errors.hpp"

namespace tss::model {

namespace {
constexpr double kSilentFrameEnergy = 1e-6;
}

EnrollmentEmbedder::EnrollmentEmbedder(int n_mels, int fft_size, int embed_dim, std::size_t frame_step,
                                       int sample_rate, std::uint64_t seed)
    : bank_(n_mels, fft_size, sample_rate), embed_dim_(embed_dim), frame_step_(frame_step) {
  if (embed_dim < 1) throw DomainError("EnrollmentEmbedder: embed_dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(n_mels)));
  projection_.resize(static_cast<std::size_t>(embed_dim) * n_mels);
  for (double& v : projection_) v = normal(rng);
}

std::vector<double> EnrollmentEmbedder::embed(const dsp::Waveform& enrollment) const {
  const auto feats = dsp::logfbank(enrollment, bank_, frame_step_);
  const std::size_t dims = feats.dims;
  std::vector<double> avg(dims, 0.0);
  std::size_t used = 0;
  const double floor = std::log(kSilentFrameEnergy);
  for (int pass = 0; pass < 2 && used == 0; ++pass) {
    for (std::size_t f = 0; f < feats.frames; ++f) {
      double peak = -INFINITY;
      for (std::size_t d = 0; d < dims; ++d) peak = std::max(peak, feats.at(f, d));
      if (pass == 0 && peak < floor) continue;
      for (std::size_t d = 0; d < dims; ++d) avg[d] += feats.at(f, d);
      ++used;
    }
  }
  double centre = 0.0;
  for (double& v : avg) {
    v /= static_cast<double>(used);
    centre += v;
  }
  centre /= static_cast<double>(dims);
  for (double& v : avg) v -= centre;

  std::vector<double> out(static_cast<std::size_t>(embed_dim_), 0.0);
  double norm_sq = 0.0;
  for (int i = 0; i < embed_dim_; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dims; ++d) acc += projection_[i * dims + d] * avg[d];
    out[i] = acc;
    norm_sq += acc * acc;
  }
  if (norm_sq > 0.0) {
    const double scale = std::sqrt(static_cast<double>(embed_dim_) / norm_sq);
    for (double& v : out) v *= scale;
  }
  return out;
}

}  // namespace tss::model
