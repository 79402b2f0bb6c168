#pragma once

#include <cstdint>
#include <vector>

#include "tss/dsp/features.hpp"
#include "tss/dsp/waveform.hpp"

namespace tss::model {

// Stand-in for a pre-trained speaker verifier: the logfbank of the enrollment
// audio, averaged over non-silent frames and centered across filters, is
// mapped through a fixed seeded Gaussian projection and scaled to norm
// sqrt(dim).
class EnrollmentEmbedder {
 public:
  EnrollmentEmbedder(int n_mels, int fft_size, int embed_dim, std::size_t frame_step, int sample_rate,
                     std::uint64_t seed);

  std::vector<double> embed(const dsp::Waveform& enrollment) const;
  int dim() const { return embed_dim_; }

 private:
  dsp::MelBank bank_;
  int embed_dim_;
  std::size_t frame_step_;
  std::vector<double> projection_;  // [embed_dim x n_mels]
};

}  // namespace tss::model
