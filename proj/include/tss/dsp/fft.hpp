#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace tss::dsp {

// Real-to-complex FFT of a fixed size backed by FFTW. An instance owns its
// buffers and plan, so it must not be shared across threads; separate
// instances may be used concurrently.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return size_; }
  std::size_t n_bins() const { return size_ / 2 + 1; }

  // `out` holds n_bins() coefficients (unnormalized).
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // Inverse of forward(), including the 1/size normalization.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  std::size_t size_;
  double* real_ = nullptr;
  void* spectrum_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace tss::dsp
