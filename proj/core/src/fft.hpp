#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace neurospect::detail {

// Real <-> half-complex FFT of a fixed length backed by FFTW. Each instance
// owns its buffers and plans; instances are not shared between threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // out.size() must equal bins().
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // Unnormalized inverse: forward followed by inverse scales by n.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  std::size_t n_;
  double* real_ = nullptr;
  void* spectrum_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace neurospect::detail
