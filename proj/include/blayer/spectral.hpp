#pragma once

// Real-to-complex FFT of fixed length on top of FFTW. Plans are made once
// (FFTW planning is not thread-safe, hence the mutex); execution uses the
// new-array interface so one plan can serve concurrent callers.

#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "blayer/error.hpp"

namespace blayer {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

class RealFFT {
 public:
  explicit RealFFT(std::size_t n) : n_(n) {
    if (n < 2) throw DomainError("FFT length must be at least 2");
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
      inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
    }
    fftw_free(in);
    fftw_free(out);
    if (!forward_ || !inverse_) throw Error("FFTW planning failed");
  }
  RealFFT(const RealFFT&) = delete;
  RealFFT& operator=(const RealFFT&) = delete;
  ~RealFFT() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t size() const { return n_; }
  std::size_t spectrum_size() const { return n_ / 2 + 1; }

  /// Unnormalized forward transform of x (zero-padded to n).
  std::vector<std::complex<double>> forward(const std::vector<double>& x) const {
    if (x.size() > n_) throw DomainError("FFT input longer than the transform");
    Buffer<double> in(n_);
    Buffer<fftw_complex> out(spectrum_size());
    std::copy(x.begin(), x.end(), in.get());
    std::fill(in.get() + x.size(), in.get() + n_, 0.0);
    fftw_execute_dft_r2c(forward_, in.get(), out.get());
    std::vector<std::complex<double>> y(spectrum_size());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = {out.get()[j][0], out.get()[j][1]};
    return y;
  }

  /// Unnormalized inverse transform (the result is n times the true inverse).
  std::vector<double> inverse(const std::vector<std::complex<double>>& y) const {
    if (y.size() != spectrum_size()) throw DomainError("FFT spectrum has the wrong length");
    Buffer<fftw_complex> in(spectrum_size());
    Buffer<double> out(n_);
    for (std::size_t j = 0; j < y.size(); ++j) {
      in.get()[j][0] = y[j].real();
      in.get()[j][1] = y[j].imag();
    }
    fftw_execute_dft_c2r(inverse_, in.get(), out.get());
    return std::vector<double>(out.get(), out.get() + n_);
  }

 private:
  template <class T>
  struct Buffer {
    explicit Buffer(std::size_t n) : p(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
      if (!p) throw std::bad_alloc();
    }
    ~Buffer() { fftw_free(p); }
    T* get() const { return p; }
    T* p;
  };

  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace blayer
