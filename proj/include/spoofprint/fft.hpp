#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "spoofprint/error.hpp"

namespace spoofprint {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Iterative radix-2 complex FFT with precomputed twiddles and bit reversal.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), twiddles_(n / 2), bitrev_(n) {
    if (n == 0 || (n & (n - 1)) != 0) throw DataError("FFT size must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k)
      twiddles_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  std::size_t size() const { return n_; }

  /// In-place forward transform (no scaling). `inverse` conjugates twiddles; the
  /// caller divides by n.
  void transform(std::span<std::complex<double>> x, bool inverse = false) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          auto w = twiddles_[k * stride];
          if (inverse) w = std::conj(w);
          const auto u = x[start + k];
          const auto v = x[start + k + half] * w;
          x[start + k] = u + v;
          x[start + k + half] = u - v;
        }
      }
    }
  }

  /// |X[k]|^2 for k = 0..n/2 of a real frame zero-padded to n.
  void power_spectrum(std::span<const double> frame, std::vector<double>& out,
                      std::vector<std::complex<double>>& scratch) const {
    scratch.assign(n_, {0.0, 0.0});
    for (std::size_t i = 0; i < frame.size() && i < n_; ++i) scratch[i] = {frame[i], 0.0};
    transform(scratch);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = std::norm(scratch[k]);
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bitrev_;
};

}  // namespace spoofprint
