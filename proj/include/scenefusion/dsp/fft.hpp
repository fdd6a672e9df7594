#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>

#include "scenefusion/common/error.hpp"

namespace scenefusion::dsp {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 forward transform, X_k = sum x_n e^{-2 pi i nk/N}.
inline void fft_inplace(std::span<std::complex<double>> data) {
  const std::size_t n = data.size();
  require(is_power_of_two(n), "fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const double step = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t k = 0; k < half; ++k) {
      // Direct evaluation per twiddle; a running product drifts at n=4096.
      const std::complex<double> w = std::polar(1.0, step * static_cast<double>(k));
      for (std::size_t start = 0; start < n; start += len) {
        const std::complex<double> u = data[start + k];
        const std::complex<double> v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

}  // namespace scenefusion::dsp
