#pragma once

#include <complex>
#include <vector>

#include "amt/tensor.hpp"

namespace amt::dsp {

/// In-place iterative radix-2 FFT (decimation in time). Size must be a power
/// of two.
template <typename S>
void fft_inplace(std::vector<std::complex<S>>& a) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw nn::NumericError("fft: size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const S ang = static_cast<S>(-2.0 * M_PI) / static_cast<S>(len);
    const std::complex<S> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<S> w(1);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<S> u = a[i + j];
        const std::complex<S> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace amt::dsp
