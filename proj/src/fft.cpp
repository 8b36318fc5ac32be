#include "maskbeam/fft.hpp"

#include <cmath>
#include <numbers>

#include "maskbeam/common.hpp"

namespace maskbeam {

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if (!is_power_of_two(n))
    throw ValidationError("fft size must be a power of two, got " + std::to_string(n));

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  // per-index twiddles (no incremental accumulation of rounding error)
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> twiddle(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j) {
    double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    twiddle[j] = {std::cos(ang), std::sin(ang)};
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * twiddle[j * stride];
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& a) {
  auto out = a;
  fft_inplace(out, false);
  return out;
}

std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& a) {
  auto out = a;
  fft_inplace(out, true);
  return out;
}

}  // namespace maskbeam
