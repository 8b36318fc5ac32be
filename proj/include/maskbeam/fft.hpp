#ifndef MASKBEAM_FFT_HPP
#define MASKBEAM_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace maskbeam {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place radix-2 transform. Size must be a power of two. The inverse
// includes the 1/N factor, so ifft(fft(x)) == x up to rounding.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false);

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& a);
std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& a);

}  // namespace maskbeam

#endif  // MASKBEAM_FFT_HPP
