#ifndef MASKBEAM_STFT_HPP
#define MASKBEAM_STFT_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "maskbeam/common.hpp"

namespace maskbeam {

// Analysis/synthesis parameters. Defaults: 16 kHz, 1024-point FFT (513 bins),
// hop 256, periodic Hann on both sides with overlap-add renormalization.
struct StftConfig {
  enum class Window { kHann };

  int fft_size = 1024;
  int hop = 256;
  Window window = Window::kHann;
  int sample_rate = 16000;

  int num_bins() const { return fft_size / 2 + 1; }
  void validate() const;

  bool operator==(const StftConfig&) const = default;
};

// Complex STFT tensor, frames x bins (x channels).
// Storage: data[(t * num_bins + b) * num_channels + m], so the M channel
// values of one time-frequency cell are contiguous.
struct Spectrogram {
  StftConfig config;
  int num_frames = 0;
  int num_bins = 0;
  int num_channels = 1;
  std::int64_t num_samples = 0;  // original signal length, kept for istft
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int t, int b, int m = 0) {
    return data[(static_cast<std::size_t>(t) * num_bins + b) * num_channels + m];
  }
  const std::complex<double>& at(int t, int b, int m = 0) const {
    return data[(static_cast<std::size_t>(t) * num_bins + b) * num_channels + m];
  }
  // Pointer to the M contiguous channel values of cell (t, b).
  const std::complex<double>* cell(int t, int b) const {
    return data.data() + (static_cast<std::size_t>(t) * num_bins + b) * num_channels;
  }

  Spectrogram channel(int m) const;
  void check_same_shape(const Spectrogram& other) const;
};

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

// Framing arithmetic, fixed across the library:
//   pad       = fft_size / 2 samples of reflect padding on each side
//   frames    T = floor(len / hop) + 1
//   frame t   covers padded samples [t*hop, t*hop + fft_size)
// so T is a deterministic function of the input length alone.
int stft_num_frames(std::int64_t num_samples, const StftConfig& cfg);

Spectrogram stft(std::span<const double> samples, const StftConfig& cfg);

// Multichannel: samples is channels x length; channels are stacked into one
// tensor with identical framing.
Spectrogram stft(const Eigen::MatrixXd& samples, const StftConfig& cfg);

// Weighted overlap-add synthesis with per-sample window-power normalization.
// Round-tripping stft(x) returns exactly len(x) samples. Multichannel input
// is rejected; select or beamform down to one channel first.
std::vector<double> istft(const Spectrogram& spec);

// Elementwise complex modulus, one T x B plane per channel.
Eigen::MatrixXd magnitude_channel(const Spectrogram& spec, int m);
std::vector<Eigen::MatrixXd> magnitude(const Spectrogram& spec);

// Elementwise |.|^2.
Eigen::MatrixXd power_channel(const Spectrogram& spec, int m);

}  // namespace maskbeam

#endif  // MASKBEAM_STFT_HPP
