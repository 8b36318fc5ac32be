#include "maskbeam/stft.hpp"

#include <cmath>
#include <numbers>

#include "maskbeam/fft.hpp"

namespace maskbeam {

void StftConfig::validate() const {
  if (fft_size < 4 || !is_power_of_two(static_cast<std::size_t>(fft_size)))
    throw ValidationError("fft_size must be a power of two >= 4, got " +
                          std::to_string(fft_size));
  if (hop <= 0 || fft_size % hop != 0)
    throw ValidationError("hop must be positive and divide fft_size");
  if (sample_rate <= 0) throw ValidationError("sample_rate must be positive");
}

Spectrogram Spectrogram::channel(int m) const {
  if (m < 0 || m >= num_channels) throw ValidationError("channel index out of range");
  Spectrogram out;
  out.config = config;
  out.num_frames = num_frames;
  out.num_bins = num_bins;
  out.num_channels = 1;
  out.num_samples = num_samples;
  out.data.resize(static_cast<std::size_t>(num_frames) * num_bins);
  for (int t = 0; t < num_frames; ++t)
    for (int b = 0; b < num_bins; ++b) out.data[static_cast<std::size_t>(t) * num_bins + b] = at(t, b, m);
  return out;
}

void Spectrogram::check_same_shape(const Spectrogram& other) const {
  if (num_frames != other.num_frames || num_bins != other.num_bins ||
      num_channels != other.num_channels)
    throw ValidationError("spectrogram shape mismatch");
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

int stft_num_frames(std::int64_t num_samples, const StftConfig& cfg) {
  return static_cast<int>(num_samples / cfg.hop) + 1;
}

namespace {

// Reflect (no edge repeat) index mapping for out-of-range positions.
std::int64_t reflect_index(std::int64_t i, std::int64_t len) {
  if (len == 1) return 0;
  const std::int64_t period = 2 * (len - 1);
  std::int64_t j = i % period;
  if (j < 0) j += period;
  return j < len ? j : period - j;
}

}  // namespace

Spectrogram stft(std::span<const double> samples, const StftConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw ValidationError("stft: empty input");

  const int n = cfg.fft_size;
  const int pad = n / 2;
  const int num_bins = cfg.num_bins();
  const std::int64_t len = static_cast<std::int64_t>(samples.size());
  const int num_frames = stft_num_frames(len, cfg);
  const auto window = hann_window(n);

  Spectrogram out;
  out.config = cfg;
  out.num_frames = num_frames;
  out.num_bins = num_bins;
  out.num_channels = 1;
  out.num_samples = len;
  out.data.resize(static_cast<std::size_t>(num_frames) * num_bins);

  std::vector<std::complex<double>> buf(n);
  for (int t = 0; t < num_frames; ++t) {
    const std::int64_t start = static_cast<std::int64_t>(t) * cfg.hop - pad;
    for (int i = 0; i < n; ++i)
      buf[i] = samples[static_cast<std::size_t>(reflect_index(start + i, len))] * window[i];
    fft_inplace(buf, false);
    for (int b = 0; b < num_bins; ++b) out.data[static_cast<std::size_t>(t) * num_bins + b] = buf[b];
  }
  return out;
}

Spectrogram stft(const Eigen::MatrixXd& samples, const StftConfig& cfg) {
  const int channels = static_cast<int>(samples.rows());
  if (channels < 1) throw ValidationError("stft: need at least one channel");
  Spectrogram out;
  for (int m = 0; m < channels; ++m) {
    Eigen::VectorXd row = samples.row(m);
    Spectrogram one = stft(std::span<const double>(row.data(), row.size()), cfg);
    if (m == 0) {
      out = one;
      out.num_channels = channels;
      out.data.assign(static_cast<std::size_t>(out.num_frames) * out.num_bins * channels, {});
    }
    for (int t = 0; t < out.num_frames; ++t)
      for (int b = 0; b < out.num_bins; ++b)
        out.at(t, b, m) = one.at(t, b);
  }
  return out;
}

std::vector<double> istft(const Spectrogram& spec) {
  spec.config.validate();
  if (spec.num_channels != 1)
    throw ValidationError("istft: multichannel input; select or beamform to one channel first");
  if (spec.num_bins != spec.config.num_bins())
    throw ValidationError("istft: bin count does not match config");

  const int n = spec.config.fft_size;
  const int hop = spec.config.hop;
  const int pad = n / 2;
  const std::int64_t out_len =
      spec.num_samples > 0 ? spec.num_samples
                           : static_cast<std::int64_t>(spec.num_frames - 1) * hop;
  const auto window = hann_window(n);

  const std::int64_t acc_len = static_cast<std::int64_t>(spec.num_frames - 1) * hop + n;
  std::vector<double> acc(acc_len, 0.0), wsum(acc_len, 0.0);

  std::vector<std::complex<double>> buf(n);
  for (int t = 0; t < spec.num_frames; ++t) {
    buf[0] = spec.at(t, 0);
    buf[n / 2] = spec.at(t, n / 2);
    for (int b = 1; b < n / 2; ++b) {
      buf[b] = spec.at(t, b);
      buf[n - b] = std::conj(spec.at(t, b));
    }
    fft_inplace(buf, true);
    const std::int64_t start = static_cast<std::int64_t>(t) * hop;
    for (int i = 0; i < n; ++i) {
      acc[start + i] += buf[i].real() * window[i];
      wsum[start + i] += window[i] * window[i];
    }
  }

  std::vector<double> out(static_cast<std::size_t>(out_len), 0.0);
  for (std::int64_t k = 0; k < out_len; ++k) {
    const std::int64_t p = k + pad;
    if (p < acc_len && wsum[p] > 1e-12) out[k] = acc[p] / wsum[p];
  }
  return out;
}

Eigen::MatrixXd magnitude_channel(const Spectrogram& spec, int m) {
  if (m < 0 || m >= spec.num_channels) throw ValidationError("channel index out of range");
  Eigen::MatrixXd out(spec.num_frames, spec.num_bins);
  for (int t = 0; t < spec.num_frames; ++t)
    for (int b = 0; b < spec.num_bins; ++b) out(t, b) = std::abs(spec.at(t, b, m));
  return out;
}

std::vector<Eigen::MatrixXd> magnitude(const Spectrogram& spec) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(spec.num_channels);
  for (int m = 0; m < spec.num_channels; ++m) out.push_back(magnitude_channel(spec, m));
  return out;
}

Eigen::MatrixXd power_channel(const Spectrogram& spec, int m) {
  if (m < 0 || m >= spec.num_channels) throw ValidationError("channel index out of range");
  Eigen::MatrixXd out(spec.num_frames, spec.num_bins);
  for (int t = 0; t < spec.num_frames; ++t)
    for (int b = 0; b < spec.num_bins; ++b) out(t, b) = std::norm(spec.at(t, b, m));
  return out;
}

}  // namespace maskbeam
