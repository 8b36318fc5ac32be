#include <doctest.h>

#include <cmath>
#include <numbers>

#include "maskbeam/fft.hpp"
#include "maskbeam/rng.hpp"
#include "maskbeam/stft.hpp"

using namespace maskbeam;

namespace {

std::vector<double> random_signal(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

double rel_l2_error(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("fft matches the direct DFT on a small input") {
  Rng rng(3);
  std::vector<std::complex<double>> x(16);
  for (auto& v : x) v = {rng.normal(), rng.normal()};

  const auto fast = fft(x);
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::complex<double> direct = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * n) / x.size();
      direct += x[n] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    CHECK(std::abs(fast[k] - direct) < 1e-10);
  }
}

TEST_CASE("ifft inverts fft") {
  Rng rng(4);
  std::vector<std::complex<double>> x(256);
  for (auto& v : x) v = {rng.normal(), rng.normal()};
  const auto back = ifft(fft(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
}

TEST_CASE("fft rejects non-power-of-two sizes") {
  std::vector<std::complex<double>> x(12);
  CHECK_THROWS_AS(fft_inplace(x), ValidationError);
}

TEST_CASE("stft config validation") {
  StftConfig cfg;
  cfg.fft_size = 1000;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.fft_size = 1024;
  cfg.hop = 300;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.hop = 256;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.num_bins() == 513);
}

TEST_CASE("stft rejects empty input") {
  CHECK_THROWS_AS(stft(std::span<const double>(), StftConfig{}), ValidationError);
}

TEST_CASE("constant input concentrates energy in the DC pair of bins") {
  // A Hann-windowed constant has spectral support exactly on bins {0, 1};
  // everything from bin 2 up is numerically zero.
  StftConfig cfg;
  std::vector<double> ones(4096, 1.0);
  const Spectrogram spec = stft(ones, cfg);

  double dc = 0.0;
  Eigen::VectorXd mean_mag = Eigen::VectorXd::Zero(spec.num_bins);
  for (int t = 0; t < spec.num_frames; ++t)
    for (int b = 0; b < spec.num_bins; ++b) mean_mag(b) += std::abs(spec.at(t, b));
  mean_mag /= spec.num_frames;
  dc = mean_mag(0);
  CHECK(dc > 1.0);
  for (int b = 2; b < spec.num_bins; ++b) CHECK(mean_mag(b) < 1e-10 * dc);
}

TEST_CASE("pure sinusoid at a bin center peaks at that bin") {
  StftConfig cfg;
  const int k = 50;
  const double freq = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / cfg.sample_rate);

  const Spectrogram spec = stft(x, cfg);
  Eigen::VectorXd mean_mag = Eigen::VectorXd::Zero(spec.num_bins);
  for (int t = 0; t < spec.num_frames; ++t)
    for (int b = 0; b < spec.num_bins; ++b) mean_mag(b) += std::abs(spec.at(t, b));
  int argmax = 0;
  mean_mag.maxCoeff(&argmax);
  CHECK(argmax == k);
}

TEST_CASE("windowed Parseval identity on white noise") {
  StftConfig cfg;
  const auto x = random_signal(9, 8000);
  const Spectrogram spec = stft(x, cfg);
  const auto window = hann_window(cfg.fft_size);

  // reproduce the analysis framing to get the windowed time-domain energy
  const int pad = cfg.fft_size / 2;
  auto sample_at = [&](std::int64_t i) -> double {
    const std::int64_t len = static_cast<std::int64_t>(x.size());
    const std::int64_t period = 2 * (len - 1);
    std::int64_t j = i % period;
    if (j < 0) j += period;
    return x[static_cast<std::size_t>(j < len ? j : period - j)];
  };

  for (int t = 0; t < spec.num_frames; t += 7) {
    double time_energy = 0.0;
    for (int i = 0; i < cfg.fft_size; ++i) {
      const double v =
          sample_at(static_cast<std::int64_t>(t) * cfg.hop - pad + i) * window[i];
      time_energy += v * v;
    }
    // one-sided spectrum: interior bins count twice
    double spec_energy = std::norm(spec.at(t, 0)) + std::norm(spec.at(t, spec.num_bins - 1));
    for (int b = 1; b < spec.num_bins - 1; ++b) spec_energy += 2.0 * std::norm(spec.at(t, b));
    spec_energy /= cfg.fft_size;
    CHECK(std::abs(spec_energy / time_energy - 1.0) < 1e-6);
  }
}

TEST_CASE("istft reconstructs the input") {
  StftConfig cfg;
  const auto x = random_signal(10, 16000);
  const auto back = istft(stft(x, cfg));
  REQUIRE(back.size() == x.size());
  CHECK(rel_l2_error(x, back) < 1e-6);
}

TEST_CASE("istft round trip preserves length") {
  StftConfig cfg;
  for (std::size_t len : {std::size_t{400}, std::size_t{1024}, std::size_t{16001}}) {
    // oracle: T = floor(len/hop) + 1 frames and exactly len output samples
    const auto x = random_signal(20 + len, len);
    const Spectrogram spec = stft(x, cfg);
    CHECK(spec.num_frames == static_cast<int>(len / cfg.hop) + 1);
    const auto back = istft(spec);
    CHECK(back.size() == len);
    if (len > static_cast<std::size_t>(cfg.fft_size)) CHECK(rel_l2_error(x, back) < 1e-6);
  }
}

TEST_CASE("all-zero spectrogram synthesizes silence") {
  StftConfig cfg;
  Spectrogram spec;
  spec.config = cfg;
  spec.num_frames = 10;
  spec.num_bins = cfg.num_bins();
  spec.num_channels = 1;
  spec.num_samples = 2000;
  spec.data.assign(static_cast<std::size_t>(spec.num_frames) * spec.num_bins, {});
  const auto out = istft(spec);
  REQUIRE(out.size() == 2000);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("istft rejects multichannel input") {
  StftConfig cfg;
  Eigen::MatrixXd two = Eigen::MatrixXd::Random(2, 4000);
  const Spectrogram spec = stft(two, cfg);
  CHECK(spec.num_channels == 2);
  CHECK_THROWS_AS(istft(spec), ValidationError);
}

TEST_CASE("stft is linear") {
  StftConfig cfg;
  const auto x = random_signal(30, 6000);
  const auto y = random_signal(31, 6000);
  const double a = 0.7, b = -1.3;

  std::vector<double> combo(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = a * x[i] + b * y[i];

  const Spectrogram sx = stft(x, cfg), sy = stft(y, cfg), sc = stft(combo, cfg);
  for (int t = 0; t < sc.num_frames; t += 5)
    for (int bb = 0; bb < sc.num_bins; bb += 17)
      CHECK(std::abs(sc.at(t, bb) - (a * sx.at(t, bb) + b * sy.at(t, bb))) < 1e-9);
}

TEST_CASE("magnitude and power planes") {
  StftConfig cfg;
  cfg.fft_size = 64;
  cfg.hop = 16;
  Spectrogram spec;
  spec.config = cfg;
  spec.num_frames = 2;
  spec.num_bins = cfg.num_bins();
  spec.num_channels = 1;
  spec.data.assign(static_cast<std::size_t>(2) * spec.num_bins, {});
  spec.at(0, 0) = {3.0, 4.0};
  spec.at(1, 5) = {0.0, 0.0};
  spec.at(1, 6) = {-1.0, 1.0};

  const auto mag = magnitude_channel(spec, 0);
  CHECK(mag(0, 0) == doctest::Approx(5.0));
  CHECK(mag(1, 5) == 0.0);

  // power equals magnitude^2 bin by bin
  const auto pow = power_channel(spec, 0);
  for (int t = 0; t < 2; ++t)
    for (int b = 0; b < spec.num_bins; ++b)
      CHECK(std::abs(pow(t, b) - mag(t, b) * mag(t, b)) < 1e-9);
}
