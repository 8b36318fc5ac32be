#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "maskbeam/fft.hpp"
#include "maskbeam/metrics.hpp"
#include "maskbeam/sim.hpp"

using namespace maskbeam;
namespace fs = std::filesystem;

namespace {

double xcorr_peak_normalized(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t n = 1;
  while (n < 2 * a.size()) n <<= 1;
  std::vector<std::complex<double>> fa(n), fb(n);
  for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
  fft_inplace(fa, false);
  fft_inplace(fb, false);
  for (std::size_t i = 0; i < n; ++i) fa[i] *= std::conj(fb[i]);
  fft_inplace(fa, true);

  double na = 0.0, nb = 0.0;
  for (double v : a) na += v * v;
  for (double v : b) nb += v * v;
  double peak = 0.0;
  for (const auto& v : fa) peak = std::max(peak, std::abs(v));
  return peak / std::sqrt(na * nb);
}

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("speech-like synthesis is deterministic and peak-normalized") {
  const auto a = synth_speech_like(42, 16000);
  const auto b = synth_speech_like(42, 16000);
  CHECK(a == b);

  double peak = 0.0;
  for (double v : a) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("different seeds give decorrelated sources") {
  const auto a = synth_speech_like(1, 16000);
  const auto b = synth_speech_like(2, 16000);
  CHECK(xcorr_peak_normalized(a, b) < 0.9);
}

TEST_CASE("noise generators are deterministic, unit RMS, distinct") {
  for (NoiseKind kind : {NoiseKind::kWhite, NoiseKind::kPink, NoiseKind::kBabble}) {
    const auto a = make_noise(kind, 5, 8000);
    const auto b = make_noise(kind, 5, 8000);
    CHECK(a == b);
    CHECK(energy(a) / 8000.0 == doctest::Approx(1.0).epsilon(1e-9));
  }
  // pink noise has more low-frequency weight than white
  const auto white = make_noise(NoiseKind::kWhite, 6, 16384);
  const auto pink = make_noise(NoiseKind::kPink, 6, 16384);
  auto low_fraction = [](const std::vector<double>& x) {
    std::vector<std::complex<double>> f(x.begin(), x.end());
    fft_inplace(f, false);
    double low = 0.0, total = 0.0;
    for (std::size_t k = 1; k < f.size() / 2; ++k) {
      const double p = std::norm(f[k]);
      total += p;
      if (k < f.size() / 16) low += p;
    }
    return low / total;
  };
  CHECK(low_fraction(pink) > 2.0 * low_fraction(white));
}

TEST_CASE("spatialize: zero delays and unit gains copy the source") {
  SimConfig cfg;
  cfg.num_channels = 3;
  cfg.delays = {0.0, 0.0, 0.0};
  cfg.gains = {1.0, 1.0, 1.0};
  const auto src = synth_speech_like(7, 4000);
  const AudioClip clip = spatialize(src, cfg);
  REQUIRE(clip.channels() == 3);
  for (int m = 0; m < 3; ++m)
    for (int i = 0; i < 4000; ++i)
      CHECK(clip.samples(m, i) == src[static_cast<std::size_t>(i)]);
}

TEST_CASE("integer delays shift exactly") {
  SimConfig cfg;
  cfg.num_channels = 2;
  cfg.delays = {0.0, 7.0};
  cfg.gains = {1.0, 0.5};
  const auto src = synth_speech_like(8, 2000);
  const AudioClip clip = spatialize(src, cfg);
  for (int i = 7; i < 2000; ++i)
    CHECK(clip.samples(1, i) == 0.5 * src[static_cast<std::size_t>(i - 7)]);
}

TEST_CASE("fractional delay of 0.5 samples lands between neighbors") {
  const auto src = synth_speech_like(9, 4000);
  const auto delayed = fractional_delay(src, 0.5);

  // sub-sample lag via parabolic interpolation of the cross-correlation peak
  auto xc = [&](int lag) {
    double acc = 0.0;
    for (int i = 200; i < 3800; ++i) acc += delayed[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(i - lag)];
    return acc;
  };
  const double c0 = xc(0), c1 = xc(1), cm1 = xc(-1);
  const double frac = 0.5 * (cm1 - c1) / (cm1 - 2.0 * c0 + c1);
  // peak sits at lag 0 + frac
  CHECK(std::abs(frac - 0.5) < 0.05);
}

TEST_CASE("delay bound is enforced") {
  SimConfig cfg;
  cfg.num_channels = 2;
  cfg.delays = {0.0, 500.0};
  cfg.gains = {1.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("mix_at_snr hits the requested ratio and is additive") {
  SimConfig cfg;
  cfg.num_channels = 2;
  cfg.delays = {0.0, 1.0};
  cfg.gains = {1.0, 1.0};
  const auto src = synth_speech_like(10, 8000);
  const AudioClip clean = spatialize(src, cfg);
  AudioClip noise;
  noise.sample_rate = 16000;
  noise.samples.resize(2, 8000);
  for (int m = 0; m < 2; ++m) {
    const auto n = make_noise(NoiseKind::kWhite, 20 + static_cast<std::uint64_t>(m), 8000);
    for (int i = 0; i < 8000; ++i) noise.samples(m, i) = n[static_cast<std::size_t>(i)];
  }

  SUBCASE("0 dB equalizes energies") {
    auto [mix, scaled] = mix_at_snr(clean, noise, 0.0, 0);
    const double ec = clean.samples.row(0).squaredNorm();
    const double en = scaled.samples.row(0).squaredNorm();
    CHECK(std::abs(ec / en - 1.0) < 1e-9);
  }
  SUBCASE("10 dB gives a 10x energy ratio") {
    auto [mix, scaled] = mix_at_snr(clean, noise, 10.0, 0);
    const double ec = clean.samples.row(0).squaredNorm();
    const double en = scaled.samples.row(0).squaredNorm();
    CHECK(ec / en == doctest::Approx(10.0).epsilon(1e-6));
  }
  SUBCASE("mix minus scaled noise returns the clean signal") {
    auto [mix, scaled] = mix_at_snr(clean, noise, 3.0, 0);
    const Eigen::MatrixXd diff = mix.samples - scaled.samples - clean.samples;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("silent inputs are rejected") {
    AudioClip silent = clean;
    silent.samples.setZero();
    CHECK_THROWS_AS(mix_at_snr(silent, noise, 0.0, 0), ValidationError);
    CHECK_THROWS_AS(mix_at_snr(clean, silent, 0.0, 0), ValidationError);
  }
}

TEST_CASE("build_corpus writes a consistent, deterministic corpus") {
  SimConfig cfg;
  cfg.num_channels = 3;
  cfg.utterance_seconds = 0.3;
  cfg.counts = {{"train", 3}, {"dev", 1}, {"test", 1}};
  cfg.real_counts = {{"train", 2}, {"dev", 0}, {"test", 0}};
  cfg.seed = 5;
  cfg.apply_default_geometry();

  const auto dir = fs::temp_directory_path() / "maskbeam_corpus_test";
  fs::remove_all(dir);
  const std::string manifest = build_corpus(cfg, (dir / "a").string());
  const auto entries = load_manifest(manifest);
  CHECK(entries.size() == 7);  // 5 simu + 2 real

  int real_count = 0;
  for (const auto& e : entries) {
    if (e.kind == EntryKind::kReal) {
      ++real_count;
      CHECK(!e.clean_path.has_value());
      continue;
    }
    // simu: mix == clean + noise exactly after reload
    const AudioClip mix = read_wav(e.mix_path);
    const AudioClip clean = read_wav(*e.clean_path);
    const AudioClip noise = read_wav(*e.noise_path);
    CHECK((mix.samples - clean.samples - noise.samples).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK(real_count == 2);

  // same seed, different directory: byte-identical corpus
  const std::string manifest_b = build_corpus(cfg, (dir / "b").string());
  for (const auto& e : load_manifest(manifest_b)) {
    const auto rel = fs::relative(e.mix_path, dir / "b");
    CHECK(slurp(e.mix_path) == slurp((dir / "a" / rel).string()));
  }
  fs::remove_all(dir);
}

TEST_CASE("delay-and-sum on the default array raises SI-SDR by at least 3 dB") {
  // sanity check of the array model itself: averaging delay-compensated
  // channels averages independent noise down
  SimConfig cfg;
  cfg.num_channels = 6;
  cfg.utterance_seconds = 1.0;
  cfg.apply_default_geometry();

  Rng rng(31);
  const std::int64_t len = 16000;
  const auto src = synth_speech_like(rng.next_u64(), len);
  const AudioClip clean = spatialize(src, cfg);
  AudioClip noise;
  noise.sample_rate = 16000;
  noise.samples.resize(6, len);
  for (int m = 0; m < 6; ++m) {
    const auto n = make_noise(NoiseKind::kWhite, rng.next_u64(), len);
    for (std::int64_t i = 0; i < len; ++i) noise.samples(m, i) = n[static_cast<std::size_t>(i)];
  }
  auto [mix, scaled] = mix_at_snr(clean, noise, 0.0, cfg.ref_channel);

  // compensate each channel's known delay, then average
  std::vector<double> sum(static_cast<std::size_t>(len), 0.0);
  for (int m = 0; m < 6; ++m) {
    std::vector<double> ch(static_cast<std::size_t>(len));
    for (std::int64_t i = 0; i < len; ++i) ch[static_cast<std::size_t>(i)] = mix.samples(m, i);
    const auto aligned = fractional_delay(ch, -cfg.delays[m]);
    for (std::int64_t i = 0; i < len; ++i) sum[static_cast<std::size_t>(i)] += aligned[static_cast<std::size_t>(i)] / 6.0;
  }

  Eigen::VectorXd ref = clean.samples.row(cfg.ref_channel);
  Eigen::VectorXd noisy = mix.samples.row(cfg.ref_channel);
  const auto ref_span = std::span<const double>(ref.data(), static_cast<std::size_t>(ref.size()));
  const double before = si_sdr(ref_span, std::span<const double>(noisy.data(), static_cast<std::size_t>(noisy.size())));
  const double after = si_sdr(ref_span, std::span<const double>(sum.data(), sum.size()));
  CHECK(after - before >= 3.0);
}
