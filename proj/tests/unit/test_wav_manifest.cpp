#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "maskbeam/manifest.hpp"
#include "maskbeam/rng.hpp"
#include "maskbeam/wav.hpp"

using namespace maskbeam;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "maskbeam_wav_tests";
  fs::create_directories(dir);
  return dir;
}

AudioClip random_clip(std::uint64_t seed, int channels, int frames, bool f32_grid) {
  Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(channels, frames);
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < frames; ++i) {
      double v = rng.uniform(-0.9, 0.9);
      if (f32_grid) v = static_cast<double>(static_cast<float>(v));
      clip.samples(c, i) = v;
    }
  return clip;
}

}  // namespace

TEST_CASE("float32 WAV round trip is bitwise exact") {
  const auto path = (temp_dir() / "f32.wav").string();
  const AudioClip clip = random_clip(1, 2, 777, true);
  write_wav(path, clip, WavCodec::kFloat32);
  const AudioClip back = read_wav(path);
  CHECK(back.sample_rate == clip.sample_rate);
  REQUIRE(back.channels() == 2);
  REQUIRE(back.length() == 777);
  CHECK((back.samples - clip.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pcm16 round trip is within one quantization step") {
  const auto path = (temp_dir() / "pcm16.wav").string();
  const AudioClip clip = random_clip(2, 1, 500, false);
  const std::int64_t clipped = write_wav(path, clip, WavCodec::kPcm16);
  CHECK(clipped == 0);
  const AudioClip back = read_wav(path);
  CHECK((back.samples - clip.samples).cwiseAbs().maxCoeff() <= 1.0 / 32768.0);
}

TEST_CASE("pcm16 scaling convention: -32768 decodes to -1.0") {
  const auto path = (temp_dir() / "full_scale.wav").string();
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(1, 2);
  clip.samples(0, 0) = -1.0;
  clip.samples(0, 1) = 1.0;
  write_wav(path, clip, WavCodec::kPcm16);
  const AudioClip back = read_wav(path);
  CHECK(back.samples(0, 0) == -1.0);  // -32768 / 32768
  CHECK(back.samples(0, 1) == doctest::Approx(32767.0 / 32768.0));
}

TEST_CASE("out-of-range pcm16 samples are clamped and counted") {
  const auto path = (temp_dir() / "clamped.wav").string();
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(1, 4);
  clip.samples << 1.5, -2.0, 0.25, 1.0;  // 1.0 is in range, not counted
  const std::int64_t clipped = write_wav(path, clip, WavCodec::kPcm16);
  CHECK(clipped == 2);
  const AudioClip back = read_wav(path);
  CHECK(back.samples(0, 0) == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples(0, 1) == -1.0);
}

TEST_CASE("interleaving layout: independently computed index") {
  // 6-channel, 3-frame file; frame 2 / channel 4 sits at interleaved
  // position 2*6+4
  const auto path = (temp_dir() / "interleave.wav").string();
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(6, 3);
  for (int c = 0; c < 6; ++c)
    for (int i = 0; i < 3; ++i) clip.samples(c, i) = static_cast<double>(i * 6 + c) / 32768.0;
  write_wav(path, clip, WavCodec::kPcm16);

  const AudioClip back = read_wav(path);
  CHECK(back.samples(4, 2) == doctest::Approx((2 * 6 + 4) / 32768.0));

  // raw bytes: data chunk starts at byte 44 in our fixed-layout writer
  std::ifstream raw(path, std::ios::binary);
  raw.seekg(44 + (2 * 6 + 4) * 2);
  unsigned char lo = 0, hi = 0;
  raw.read(reinterpret_cast<char*>(&lo), 1);
  raw.read(reinterpret_cast<char*>(&hi), 1);
  CHECK((static_cast<int>(hi) << 8 | lo) == 2 * 6 + 4);
}

TEST_CASE("read_wav rejects garbage and truncation") {
  const auto dir = temp_dir();
  {
    std::ofstream f(dir / "not_riff.wav", std::ios::binary);
    f << "this is not a wav file at all";
  }
  CHECK_THROWS_AS(read_wav((dir / "not_riff.wav").string()), ValidationError);

  // valid file, then cut the data chunk short
  const auto good = (dir / "good.wav").string();
  write_wav(good, random_clip(3, 1, 100, true), WavCodec::kFloat32);
  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  {
    std::ofstream f(dir / "truncated.wav", std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(read_wav((dir / "truncated.wav").string()), ValidationError);
  CHECK_THROWS_AS(read_wav((dir / "missing.wav").string()), IoError);
}

TEST_CASE("manifest round trip and validation") {
  const auto dir = temp_dir();
  const auto path = (dir / "manifest.jsonl").string();

  std::vector<ManifestEntry> entries;
  ManifestEntry simu;
  simu.id = "train_simu_000";
  simu.kind = EntryKind::kSimu;
  simu.split = Split::kTrain;
  simu.mix_path = "audio/a_mix.wav";
  simu.clean_path = "audio/a_clean.wav";
  simu.noise_path = "audio/a_noise.wav";
  entries.push_back(simu);
  ManifestEntry real;
  real.id = "train_real_000";
  real.kind = EntryKind::kReal;
  real.split = Split::kTrain;
  real.mix_path = "audio/b_mix.wav";
  entries.push_back(real);
  write_manifest(path, entries);

  const auto back = load_manifest(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].kind == EntryKind::kSimu);
  CHECK(back[0].id == "train_simu_000");
  // relative paths resolve against the manifest directory
  CHECK(back[0].mix_path == (dir / "audio/a_mix.wav").lexically_normal().string());
  CHECK(back[1].kind == EntryKind::kReal);
  CHECK(!back[1].clean_path.has_value());
}

TEST_CASE("real entries must not carry clean paths") {
  const auto path = (temp_dir() / "bad_real.jsonl").string();
  {
    std::ofstream f(path);
    f << R"({"id":"x","kind":"real","split":"dev","mix_path":"m.wav","clean_path":"c.wav"})"
      << "\n";
  }
  try {
    load_manifest(path);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("clean_path") != std::string::npos);
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
}

TEST_CASE("malformed line is reported with its line number") {
  const auto path = (temp_dir() / "bad_line.jsonl").string();
  {
    std::ofstream f(path);
    for (int i = 0; i < 100; ++i) {
      if (i == 56) {
        f << "{broken json\n";
      } else {
        f << R"({"id":"u)" << i
          << R"(","kind":"simu","split":"train","mix_path":"m.wav","clean_path":"c.wav","noise_path":"n.wav"})"
          << "\n";
      }
    }
  }
  try {
    load_manifest(path);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":57") != std::string::npos);  // 1-based line 57
  }
}

TEST_CASE("simu entries require parallel paths") {
  const auto path = (temp_dir() / "bad_simu.jsonl").string();
  {
    std::ofstream f(path);
    f << R"({"id":"x","kind":"simu","split":"dev","mix_path":"m.wav"})" << "\n";
  }
  CHECK_THROWS_AS(load_manifest(path), ValidationError);
}
