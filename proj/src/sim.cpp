#include "maskbeam/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "maskbeam/fft.hpp"
#include "maskbeam/rng.hpp"

namespace maskbeam {

using nlohmann::json;

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kPink: return "pink";
    default: return "babble";
  }
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "white") return NoiseKind::kWhite;
  if (s == "pink") return NoiseKind::kPink;
  if (s == "babble") return NoiseKind::kBabble;
  throw ValidationError("unknown noise kind '" + s + "' (expected white|pink|babble)");
}

void SimConfig::validate() const {
  if (num_channels < 1) throw ValidationError("num_channels must be >= 1");
  if (sample_rate != 16000) throw ValidationError("only 16 kHz corpora are supported");
  if (utterance_seconds <= 0) throw ValidationError("utterance_seconds must be positive");
  if (snr_hi_db < snr_lo_db) throw ValidationError("snr range is inverted");
  if (diffuse_mix < 0.0 || diffuse_mix > 1.0)
    throw ValidationError("diffuse_mix must be in [0, 1]");
  if (ref_channel < 0 || ref_channel >= num_channels)
    throw ValidationError("ref_channel out of range");
  if (!delays.empty()) {
    if (static_cast<int>(delays.size()) != num_channels ||
        static_cast<int>(gains.size()) != num_channels)
      throw ValidationError("delays/gains must have one entry per channel");
    for (double d : delays)
      if (std::abs(d) > max_delay_samples)
        throw ValidationError("channel delay exceeds max_delay_samples");
    if (delays[ref_channel] != 0.0 || gains[ref_channel] != 1.0)
      throw ValidationError("reference channel must have delay 0 and gain 1");
  }
  for (const auto& [split, n] : counts)
    if (n < 0) throw ValidationError("negative count for split " + split);
  for (const auto& [split, n] : real_counts)
    if (n < 0) throw ValidationError("negative real count for split " + split);
}

void SimConfig::apply_default_geometry() {
  if (!delays.empty()) return;
  delays.resize(num_channels);
  gains.assign(num_channels, 1.0);
  for (int m = 0; m < num_channels; ++m) delays[m] = 1.3 * (m - ref_channel);
}

SimConfig sim_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sim config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw ValidationError("malformed sim config " + path + ": " + ex.what());
  }
  return sim_config_from_json(j);
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig cfg;
  cfg.num_channels = j.value("num_channels", cfg.num_channels);
  cfg.sample_rate = j.value("sample_rate", cfg.sample_rate);
  cfg.utterance_seconds = j.value("utterance_seconds", cfg.utterance_seconds);
  if (j.contains("snr_range_db")) {
    cfg.snr_lo_db = j["snr_range_db"].at(0).get<double>();
    cfg.snr_hi_db = j["snr_range_db"].at(1).get<double>();
  }
  if (j.contains("delays")) cfg.delays = j["delays"].get<std::vector<double>>();
  if (j.contains("gains")) cfg.gains = j["gains"].get<std::vector<double>>();
  if (j.contains("noise_kind"))
    cfg.noise_kind = noise_kind_from_string(j["noise_kind"].get<std::string>());
  cfg.diffuse_mix = j.value("diffuse_mix", cfg.diffuse_mix);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("counts")) cfg.counts = j["counts"].get<std::map<std::string, int>>();
  if (j.contains("real_counts"))
    cfg.real_counts = j["real_counts"].get<std::map<std::string, int>>();
  cfg.ref_channel = j.value("ref_channel", cfg.ref_channel);
  cfg.max_delay_samples = j.value("max_delay_samples", cfg.max_delay_samples);
  cfg.apply_default_geometry();
  cfg.validate();
  return cfg;
}

json sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["num_channels"] = cfg.num_channels;
  j["sample_rate"] = cfg.sample_rate;
  j["utterance_seconds"] = cfg.utterance_seconds;
  j["snr_range_db"] = {cfg.snr_lo_db, cfg.snr_hi_db};
  if (!cfg.delays.empty()) {
    j["delays"] = cfg.delays;
    j["gains"] = cfg.gains;
  }
  j["noise_kind"] = to_string(cfg.noise_kind);
  j["diffuse_mix"] = cfg.diffuse_mix;
  j["seed"] = cfg.seed;
  j["counts"] = cfg.counts;
  j["real_counts"] = cfg.real_counts;
  j["ref_channel"] = cfg.ref_channel;
  j["max_delay_samples"] = cfg.max_delay_samples;
  return j;
}

std::vector<double> synth_speech_like(std::uint64_t seed, std::int64_t length,
                                      int sample_rate) {
  if (length <= 0) throw ValidationError("synth_speech_like: length must be positive");
  Rng rng(seed);
  const double fs = sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;

  // pitch wanders inside [80, 300] Hz on a slow sinusoid
  const double pitch_rate = rng.uniform(0.15, 0.6);
  const double pitch_phase = rng.uniform(0.0, two_pi);
  // syllabic-rate amplitude modulation
  const double am_rate = rng.uniform(2.0, 8.0);
  const double am_phase = rng.uniform(0.0, two_pi);

  constexpr int kHarmonics = 12;
  double harmonic_phase[kHarmonics];
  for (int k = 0; k < kHarmonics; ++k) harmonic_phase[k] = rng.uniform(0.0, two_pi);

  std::vector<double> out(static_cast<std::size_t>(length));
  double phase = 0.0;  // integrated fundamental phase
  double peak = 0.0;
  for (std::int64_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double u = 0.5 + 0.45 * std::sin(two_pi * pitch_rate * t + pitch_phase);
    const double f0 = 80.0 * std::pow(300.0 / 80.0, u);
    phase += two_pi * f0 / fs;

    double s = 0.0;
    for (int k = 0; k < kHarmonics; ++k) {
      const double fk = f0 * (k + 1);
      if (fk >= 0.45 * fs) break;
      s += std::sin((k + 1) * phase + harmonic_phase[k]) / (k + 1);
    }
    const double env = 0.2 + 0.8 * (0.5 - 0.5 * std::cos(two_pi * am_rate * t + am_phase));
    out[static_cast<std::size_t>(i)] = env * s;
    peak = std::max(peak, std::abs(out[static_cast<std::size_t>(i)]));
  }
  if (peak > 0.0) {
    const double scale = 0.5 / peak;
    for (auto& v : out) v *= scale;
  }
  return out;
}

namespace {

void normalize_rms(std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  if (e <= 0.0) return;
  const double scale = std::sqrt(static_cast<double>(x.size()) / e);
  for (auto& v : x) v *= scale;
}

std::vector<double> white_noise(Rng& rng, std::int64_t length) {
  std::vector<double> out(static_cast<std::size_t>(length));
  for (auto& v : out) v = rng.normal();
  return out;
}

// -3 dB/octave spectral shaping of white noise.
std::vector<double> pink_noise(Rng& rng, std::int64_t length) {
  std::size_t n = 1;
  while (n < static_cast<std::size_t>(length)) n <<= 1;
  std::vector<std::complex<double>> spec(n);
  for (auto& v : spec) v = rng.normal();
  fft_inplace(spec, false);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t f = std::min(k, n - k);
    spec[k] /= std::sqrt(static_cast<double>(f));
  }
  fft_inplace(spec, true);
  std::vector<double> out(static_cast<std::size_t>(length));
  for (std::int64_t i = 0; i < length; ++i) out[static_cast<std::size_t>(i)] = spec[static_cast<std::size_t>(i)].real();
  return out;
}

std::vector<double> babble_noise(Rng& rng, std::int64_t length, int sample_rate) {
  constexpr int kTalkers = 6;
  std::vector<double> out(static_cast<std::size_t>(length), 0.0);
  for (int k = 0; k < kTalkers; ++k) {
    auto talker = synth_speech_like(rng.next_u64(), length, sample_rate);
    const std::int64_t shift = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(length)));
    for (std::int64_t i = 0; i < length; ++i)
      out[static_cast<std::size_t>(i)] += talker[static_cast<std::size_t>((i + shift) % length)];
  }
  return out;
}

}  // namespace

std::vector<double> make_noise(NoiseKind kind, std::uint64_t seed, std::int64_t length,
                               int sample_rate) {
  if (length <= 0) throw ValidationError("make_noise: length must be positive");
  Rng rng(seed);
  std::vector<double> out;
  switch (kind) {
    case NoiseKind::kWhite: out = white_noise(rng, length); break;
    case NoiseKind::kPink: out = pink_noise(rng, length); break;
    default: out = babble_noise(rng, length, sample_rate); break;
  }
  normalize_rms(out);
  return out;
}

std::vector<double> fractional_delay(const std::vector<double>& x, double delay) {
  const std::int64_t len = static_cast<std::int64_t>(x.size());
  const double floor_d = std::floor(delay);
  std::int64_t int_d = static_cast<std::int64_t>(floor_d);
  double frac = delay - floor_d;
  if (frac < 1e-12) frac = 0.0;
  if (frac > 1.0 - 1e-12) {
    frac = 0.0;
    ++int_d;
  }

  std::vector<double> out(x.size(), 0.0);
  if (frac == 0.0) {
    for (std::int64_t n = 0; n < len; ++n) {
      const std::int64_t src = n - int_d;
      if (src >= 0 && src < len) out[static_cast<std::size_t>(n)] = x[static_cast<std::size_t>(src)];
    }
    return out;
  }

  constexpr int kHalfTaps = 32;
  double taps[2 * kHalfTaps + 1];
  for (int j = -kHalfTaps; j <= kHalfTaps; ++j) {
    const double u = j - frac;
    const double sinc = std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
    const double taper = 0.5 * (1.0 + std::cos(std::numbers::pi * u / (kHalfTaps + 1)));
    taps[j + kHalfTaps] = sinc * taper;
  }
  for (std::int64_t n = 0; n < len; ++n) {
    double acc = 0.0;
    for (int j = -kHalfTaps; j <= kHalfTaps; ++j) {
      const std::int64_t src = n - int_d - j;
      if (src >= 0 && src < len) acc += x[static_cast<std::size_t>(src)] * taps[j + kHalfTaps];
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

AudioClip spatialize(const std::vector<double>& source, const SimConfig& cfg) {
  SimConfig c = cfg;
  c.apply_default_geometry();
  c.validate();
  AudioClip clip;
  clip.sample_rate = c.sample_rate;
  clip.samples.resize(c.num_channels, static_cast<Eigen::Index>(source.size()));
  for (int m = 0; m < c.num_channels; ++m) {
    auto delayed = (m == c.ref_channel) ? source : fractional_delay(source, c.delays[m]);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(source.size()); ++i)
      clip.samples(m, static_cast<Eigen::Index>(i)) = c.gains[m] * delayed[static_cast<std::size_t>(i)];
  }
  return clip;
}

std::pair<AudioClip, AudioClip> mix_at_snr(const AudioClip& clean, const AudioClip& noise,
                                           double snr_db, int ref_channel) {
  if (clean.channels() != noise.channels() || clean.length() != noise.length())
    throw ValidationError("mix_at_snr: clean/noise shape mismatch");
  if (ref_channel < 0 || ref_channel >= clean.channels())
    throw ValidationError("mix_at_snr: ref_channel out of range");

  const double e_clean = clean.samples.row(ref_channel).squaredNorm();
  const double e_noise = noise.samples.row(ref_channel).squaredNorm();
  if (e_clean <= 0.0) throw ValidationError("mix_at_snr: clean signal is silent");
  if (e_noise <= 0.0) throw ValidationError("mix_at_snr: noise signal is silent");

  const double gain = std::sqrt(e_clean / (e_noise * std::pow(10.0, snr_db / 10.0)));
  AudioClip scaled = noise;
  scaled.samples *= gain;
  AudioClip mix = clean;
  mix.samples += scaled.samples;
  return {std::move(mix), std::move(scaled)};
}

namespace {

struct UtteranceFiles {
  AudioClip mix, clean, noise;
};

// Snap to a 2^-20 grid so that clean, noise and their sum are all exactly
// float32-representable; reloaded simu triples then satisfy
// mix == clean + noise with zero error.
void quantize_for_storage(AudioClip& clip) {
  constexpr double kGrid = 1048576.0;  // 2^20
  for (Eigen::Index i = 0; i < clip.samples.size(); ++i)
    clip.samples.data()[i] = std::round(clip.samples.data()[i] * kGrid) / kGrid;
}

UtteranceFiles generate_utterance(const SimConfig& cfg, const std::string& id) {
  Rng rng(mix_seed(cfg.seed, id));
  const std::int64_t length =
      static_cast<std::int64_t>(std::llround(cfg.utterance_seconds * cfg.sample_rate));

  auto source = synth_speech_like(rng.next_u64(), length, cfg.sample_rate);
  AudioClip clean = spatialize(source, cfg);

  AudioClip noise;
  noise.sample_rate = cfg.sample_rate;
  noise.samples.resize(cfg.num_channels, static_cast<Eigen::Index>(length));
  std::vector<double> common;
  if (cfg.diffuse_mix > 0.0) common = make_noise(cfg.noise_kind, rng.next_u64(), length, cfg.sample_rate);
  for (int m = 0; m < cfg.num_channels; ++m) {
    auto indep = make_noise(cfg.noise_kind, rng.next_u64(), length, cfg.sample_rate);
    const double wi = std::sqrt(1.0 - cfg.diffuse_mix);
    const double wc = std::sqrt(cfg.diffuse_mix);
    for (std::int64_t i = 0; i < length; ++i) {
      double v = wi * indep[static_cast<std::size_t>(i)];
      if (!common.empty()) v += wc * common[static_cast<std::size_t>(i)];
      noise.samples(m, static_cast<Eigen::Index>(i)) = v;
    }
  }

  const double snr = rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
  auto [mix, scaled] = mix_at_snr(clean, noise, snr, cfg.ref_channel);

  quantize_for_storage(clean);
  quantize_for_storage(scaled);
  mix = clean;
  mix.samples += scaled.samples;  // exact on the storage grid
  return {std::move(mix), std::move(clean), std::move(scaled)};
}

}  // namespace

std::string build_corpus(const SimConfig& cfg_in, const std::string& out_dir) {
  SimConfig cfg = cfg_in;
  cfg.apply_default_geometry();
  cfg.validate();

  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  const fs::path audio_dir = root / "audio";
  std::error_code ec;
  fs::create_directories(audio_dir, ec);
  if (ec) throw IoError("cannot create corpus directory: " + audio_dir.string());

  std::vector<ManifestEntry> entries;
  const char* splits[] = {"train", "dev", "test"};
  for (const char* split : splits) {
    auto it = cfg.counts.find(split);
    const int n_simu = it == cfg.counts.end() ? 0 : it->second;
    auto rt = cfg.real_counts.find(split);
    const int n_real = rt == cfg.real_counts.end() ? 0 : rt->second;

    for (int kind_pass = 0; kind_pass < 2; ++kind_pass) {
      const bool simu = kind_pass == 0;
      const int n = simu ? n_simu : n_real;
      for (int i = 0; i < n; ++i) {
        char id_buf[64];
        std::snprintf(id_buf, sizeof(id_buf), "%s_%s_%03d", split, simu ? "simu" : "real", i);
        const std::string id(id_buf);
        auto files = generate_utterance(cfg, id);

        ManifestEntry e;
        e.id = id;
        e.kind = simu ? EntryKind::kSimu : EntryKind::kReal;
        e.split = split_from_string(split);
        e.ref_channel = cfg.ref_channel;
        e.mix_path = "audio/" + id + "_mix.wav";
        write_wav((root / e.mix_path).string(), files.mix, WavCodec::kFloat32);
        if (simu) {
          e.clean_path = "audio/" + id + "_clean.wav";
          e.noise_path = "audio/" + id + "_noise.wav";
          write_wav((root / *e.clean_path).string(), files.clean, WavCodec::kFloat32);
          write_wav((root / *e.noise_path).string(), files.noise, WavCodec::kFloat32);
        }
        entries.push_back(std::move(e));
      }
    }
  }

  const std::string manifest_path = (root / "manifest.jsonl").string();
  write_manifest(manifest_path, entries);
  return manifest_path;
}

}  // namespace maskbeam
