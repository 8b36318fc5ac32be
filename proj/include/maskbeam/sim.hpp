#ifndef MASKBEAM_SIM_HPP
#define MASKBEAM_SIM_HPP

#include <cstdint>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "maskbeam/manifest.hpp"
#include "maskbeam/wav.hpp"

namespace maskbeam {

enum class NoiseKind { kWhite, kPink, kBabble };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

// Anechoic delay-and-attenuate array model over synthetic sources. Per-channel
// noise is drawn independently (spatially white); diffuse_mix blends in a
// component common to all channels.
struct SimConfig {
  int num_channels = 6;
  int sample_rate = 16000;
  double utterance_seconds = 1.0;
  double snr_lo_db = 0.0;
  double snr_hi_db = 0.0;
  std::vector<double> delays;  // per-channel, samples, fractional allowed
  std::vector<double> gains;   // per-channel linear gain
  NoiseKind noise_kind = NoiseKind::kWhite;
  double diffuse_mix = 0.0;  // power fraction of common noise, [0, 1]
  std::uint64_t seed = 17;
  std::map<std::string, int> counts = {{"train", 20}, {"dev", 5}, {"test", 5}};
  std::map<std::string, int> real_counts = {{"train", 0}, {"dev", 0}, {"test", 0}};
  int ref_channel = 0;
  double max_delay_samples = 256.0;  // keeps masks aligned across channels

  void validate() const;
  // Fills delays/gains with the default geometry (1.3-sample spacing, unit
  // gains) when they are empty.
  void apply_default_geometry();
};

SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& cfg);
SimConfig sim_config_from_json_file(const std::string& path);

// Harmonic source with wandering pitch (80-300 Hz), syllabic-rate amplitude
// modulation (2-8 Hz) and a peak amplitude of exactly 0.5. Deterministic in
// the seed.
std::vector<double> synth_speech_like(std::uint64_t seed, std::int64_t length,
                                      int sample_rate = 16000);

// Unit-RMS noise of the given kind, deterministic in the seed.
std::vector<double> make_noise(NoiseKind kind, std::uint64_t seed, std::int64_t length,
                               int sample_rate = 16000);

// Windowed-sinc fractional delay (32 taps per side); integer delays reduce to
// an exact shift. Samples shifted in from outside the signal are zero.
std::vector<double> fractional_delay(const std::vector<double>& x, double delay);

// Channel m = gains[m] * delay(source, delays[m]). The reference channel must
// have delay 0 and gain 1.
AudioClip spatialize(const std::vector<double>& source, const SimConfig& cfg);

// Scales noise so that 10*log10(E_clean / E_noise) = snr_db on the reference
// channel, then mixes sample-exactly: mix = clean + scaled_noise.
std::pair<AudioClip, AudioClip> mix_at_snr(const AudioClip& clean, const AudioClip& noise,
                                           double snr_db, int ref_channel = 0);

// Writes WAVs plus a JSON-lines manifest under out_dir and returns the
// manifest path. Fully deterministic in cfg.seed: every utterance derives its
// own stream from (seed, id), so generation order never matters.
std::string build_corpus(const SimConfig& cfg, const std::string& out_dir);

}  // namespace maskbeam

#endif  // MASKBEAM_SIM_HPP
