#ifndef MASKBEAM_WAV_HPP
#define MASKBEAM_WAV_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "maskbeam/common.hpp"

namespace maskbeam {

// Deinterleaved audio, channels x length, values nominally in [-1, 1].
struct AudioClip {
  Eigen::MatrixXd samples;
  int sample_rate = 16000;

  int channels() const { return static_cast<int>(samples.rows()); }
  std::int64_t length() const { return static_cast<std::int64_t>(samples.cols()); }
};

enum class WavCodec { kPcm16, kFloat32 };

// RIFF/WAVE little-endian, formats 1 (PCM16, scaled by 1/32768) and
// 3 (IEEE float32, passed through).
AudioClip read_wav(const std::string& path);

// Returns the number of samples clamped into [-1, 1] (pcm16 only).
std::int64_t write_wav(const std::string& path, const AudioClip& clip,
                       WavCodec codec = WavCodec::kFloat32);

}  // namespace maskbeam

#endif  // MASKBEAM_WAV_HPP
