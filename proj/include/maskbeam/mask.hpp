#ifndef MASKBEAM_MASK_HPP
#define MASKBEAM_MASK_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "maskbeam/stft.hpp"

namespace maskbeam {

enum class MaskKind { kSpeech, kNoise };
enum class MaskHardness { kBinary, kSoft };

std::string to_string(MaskKind k);
std::string to_string(MaskHardness h);
MaskKind mask_kind_from_string(const std::string& s);
MaskHardness mask_hardness_from_string(const std::string& s);

// T x B plane of per-bin gains in [0, 1].
struct MaskPlane {
  Eigen::MatrixXd values;
  MaskKind kind = MaskKind::kSpeech;
  MaskHardness hardness = MaskHardness::kSoft;

  int num_frames() const { return static_cast<int>(values.rows()); }
  int num_bins() const { return static_cast<int>(values.cols()); }
};

enum class MaskDomain { kPower, kMagnitude };

// Thresholds are linear ratios in the chosen domain; 1.0 means 0 dB.
struct IbmConfig {
  double speech_threshold = 1.0;
  double noise_threshold = 1.0;
  MaskDomain domain = MaskDomain::kPower;
  void validate() const;
};

// Binary targets from parallel clean/noise spectrograms:
//   speech(t,b) = 1  iff  |x|/|n| > speech_threshold   (in cfg.domain)
//   noise(t,b)  = 1  iff  |n|/|x| > noise_threshold
// Zero denominators: the nonzero side wins; all-silent bins get 0 in both.
// The noise mask is computed independently, not as the speech complement.
std::pair<MaskPlane, MaskPlane> ideal_binary_masks(const Spectrogram& clean,
                                                   const Spectrogram& noise,
                                                   const IbmConfig& cfg);

// Elementwise complex gain; the noisy phase is preserved by construction.
Spectrogram apply_mask(const MaskPlane& mask, const Spectrogram& spec);

// Elementwise median across channels; even counts average the two middle
// order statistics.
MaskPlane median_fuse(const std::vector<MaskPlane>& masks);

// Binary tensor file: magic, little-endian uint32 header length, JSON header
// {shape, kind, hardness}, then float32 little-endian values frame-major.
void save_mask(const std::string& path, const MaskPlane& mask);
MaskPlane load_mask(const std::string& path);

}  // namespace maskbeam

#endif  // MASKBEAM_MASK_HPP
