#ifndef MASKBEAM_METRICS_HPP
#define MASKBEAM_METRICS_HPP

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskbeam/manifest.hpp"

namespace maskbeam {

// Frozen analysis constants for the intelligibility measures. The cited
// method's arithmetic (512 FFT, 15 one-third-octave bands from 150 Hz,
// 30-frame segments, -15 dB clip, 40 dB silence range) is kept at the
// library-wide 16 kHz rate without resampling, so frames are 32 ms here
// rather than the original 25.6 ms at 10 kHz.
namespace stoi_constants {
constexpr int kFrameLen = 512;
constexpr int kHop = 256;
constexpr int kFftSize = 512;
constexpr int kNumBands = 15;
constexpr double kBandStartHz = 150.0;
constexpr int kSegmentFrames = 30;
constexpr double kClipDb = -15.0;
constexpr double kSilenceRangeDb = 40.0;
constexpr int kSampleRate = 16000;
// shortest scorable input: one full segment of frames
constexpr int kMinSamples = kFrameLen + (kSegmentFrames - 1) * kHop;
}  // namespace stoi_constants

// One-third-octave band envelopes (bands x frames) after removal of frames
// more than 40 dB below the loudest reference frame. Exposed so tests can
// check the decomposition and correlations directly.
struct StoiBands {
  Eigen::MatrixXd ref;
  Eigen::MatrixXd deg;
};

StoiBands stoi_decompose(std::span<const double> reference, std::span<const double> degraded,
                         int sample_rate);

// Clipped, normalized per-band per-segment Pearson correlations
// (bands x segments).
Eigen::MatrixXd stoi_correlations(const Eigen::MatrixXd& ref_bands,
                                  const Eigen::MatrixXd& deg_bands);

double stoi_from_bands(const Eigen::MatrixXd& ref_bands, const Eigen::MatrixXd& deg_bands);

// One segment's spectral-correlation score: rows then columns normalized to
// zero mean / unit norm, then the mean inner product over columns.
double estoi_segment_score(const Eigen::MatrixXd& ref_seg, const Eigen::MatrixXd& deg_seg);

double estoi_from_bands(const Eigen::MatrixXd& ref_bands, const Eigen::MatrixXd& deg_bands);

double stoi(std::span<const double> reference, std::span<const double> degraded,
            int sample_rate);
double estoi(std::span<const double> reference, std::span<const double> degraded,
             int sample_rate);

// Scale-invariant SDR in dB: project the estimate onto the reference and
// compare target and residual energies. Capped to +/-100 dB.
double si_sdr(std::span<const double> reference, std::span<const double> degraded);

constexpr double kSiSdrCapDb = 100.0;

struct EnhanceSystem {
  std::string name;
  std::function<std::vector<double>(const ManifestEntry&)> run;
};

struct MetricRow {
  std::string id;
  std::string condition;
  double stoi = 0.0;
  double estoi = 0.0;
  double si_sdr_db = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;               // one per utterance per condition
  std::map<std::string, MetricRow> means;    // per condition
  std::string note;
  std::string config_digest;
};

// Scores the noisy reference-channel passthrough plus each system on every
// simu entry (reference = clean reference channel). Writes
// `id,condition,stoi,estoi,si_sdr_db` rows at %.6f, `__mean__` aggregate rows
// appended, and a JSON sidecar with the digest and the SDR-variant note.
MetricReport evaluate_corpus(const std::vector<ManifestEntry>& entries,
                             const std::vector<EnhanceSystem>& systems,
                             const std::string& out_csv, const std::string& config_digest = "");

}  // namespace maskbeam

#endif  // MASKBEAM_METRICS_HPP
