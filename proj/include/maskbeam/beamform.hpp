#ifndef MASKBEAM_BEAMFORM_HPP
#define MASKBEAM_BEAMFORM_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "maskbeam/mask.hpp"
#include "maskbeam/masknet.hpp"
#include "maskbeam/stft.hpp"
#include "maskbeam/wav.hpp"

namespace maskbeam {

// Per-bin speech/noise cross power spectral density matrices.
struct PsdSet {
  std::vector<Eigen::MatrixXcd> speech;
  std::vector<Eigen::MatrixXcd> noise;
};

// Mask-weighted sum of per-frame channel outer products, one M x M Hermitian
// matrix per bin. No time normalization; the filter below is invariant to a
// common positive scale.
std::vector<Eigen::MatrixXcd> estimate_psd(const MaskPlane& mask, const Spectrogram& spec);

// Diagonal loading: phi + eps * (trace(phi)/M + 1e-10) * I. Keeps zero
// matrices strictly positive definite too.
Eigen::MatrixXcd condition_psd(const Eigen::MatrixXcd& psd, double eps = 1e-6);

struct GevSolution {
  Eigen::VectorXcd filter;  // unit norm, first nonzero component real >= 0
  double eigenvalue = 0.0;  // expected-SNR Rayleigh quotient at the solution
};

// Principal generalized eigenvector of (phi_x, phi_n) via Cholesky whitening:
// phi_n = L L^H, Hermitian eigensolve of L^-1 phi_x L^-H, back-substitution,
// then canonical normalization. phi_n must already be conditioned.
GevSolution gev_filter_bin(const Eigen::MatrixXcd& phi_x, const Eigen::MatrixXcd& phi_n);

struct BeamformerFilter {
  std::vector<Eigen::VectorXcd> taps;      // per bin
  std::vector<double> snr_eigenvalues;     // per-bin lambda, an SNR proxy
  std::string normalization = "unit-norm, first nonzero component real-nonnegative";
};

BeamformerFilter gev_filter(const std::vector<Eigen::MatrixXcd>& phi_x,
                            const std::vector<Eigen::MatrixXcd>& phi_n, int jobs = 1);

// out(t,b) = taps(b)^H y(t,b); collapses M channels to one.
Spectrogram apply_beamformer(const BeamformerFilter& filter, const Spectrogram& spec);

// Diagnostics dump: one `bin,lambda` row per frequency bin.
void write_lambda_csv(const std::string& path, const BeamformerFilter& filter);

struct BeamformOptions {
  double condition_eps = 1e-6;
  int jobs = 0;  // 0 = one worker per hardware thread
};

struct BeamformResult {
  std::vector<double> enhanced;  // time domain, same length as the input
  Spectrogram enhanced_spec;
  MaskPlane fused_speech;
  MaskPlane fused_noise;
  BeamformerFilter filter;
};

// Full pipeline from per-channel masks: median fusion, PSD estimation,
// conditioning, per-bin GEV, filter-and-sum, synthesis.
BeamformResult beamform_with_masks(const Spectrogram& mix_spec,
                                   const std::vector<MaskPlane>& speech_masks,
                                   const std::vector<MaskPlane>& noise_masks,
                                   const BeamformOptions& opts = {});

// Network-driven variant: runs the mask network on every channel's
// normalized log-magnitude features.
BeamformResult beamform_utterance(const AudioClip& mix, const MaskNetParams& net,
                                  const StftConfig& stft_cfg, const BeamformOptions& opts = {});

// Oracle variant for ablations: per-channel ideal binary masks from the
// parallel clean/noise clips.
BeamformResult beamform_utterance_oracle(const AudioClip& mix, const AudioClip& clean,
                                         const AudioClip& noise, const StftConfig& stft_cfg,
                                         const IbmConfig& ibm_cfg,
                                         const BeamformOptions& opts = {});

}  // namespace maskbeam

#endif  // MASKBEAM_BEAMFORM_HPP
