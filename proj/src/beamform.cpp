#include "maskbeam/beamform.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "maskbeam/common.hpp"

namespace maskbeam {

std::vector<Eigen::MatrixXcd> estimate_psd(const MaskPlane& mask, const Spectrogram& spec) {
  if (mask.num_frames() != spec.num_frames || mask.num_bins() != spec.num_bins)
    throw ValidationError("estimate_psd: mask/spectrogram shape mismatch");
  const int T = spec.num_frames, B = spec.num_bins, M = spec.num_channels;

  std::vector<Eigen::MatrixXcd> psd(B, Eigen::MatrixXcd::Zero(M, M));
  for (int b = 0; b < B; ++b) {
    Eigen::MatrixXcd& phi = psd[b];
    for (int t = 0; t < T; ++t) {
      Eigen::Map<const Eigen::VectorXcd> y(spec.cell(t, b), M);
      phi.noalias() += mask.values(t, b) * (y * y.adjoint());
    }
    phi = 0.5 * (phi + phi.adjoint()).eval();  // exact Hermitian symmetry
  }
  return psd;
}

Eigen::MatrixXcd condition_psd(const Eigen::MatrixXcd& psd, double eps) {
  if (eps <= 0.0) throw ValidationError("condition_psd: eps must be positive");
  if (psd.rows() != psd.cols()) throw ValidationError("condition_psd: matrix not square");
  const double m = static_cast<double>(psd.rows());
  const double load = eps * (psd.trace().real() / m + 1e-10);
  Eigen::MatrixXcd out = psd;
  out += load * Eigen::MatrixXcd::Identity(psd.rows(), psd.cols());
  return out;
}

namespace {

// Unit norm, then rotate so the first non-negligible component is
// real-nonnegative. Eigenvectors are defined only up to complex scale.
void canonicalize(Eigen::VectorXcd& f) {
  const double norm = f.norm();
  if (norm <= 0.0) throw NumericalError("gev: zero filter vector");
  f /= norm;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double mag = std::abs(f(i));
    if (mag > 1e-12) {
      f *= std::conj(f(i)) / mag;
      break;
    }
  }
}

GevSolution gev_whitened(const Eigen::MatrixXcd& phi_x, const Eigen::LLT<Eigen::MatrixXcd>& llt) {
  const Eigen::MatrixXcd l = llt.matrixL();
  // a = L^-1 phi_x L^-H
  Eigen::MatrixXcd tmp = l.triangularView<Eigen::Lower>().solve(phi_x);
  Eigen::MatrixXcd a = l.triangularView<Eigen::Lower>().solve(tmp.adjoint().eval());
  a = 0.5 * (a + a.adjoint()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("gev: Hermitian eigensolve failed");
  const Eigen::Index top = a.rows() - 1;  // eigenvalues ascend

  GevSolution sol;
  sol.eigenvalue = es.eigenvalues()(top);
  Eigen::VectorXcd u = es.eigenvectors().col(top);
  sol.filter = l.adjoint().triangularView<Eigen::Upper>().solve(u);
  canonicalize(sol.filter);
  return sol;
}

}  // namespace

GevSolution gev_filter_bin(const Eigen::MatrixXcd& phi_x, const Eigen::MatrixXcd& phi_n) {
  if (phi_x.rows() != phi_x.cols() || phi_n.rows() != phi_n.cols() ||
      phi_x.rows() != phi_n.rows())
    throw ValidationError("gev_filter_bin: PSD shape mismatch");
  if (!phi_x.allFinite() || !phi_n.allFinite())
    throw NumericalError("gev_filter_bin: non-finite PSD input");

  Eigen::LLT<Eigen::MatrixXcd> llt(phi_n);
  if (llt.info() != Eigen::Success) {
    // one escalation of the diagonal load before giving up
    llt.compute(condition_psd(phi_n, 1e-4));
    if (llt.info() != Eigen::Success)
      throw NumericalError("gev_filter_bin: Cholesky failed after conditioning");
  }
  return gev_whitened(phi_x, llt);
}

BeamformerFilter gev_filter(const std::vector<Eigen::MatrixXcd>& phi_x,
                            const std::vector<Eigen::MatrixXcd>& phi_n, int jobs) {
  if (phi_x.size() != phi_n.size())
    throw ValidationError("gev_filter: speech/noise PSD bin counts differ");
  const int bins = static_cast<int>(phi_x.size());

  BeamformerFilter filter;
  filter.taps.resize(bins);
  filter.snr_eigenvalues.resize(bins);
  std::vector<std::string> failures(bins);
  parallel_for(bins, jobs, [&](int b) {
    try {
      GevSolution sol = gev_filter_bin(phi_x[b], phi_n[b]);
      filter.taps[b] = std::move(sol.filter);
      filter.snr_eigenvalues[b] = sol.eigenvalue;
    } catch (const std::exception& ex) {
      failures[b] = ex.what();
    }
  });
  for (int b = 0; b < bins; ++b)
    if (!failures[b].empty())
      throw NumericalError("gev_filter: bin " + std::to_string(b) + ": " + failures[b]);
  return filter;
}

Spectrogram apply_beamformer(const BeamformerFilter& filter, const Spectrogram& spec) {
  if (static_cast<int>(filter.taps.size()) != spec.num_bins)
    throw ValidationError("apply_beamformer: filter bin count mismatch");
  for (const auto& f : filter.taps)
    if (f.size() != spec.num_channels)
      throw ValidationError("apply_beamformer: filter channel count mismatch");

  Spectrogram out;
  out.config = spec.config;
  out.num_frames = spec.num_frames;
  out.num_bins = spec.num_bins;
  out.num_channels = 1;
  out.num_samples = spec.num_samples;
  out.data.resize(static_cast<std::size_t>(spec.num_frames) * spec.num_bins);
  for (int t = 0; t < spec.num_frames; ++t) {
    for (int b = 0; b < spec.num_bins; ++b) {
      Eigen::Map<const Eigen::VectorXcd> y(spec.cell(t, b), spec.num_channels);
      out.at(t, b) = filter.taps[b].dot(y);  // f^H y
    }
  }
  return out;
}

void write_lambda_csv(const std::string& path, const BeamformerFilter& filter) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write lambda CSV: " + path);
  out << "bin,lambda\n";
  char buf[64];
  for (std::size_t b = 0; b < filter.snr_eigenvalues.size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", b, filter.snr_eigenvalues[b]);
    out << buf;
  }
}

BeamformResult beamform_with_masks(const Spectrogram& mix_spec,
                                   const std::vector<MaskPlane>& speech_masks,
                                   const std::vector<MaskPlane>& noise_masks,
                                   const BeamformOptions& opts) {
  BeamformResult result;
  result.fused_speech = median_fuse(speech_masks);
  result.fused_noise = median_fuse(noise_masks);

  auto phi_x = estimate_psd(result.fused_speech, mix_spec);
  auto phi_n = estimate_psd(result.fused_noise, mix_spec);
  for (auto& phi : phi_n) phi = condition_psd(phi, opts.condition_eps);

  result.filter = gev_filter(phi_x, phi_n, opts.jobs);
  result.enhanced_spec = apply_beamformer(result.filter, mix_spec);
  result.enhanced = istft(result.enhanced_spec);
  return result;
}

BeamformResult beamform_utterance(const AudioClip& mix, const MaskNetParams& net,
                                  const StftConfig& stft_cfg, const BeamformOptions& opts) {
  if (mix.channels() < 1) throw ValidationError("beamform_utterance: empty clip");
  Spectrogram mix_spec = stft(mix.samples, stft_cfg);

  std::vector<MaskPlane> speech_masks(mix.channels()), noise_masks(mix.channels());
  std::vector<std::string> failures(mix.channels());
  parallel_for(mix.channels(), opts.jobs, [&](int m) {
    try {
      Eigen::MatrixXd features = normalize_features(magnitude_channel(mix_spec, m));
      auto masks = forward(net, features);
      speech_masks[m] = std::move(masks.at(MaskKind::kSpeech));
      noise_masks[m] = std::move(masks.at(MaskKind::kNoise));
    } catch (const std::exception& ex) {
      failures[m] = ex.what();
    }
  });
  for (int m = 0; m < mix.channels(); ++m)
    if (!failures[m].empty())
      throw Error("beamform_utterance: channel " + std::to_string(m) + ": " + failures[m]);

  return beamform_with_masks(mix_spec, speech_masks, noise_masks, opts);
}

BeamformResult beamform_utterance_oracle(const AudioClip& mix, const AudioClip& clean,
                                         const AudioClip& noise, const StftConfig& stft_cfg,
                                         const IbmConfig& ibm_cfg, const BeamformOptions& opts) {
  if (clean.channels() != mix.channels() || noise.channels() != mix.channels())
    throw ValidationError("beamform_utterance_oracle: channel count mismatch");
  Spectrogram mix_spec = stft(mix.samples, stft_cfg);
  Spectrogram clean_spec = stft(clean.samples, stft_cfg);
  Spectrogram noise_spec = stft(noise.samples, stft_cfg);

  std::vector<MaskPlane> speech_masks, noise_masks;
  for (int m = 0; m < mix.channels(); ++m) {
    auto [ibm_x, ibm_n] =
        ideal_binary_masks(clean_spec.channel(m), noise_spec.channel(m), ibm_cfg);
    speech_masks.push_back(std::move(ibm_x));
    noise_masks.push_back(std::move(ibm_n));
  }
  return beamform_with_masks(mix_spec, speech_masks, noise_masks, opts);
}

}  // namespace maskbeam
