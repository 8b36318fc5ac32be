#ifndef MASKBEAM_LOSS_HPP
#define MASKBEAM_LOSS_HPP

#include <Eigen/Dense>

#include "maskbeam/mask.hpp"

namespace maskbeam {

// Interpolation weights for the three-term training objective
// (distillation, speech-target, noise-target).
struct LossWeights {
  double st = 0.35;
  double speech = 0.15;
  double noise = 0.50;
  void validate() const;
};

// Mean binary cross entropy over all bins:
//   -(1/(T*B)) * sum a*log(a') + (1-a)*log(1-a')
// Targets may be hard {0,1} or soft [0,1]. Predictions are clamped to
// [1e-7, 1-1e-7] here and only here; gradients elsewhere flow through the
// unclamped values.
double bce_loss(const Eigen::MatrixXd& target, const Eigen::MatrixXd& predicted);
double bce_loss(const MaskPlane& target, const MaskPlane& predicted);

constexpr double kBceClamp = 1e-7;

// weights.st * st + weights.speech * x + weights.noise * n
double combined_loss(double st, double x, double n, const LossWeights& weights);

// Per-utterance, per-dimension z-score of log(1 + mag). Zero-variance
// dimensions are mapped to all zeros. Statistics are never reused across
// utterances.
Eigen::MatrixXd normalize_features(const Eigen::MatrixXd& mag);

}  // namespace maskbeam

#endif  // MASKBEAM_LOSS_HPP
