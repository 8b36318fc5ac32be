#ifndef MASKBEAM_OPTIMIZER_HPP
#define MASKBEAM_OPTIMIZER_HPP

#include <Eigen/Dense>

#include "maskbeam/masknet.hpp"

namespace maskbeam {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global-norm gradient clip, <= 0 disables
};

// Bias-corrected Adam with global-norm clipping applied before the step.
// All accumulation in 64-bit.

struct AdamState {
  MaskNetParams m, v;
  long step = 0;
  static AdamState zeros(const MaskNetDims& dims, OutputActivation act);
};

void adam_step(MaskNetParams& params, const MaskNetParams& grads, AdamState& state,
               const AdamConfig& cfg);

// Flat-vector variant for generic objectives.
struct AdamVecState {
  Eigen::VectorXd m, v;
  long step = 0;
  static AdamVecState zeros(Eigen::Index n);
};

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamVecState& state,
               const AdamConfig& cfg);

}  // namespace maskbeam

#endif  // MASKBEAM_OPTIMIZER_HPP
