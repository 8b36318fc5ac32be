#include "maskbeam/loss.hpp"

#include <cmath>

namespace maskbeam {

void LossWeights::validate() const {
  if (st < 0.0 || speech < 0.0 || noise < 0.0)
    throw ValidationError("loss weights must be nonnegative");
}

double bce_loss(const Eigen::MatrixXd& target, const Eigen::MatrixXd& predicted) {
  if (target.rows() != predicted.rows() || target.cols() != predicted.cols())
    throw ValidationError("bce_loss: target/prediction shape mismatch");
  const Eigen::Index n = target.size();
  if (n == 0) throw ValidationError("bce_loss: empty inputs");

  double acc = 0.0;
  const double* a = target.data();
  const double* p = predicted.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    double q = p[i];
    if (q < kBceClamp) q = kBceClamp;
    if (q > 1.0 - kBceClamp) q = 1.0 - kBceClamp;
    acc += a[i] * std::log(q) + (1.0 - a[i]) * std::log(1.0 - q);
  }
  return -acc / static_cast<double>(n);
}

double bce_loss(const MaskPlane& target, const MaskPlane& predicted) {
  return bce_loss(target.values, predicted.values);
}

double combined_loss(double st, double x, double n, const LossWeights& weights) {
  return weights.st * st + weights.speech * x + weights.noise * n;
}

Eigen::MatrixXd normalize_features(const Eigen::MatrixXd& mag) {
  const Eigen::Index t_len = mag.rows();
  Eigen::MatrixXd z = (mag.array() + 1.0).log();
  if (t_len == 0) return z;
  for (Eigen::Index b = 0; b < z.cols(); ++b) {
    const double mean = z.col(b).mean();
    const double var = (z.col(b).array() - mean).square().sum() / static_cast<double>(t_len);
    const double sd = std::sqrt(var);
    if (sd < 1e-12)
      z.col(b).setZero();
    else
      z.col(b) = (z.col(b).array() - mean) / sd;
  }
  return z;
}

}  // namespace maskbeam
