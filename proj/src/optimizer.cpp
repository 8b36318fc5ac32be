#include "maskbeam/optimizer.hpp"

#include <cmath>

namespace maskbeam {

AdamState AdamState::zeros(const MaskNetDims& dims, OutputActivation act) {
  return {MaskNetParams::zeros(dims, act), MaskNetParams::zeros(dims, act), 0};
}

AdamVecState AdamVecState::zeros(Eigen::Index n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
}

namespace {

void adam_update_array(double* p, const double* g, double* m, double* v, Eigen::Index n,
                       double grad_scale, long step, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double gi = g[i] * grad_scale;
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace

void adam_step(MaskNetParams& params, const MaskNetParams& grads, AdamState& state,
               const AdamConfig& cfg) {
  auto pv = params.views();
  auto gv = grads.views();
  auto mv = state.m.views();
  auto vv = state.v.views();
  if (pv.size() != gv.size()) throw ValidationError("adam_step: param/grad layout mismatch");

  double sq = 0.0;
  for (const auto& g : gv)
    for (Eigen::Index i = 0; i < g.size(); ++i) sq += g.data[i] * g.data[i];
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericalError("adam_step: non-finite gradient norm");
  const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

  ++state.step;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    if (pv[k].size() != gv[k].size()) throw ValidationError("adam_step: array shape mismatch");
    adam_update_array(pv[k].data, gv[k].data, mv[k].data, vv[k].data, pv[k].size(), scale,
                      state.step, cfg);
  }
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamVecState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ValidationError("adam_step: size mismatch");
  if (state.m.size() != params.size()) throw ValidationError("adam_step: state size mismatch");

  const double norm = grads.norm();
  if (!std::isfinite(norm)) throw NumericalError("adam_step: non-finite gradient norm");
  const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

  ++state.step;
  adam_update_array(params.data(), grads.data(), state.m.data(), state.v.data(), params.size(),
                    scale, state.step, cfg);
}

}  // namespace maskbeam
