#include "maskbeam/gradcheck.hpp"

#include <cmath>

#include "maskbeam/rng.hpp"

namespace maskbeam {

GradCheckResult grad_check(const MaskNetParams& params, const Eigen::MatrixXd& features,
                           std::span<const LossTerm> terms, Eigen::Index max_coords,
                           std::uint64_t seed) {
  MaskNetParams work = params;
  auto cache = forward_cached(work, features);
  MaskNetParams analytic = backward(work, cache, terms);

  auto pviews = work.views();
  auto gviews = analytic.views();

  const Eigen::Index total = work.num_params();
  std::vector<std::pair<std::size_t, Eigen::Index>> coords;  // (array, offset)
  if (max_coords <= 0 || total <= max_coords) {
    coords.reserve(static_cast<std::size_t>(total));
    for (std::size_t k = 0; k < pviews.size(); ++k)
      for (Eigen::Index i = 0; i < pviews[k].size(); ++i) coords.emplace_back(k, i);
  } else {
    Rng rng(mix_seed(seed, "gradcheck"));
    coords.reserve(static_cast<std::size_t>(max_coords));
    for (Eigen::Index n = 0; n < max_coords; ++n) {
      Eigen::Index flat = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(total)));
      for (std::size_t k = 0; k < pviews.size(); ++k) {
        if (flat < pviews[k].size()) {
          coords.emplace_back(k, flat);
          break;
        }
        flat -= pviews[k].size();
      }
    }
  }

  constexpr double kStep = 1e-5;
  GradCheckResult result;
  result.coords_checked = static_cast<Eigen::Index>(coords.size());
  for (const auto& [k, i] : coords) {
    double* slot = pviews[k].data + i;
    const double saved = *slot;

    *slot = saved + kStep;
    const double loss_plus = loss_value(forward_cached(work, features), terms);
    *slot = saved - kStep;
    const double loss_minus = loss_value(forward_cached(work, features), terms);
    *slot = saved;

    const double numeric = (loss_plus - loss_minus) / (2.0 * kStep);
    const double a = gviews[k].data[i];
    const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_param = pviews[k].name;
    }
  }
  return result;
}

GradCheckResult grad_check_preset(const std::string& preset) {
  int bins = 6, hidden = 4, frames = 5;
  if (preset == "small") {
    bins = 16;
    hidden = 8;
    frames = 9;
  } else if (preset != "tiny") {
    throw ValidationError("unknown gradcheck preset '" + preset + "' (expected tiny|small)");
  }

  Rng rng(mix_seed(7, "gradcheck-preset:" + preset));
  Eigen::MatrixXd features(frames, bins);
  for (Eigen::Index j = 0; j < features.cols(); ++j)
    for (Eigen::Index i = 0; i < features.rows(); ++i) features(i, j) = rng.normal();

  Eigen::MatrixXd hard_speech(frames, bins), hard_noise(frames, bins), soft(frames, bins);
  for (Eigen::Index j = 0; j < bins; ++j) {
    for (Eigen::Index i = 0; i < frames; ++i) {
      hard_speech(i, j) = rng.uniform() < 0.5 ? 0.0 : 1.0;
      hard_noise(i, j) = rng.uniform() < 0.5 ? 0.0 : 1.0;
      soft(i, j) = rng.uniform(0.05, 0.95);
    }
  }

  GradCheckResult worst;
  Eigen::Index total_coords = 0;
  auto fold = [&](const GradCheckResult& r) {
    total_coords += r.coords_checked;
    if (r.max_rel_err > worst.max_rel_err) {
      worst.max_rel_err = r.max_rel_err;
      worst.worst_param = r.worst_param;
    }
  };

  // two-head hard-target objective (speech + noise)
  {
    MaskNetParams net = MaskNetParams::init({bins, hidden, true}, OutputActivation::kSigmoid, 11);
    LossTerm terms[] = {{MaskKind::kSpeech, &hard_speech, 1.0},
                        {MaskKind::kNoise, &hard_noise, 1.0}};
    fold(grad_check(net, features, terms, 0));
  }

  // single-head teacher objective
  {
    MaskNetParams net = MaskNetParams::init({bins, hidden, false}, OutputActivation::kSigmoid, 12);
    LossTerm terms[] = {{MaskKind::kSpeech, &hard_speech, 1.0}};
    fold(grad_check(net, features, terms, 0));
  }

  // combined student objective at the default weights
  {
    MaskNetParams net = MaskNetParams::init({bins, hidden, true}, OutputActivation::kSigmoid, 13);
    LossWeights w;
    LossTerm terms[] = {{MaskKind::kSpeech, &soft, w.st},
                        {MaskKind::kSpeech, &hard_speech, w.speech},
                        {MaskKind::kNoise, &hard_noise, w.noise}};
    fold(grad_check(net, features, terms, 0));
  }

  worst.coords_checked = total_coords;
  return worst;
}

}  // namespace maskbeam
