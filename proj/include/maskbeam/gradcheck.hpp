#ifndef MASKBEAM_GRADCHECK_HPP
#define MASKBEAM_GRADCHECK_HPP

#include <cstdint>
#include <span>
#include <string>

#include "maskbeam/masknet.hpp"

namespace maskbeam {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  Eigen::Index coords_checked = 0;
};

// Central finite differences (step 1e-5, 64-bit) against the analytic
// gradient. Checks every coordinate up to max_coords, then a deterministic
// sample of the rest. Relative error per coordinate:
//   |analytic - numeric| / (|analytic| + |numeric| + 1e-12)
GradCheckResult grad_check(const MaskNetParams& params, const Eigen::MatrixXd& features,
                           std::span<const LossTerm> terms, Eigen::Index max_coords = 4096,
                           std::uint64_t seed = 1);

// The three shipped objective configurations (two-head hard-target, teacher
// single-head, and the combined student loss at the default weights) on a
// tiny network. Returns the max relative error over all of them; used by the
// `gradcheck` CLI command.
GradCheckResult grad_check_preset(const std::string& preset = "tiny");

}  // namespace maskbeam

#endif  // MASKBEAM_GRADCHECK_HPP
