#ifndef MASKBEAM_MASKNET_HPP
#define MASKBEAM_MASKNET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskbeam/loss.hpp"
#include "maskbeam/mask.hpp"

namespace maskbeam {

enum class OutputActivation { kSigmoid, kClippedRelu };

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

// Network shape. The full-size network is 513 input bins, 256 hidden units
// per direction, feedforward width 513; tests use smaller instances.
struct MaskNetDims {
  int num_bins = 513;
  int hidden = 256;
  bool has_noise_head = true;  // the teacher predicts only the speech mask

  void validate() const;
  bool operator==(const MaskNetDims&) const = default;
};

// One LSTM direction. Gate pre-activations are packed row-wise in the fixed
// order [input; forget; cell; output], each block `hidden` rows tall.
struct LstmDirParams {
  Eigen::MatrixXd w_ih;  // 4H x I
  Eigen::MatrixXd w_hh;  // 4H x H
  Eigen::VectorXd b;     // 4H
};

// Per-mask feedforward stack: ff1 (2H -> B, ReLU) then ff2 (B -> B, output
// activation).
struct HeadParams {
  Eigen::MatrixXd w1;  // B x 2H
  Eigen::VectorXd b1;  // B
  Eigen::MatrixXd w2;  // B x B
  Eigen::VectorXd b2;  // B
};

// Named view of one parameter array, used for the canonical flat ordering
// shared by the optimizer, gradient check and checkpoint format.
struct ParamView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

struct MaskNetParams {
  MaskNetDims dims;
  OutputActivation activation = OutputActivation::kSigmoid;
  LstmDirParams fwd, bwd;
  HeadParams speech;
  std::optional<HeadParams> noise;

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with forget-gate bias +1
  static MaskNetParams init(const MaskNetDims& dims, OutputActivation act,
                            std::uint64_t seed);
  static MaskNetParams zeros(const MaskNetDims& dims,
                             OutputActivation act = OutputActivation::kSigmoid);

  // Canonical array order: fwd.{w_ih,w_hh,b}, bwd.{w_ih,w_hh,b},
  // speech.{w1,b1,w2,b2}, then the noise head if present. Array payloads are
  // column-major as stored by Eigen.
  std::vector<ParamView> views();
  std::vector<ParamView> views() const;  // views over const data, do not write
  Eigen::Index num_params() const;

  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
};

struct LstmDirCache {
  Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o;  // T x H, post-activation
  Eigen::MatrixXd c, tanh_c, h;                    // T x H
};

struct HeadCache {
  Eigen::MatrixXd z1;      // T x B, post-ReLU
  Eigen::MatrixXd logits;  // T x B, pre output activation
  Eigen::MatrixXd mask;    // T x B
};

struct ForwardCache {
  Eigen::MatrixXd features;  // T x I
  LstmDirCache fwd, bwd;
  Eigen::MatrixXd concat;  // T x 2H, [forward | backward]
  std::map<MaskKind, HeadCache> heads;
};

// One additive term of the training objective: weight * bce(target, head
// prediction). Several terms may address the same head (the student's speech
// head carries both a distillation and a hard-target term).
struct LossTerm {
  MaskKind head = MaskKind::kSpeech;
  const Eigen::MatrixXd* target = nullptr;
  double weight = 1.0;
};

// Full forward pass with all intermediate activations kept for backprop.
// Throws NumericalError naming the layer if activations go non-finite.
ForwardCache forward_cached(const MaskNetParams& params, const Eigen::MatrixXd& features);

// Soft masks per head, values strictly inside (0,1) for the sigmoid output.
std::map<MaskKind, MaskPlane> forward(const MaskNetParams& params,
                                      const Eigen::MatrixXd& features);

// BLSTM trunk only (T x 2H), exposed for the architecture symmetry tests.
Eigen::MatrixXd blstm_trunk(const MaskNetParams& params, const Eigen::MatrixXd& features);

double loss_value(const ForwardCache& cache, std::span<const LossTerm> terms);

// Exact gradient of sum_k weight_k * bce(target_k, mask_k) with respect to
// every parameter. Backpropagation through time mirrors the forward recurrence
// step for step, so the result matches central finite differences to
// first-order rounding.
MaskNetParams backward(const MaskNetParams& params, const ForwardCache& cache,
                       std::span<const LossTerm> terms);

}  // namespace maskbeam

#endif  // MASKBEAM_MASKNET_HPP
