#include <doctest.h>

#include <cmath>

#include "maskbeam/optimizer.hpp"
#include "maskbeam/rng.hpp"

using namespace maskbeam;

TEST_CASE("zero gradient leaves parameters unchanged") {
  MaskNetDims dims{5, 3, true};
  MaskNetParams params = MaskNetParams::init(dims, OutputActivation::kSigmoid, 71);
  const Eigen::VectorXd before = params.flatten();
  MaskNetParams zero_grad = MaskNetParams::zeros(dims);
  AdamState state = AdamState::zeros(dims, OutputActivation::kSigmoid);
  adam_step(params, zero_grad, state, AdamConfig{});
  CHECK(params.flatten() == before);
}

TEST_CASE("first Adam step moves against the gradient sign at ~lr magnitude") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  Eigen::VectorXd params = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd grads(6);
  grads << 0.5, -0.2, 1.7, -3.0, 0.01, -0.4;
  AdamVecState state = AdamVecState::zeros(6);
  adam_step(params, grads, state, cfg);
  for (int i = 0; i < 6; ++i) {
    CHECK(params(i) * grads(i) < 0.0);  // opposite sign
    CHECK(std::abs(params(i)) == doctest::Approx(cfg.learning_rate).epsilon(1e-3));
  }
}

TEST_CASE("global-norm clipping preserves the first-step direction") {
  AdamConfig cfg;
  cfg.clip_norm = 0.1;  // forces clipping for this gradient
  Eigen::VectorXd params = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd grads(3);
  grads << 30.0, -40.0, 0.5;
  AdamVecState state = AdamVecState::zeros(3);
  adam_step(params, grads, state, cfg);
  // m_hat / sqrt(v_hat) is scale-free, so the step magnitude stays ~lr
  for (int i = 0; i < 3; ++i) {
    CHECK(params(i) * grads(i) < 0.0);
    CHECK(std::abs(params(i)) == doctest::Approx(cfg.learning_rate).epsilon(1e-2));
  }
}

TEST_CASE("Adam drives a 2-parameter quadratic to its optimum") {
  // f(p) = 0.5*(p0 - 3)^2 + 2*(p1 + 1)^2, optimum (3, -1), f* = 0
  AdamConfig cfg;
  cfg.learning_rate = 5e-2;
  cfg.clip_norm = 0.0;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  AdamVecState state = AdamVecState::zeros(2);
  double loss = 0.0;
  for (int step = 0; step < 200; ++step) {
    Eigen::VectorXd g(2);
    g << (p(0) - 3.0), 4.0 * (p(1) + 1.0);
    adam_step(p, g, state, cfg);
    loss = 0.5 * (p(0) - 3.0) * (p(0) - 3.0) + 2.0 * (p(1) + 1.0) * (p(1) + 1.0);
  }
  CHECK(loss < 1e-6);
}

TEST_CASE("structured and flat Adam agree") {
  MaskNetDims dims{4, 2, false};
  MaskNetParams params = MaskNetParams::init(dims, OutputActivation::kSigmoid, 73);
  MaskNetParams grads = MaskNetParams::init(dims, OutputActivation::kSigmoid, 74);

  Eigen::VectorXd flat_params = params.flatten();
  const Eigen::VectorXd flat_grads = grads.flatten();

  AdamState state = AdamState::zeros(dims, OutputActivation::kSigmoid);
  AdamVecState flat_state = AdamVecState::zeros(flat_params.size());
  AdamConfig cfg;
  for (int step = 0; step < 3; ++step) {
    adam_step(params, grads, state, cfg);
    adam_step(flat_params, flat_grads, flat_state, cfg);
  }
  CHECK((params.flatten() - flat_params).cwiseAbs().maxCoeff() < 1e-15);
}
