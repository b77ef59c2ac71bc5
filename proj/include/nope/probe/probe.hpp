#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nope/numerics/matrix.hpp"
#include "nope/numerics/rng.hpp"

namespace nope {

/// Two-layer ReLU regressor: w2 . relu(W1 x + b1) + b2.
struct ProbeParams {
  Matrix w1;               // hidden x d
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  static ProbeParams zeros_like(const ProbeParams& p);
  std::size_t input_dim() const { return w1.cols(); }
  std::size_t hidden() const { return w1.rows(); }
  std::size_t parameter_count() const;
};

/// Views of every parameter array in a fixed order (W1, b1, w2, b2).
std::array<std::span<double>, 4> parameter_blocks(ProbeParams& p);
std::array<std::span<const double>, 4> parameter_blocks(const ProbeParams& p);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ProbeParams first_moment;
  ProbeParams second_moment;
  std::uint64_t step = 0;
};

struct ProbeModel {
  ProbeParams params;
  AdamState adam;
};

enum class ProbeInit {
  zero,    // every parameter 0
  random,  // W1 ~ N(0, 2/d), b1 = 0, w2 = 0, b2 = initial_bias
};

ProbeModel make_probe(std::size_t input_dim, std::size_t hidden, ProbeInit init, RngStream& rng,
                      double initial_bias = 0.5);

/// Loss on (prediction - target): L1 is mean |r|, MSE is mean r^2 / 2.
enum class ProbeLoss { l1, mse };

double probe_forward(const ProbeModel& model, std::span<const double> x);
std::vector<double> probe_forward_batch(const ProbeModel& model, const Matrix& xs);

double probe_loss(const ProbeModel& model, const Matrix& xs, std::span<const double> targets,
                  ProbeLoss loss = ProbeLoss::l1);

struct ProbeGradients {
  ProbeParams grads;
  double loss = 0.0;
};

/// Exact gradients of the mean batch loss. ReLU and |.| use subgradient 0 at
/// their kinks.
ProbeGradients probe_backward(const ProbeModel& model, const Matrix& xs,
                              std::span<const double> targets, ProbeLoss loss = ProbeLoss::l1);

/// Bias-corrected Adam update of every probe parameter.
void adam_step(ProbeModel& model, const ProbeParams& grads, const AdamConfig& config);

}  // namespace nope
