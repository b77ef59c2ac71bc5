#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nope/model/config.hpp"
#include "nope/numerics/matrix.hpp"

namespace nope {

// Closed-form first-layer statistics of a frozen random transformer fed with
// i.i.d. N(0, sigma^2) inputs. Every function is plain arithmetic.

/// Variance of each coordinate of q_m, k_m, v_m: d * sigma^2.
double predict_qkv_variance(const ModelConfig& config);

/// Closed form as commonly stated. Unscaled: d^3 sigma^4 / H^2. Scaled by
/// 1/sqrt(d/H): d^2 sigma^4 / H.
double predict_logit_variance(const ModelConfig& config, bool scaled);

/// Variance implied by the q/k covariance (d sigma^2) I: a sum of d/H
/// products of independent coordinates gives (d/H)(d sigma^2)^2 = d^3 sigma^4 / H
/// unscaled and d^2 sigma^4 scaled. Larger than the stated form by a factor H,
/// which comes from taking E[W_q W_q^T] as (d/H) sigma^2 I instead of d sigma^2 I.
double implied_logit_variance(const ModelConfig& config, bool scaled);

/// Variance of each coordinate of o_m under uniform causal attention:
/// d^2 sigma^4 / m, 1 <= m <= L.
double predict_output_variance(const ModelConfig& config, std::size_t m);

/// With no mask every position averages all L tokens: d^2 sigma^4 / L.
double predict_bidirectional_output_variance(const ModelConfig& config);

/// sigma^2 + d^2 sigma^4 / m.
double predict_residual_variance(const ModelConfig& config, std::size_t m);

/// Variance of coordinate j (1-based) of the final layer norm output at
/// position m, evaluated on the actual sampled weights:
///   (m sigma^2 + sum_i (W_o[j,:] . W_v[:,i])^2) / (m sigma^2 + d^2 sigma^4)
/// W_v is the d x d stack of per-head value projections.
double predict_final_ln_variance(const Matrix& w_o, const Matrix& w_v_full,
                                 const ModelConfig& config, std::size_t m, std::size_t j);

/// sum_i (W_o[j,:] . W_v[:,i])^2 for 1-based j: the squared norm of row j of W_o W_v.
double projected_row_energy(const Matrix& w_o, const Matrix& w_v_full, std::size_t j);

/// Rounded scaled-logit variance quoted for d = 768, H = 12, sigma = 0.02.
inline constexpr double kReferenceScaledLogitVariance = 0.0079;

inline constexpr double kProperty1Threshold = 0.05;

struct Property1Check {
  bool holds = false;
  double margin = 0.0;  // sigma^4 d^2 / H, the scaled-logit variance
  double threshold = kProperty1Threshold;
};

/// Near-uniform attention is assumed when sigma^4 d^2 / H < threshold.
Property1Check check_property1(const ModelConfig& config, double threshold = kProperty1Threshold);

struct TheoryPrediction {
  ModelConfig config;
  double var_qkv = 0.0;
  double var_logit = 0.0;
  double var_scaled_logit = 0.0;
  double var_logit_implied = 0.0;
  double var_scaled_logit_implied = 0.0;
  std::vector<double> var_output;    // index m-1
  std::vector<double> var_residual;  // index m-1
  double var_bidirectional = 0.0;
  Property1Check property1;
};

TheoryPrediction predict(const ModelConfig& config, double property1_threshold = kProperty1Threshold);

/// Human-readable dump used by `nope-lab print-theory`.
std::string format_theory(const TheoryPrediction& prediction);

}  // namespace nope
