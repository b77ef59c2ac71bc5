#pragma once

#include <span>
#include <vector>

#include "nope/model/config.hpp"
#include "nope/model/weights.hpp"
#include "nope/numerics/matrix.hpp"

namespace nope {

/// Softmax over entries that are not -inf; -inf entries map to exactly 0.
/// The row maximum is taken over unmasked entries only. Throws
/// std::invalid_argument when every entry is masked.
std::vector<double> masked_softmax(std::span<const double> logits);

struct AttentionResult {
  Matrix output;                // L x d, rows o_m
  std::vector<Matrix> weights;  // per head, L x L, entries a_mn
  std::vector<Matrix> values;   // per head, L x (d/H), rows v_n
  std::vector<Matrix> logits;   // per head, unscaled <q_m, k_n>; -inf where masked. Opt-in.
};

/// Multi-head self-attention on post-LN rows. Logits are scaled by
/// 1/sqrt(d/H) before the softmax; causal mode masks n > m.
AttentionResult attention_forward(const Matrix& e, const LayerWeights& weights, AttentionMode mode,
                                  bool keep_logits = false);

/// GELU (tanh form).
double gelu(double x);

/// Position-wise two-layer GELU network. Throws StateError when the layer
/// has no FFN weights.
Matrix ffn_forward(const Matrix& y, const LayerWeights& weights);

}  // namespace nope
