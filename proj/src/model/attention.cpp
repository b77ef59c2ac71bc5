#include "nope/model/attention.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "nope/errors.hpp"

namespace nope {

Matrix LayerWeights::stacked_values() const { return vstack(w_v); }

std::vector<double> masked_softmax(std::span<const double> logits) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double l : logits)
    if (l > max_logit) max_logit = l;
  if (max_logit == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("masked_softmax: every entry is masked");
  }
  std::vector<double> out(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] == -std::numeric_limits<double>::infinity()) continue;
    out[i] = std::exp(logits[i] - max_logit);
    total += out[i];
  }
  for (double& w : out) w /= total;
  return out;
}

AttentionResult attention_forward(const Matrix& e, const LayerWeights& weights, AttentionMode mode,
                                  bool keep_logits) {
  const std::size_t heads = weights.heads();
  if (heads == 0) throw ShapeError("attention_forward: layer has no heads");
  const std::size_t d = weights.w_o.rows();
  const std::size_t head_dim = weights.w_q.front().rows();
  if (e.cols() != d || weights.w_q.front().cols() != d || head_dim * heads != d) {
    throw ShapeError("attention_forward: input " + e.shape_string() + " incompatible with " +
                     std::to_string(heads) + " heads of " + weights.w_q.front().shape_string() +
                     " and W_o " + weights.w_o.shape_string());
  }
  const std::size_t len = e.rows();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(head_dim));
  constexpr double kMasked = -std::numeric_limits<double>::infinity();

  AttentionResult result;
  result.weights.reserve(heads);
  result.values.reserve(heads);
  Matrix concat(len, d);
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix q = matmul_bt(e, weights.w_q[h]);
    const Matrix k = matmul_bt(e, weights.w_k[h]);
    Matrix v = matmul_bt(e, weights.w_v[h]);
    Matrix logits = matmul_bt(q, k);
    Matrix probs(len, len);
    std::vector<double> scaled(len);
    for (std::size_t m = 0; m < len; ++m) {
      auto row = logits.row(m);
      for (std::size_t n = 0; n < len; ++n) {
        if (mode == AttentionMode::causal && n > m) {
          row[n] = kMasked;
          scaled[n] = kMasked;
        } else {
          scaled[n] = row[n] * inv_sqrt_dh;
        }
      }
      const auto a = masked_softmax(scaled);
      std::copy(a.begin(), a.end(), probs.row(m).begin());
    }
    const Matrix head_out = matmul(probs, v);
    for (std::size_t m = 0; m < len; ++m)
      for (std::size_t c = 0; c < head_dim; ++c) concat(m, h * head_dim + c) = head_out(m, c);
    result.weights.push_back(std::move(probs));
    result.values.push_back(std::move(v));
    if (keep_logits) result.logits.push_back(std::move(logits));
  }
  result.output = matmul_bt(concat, weights.w_o);
  return result;
}

double gelu(double x) {
  constexpr double kC = 0.044715;
  const double s = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(s * (x + kC * x * x * x)));
}

Matrix ffn_forward(const Matrix& y, const LayerWeights& weights) {
  if (!weights.ffn) throw StateError("ffn_forward: FFN is disabled for this layer");
  const FfnWeights& f = *weights.ffn;
  if (y.cols() != f.w_in.cols()) {
    throw ShapeError("ffn_forward: input " + y.shape_string() + " incompatible with W_in " +
                     f.w_in.shape_string());
  }
  Matrix hidden = matmul_bt(y, f.w_in);
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    auto row = hidden.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = gelu(row[c] + f.b_in[c]);
  }
  Matrix out = matmul_bt(hidden, f.w_out);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += f.b_out[c];
  }
  return out;
}

}  // namespace nope
