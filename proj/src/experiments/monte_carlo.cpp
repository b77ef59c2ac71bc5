#include "nope/experiments/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "nope/model/attention.hpp"
#include "nope/model/layer_norm.hpp"
#include "nope/model/trace.hpp"

namespace nope {
namespace {

std::vector<std::size_t> unique_positions(std::vector<std::size_t> ps, std::size_t seq_len) {
  for (auto& p : ps) p = std::clamp<std::size_t>(p, 1, seq_len);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  return ps;
}

std::vector<double> project_row(const Matrix& w, std::span<const double> e) {
  std::vector<double> out(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto wr = w.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < e.size(); ++c) s += wr[c] * e[c];
    out[r] = s;
  }
  return out;
}

struct Layer0Partial {
  Matrix output;
  std::vector<std::vector<double>> cumulative;  // per selected row, head-averaged
  std::vector<double> logit_sum, logit_sumsq;   // per head
  std::size_t logit_count = 0;                  // per head
  // [position][head] vectors
  std::vector<std::vector<std::vector<double>>> q, k, v;
};

}  // namespace

std::size_t worker_count() {
  if (const char* env = std::getenv("NOPE_LAB_WORKERS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::size_t> default_attention_rows(std::size_t seq_len) {
  return unique_positions({seq_len / 4, seq_len / 2, seq_len}, seq_len);
}

std::vector<std::size_t> default_qkv_positions(std::size_t seq_len) {
  return unique_positions({1, seq_len / 2, seq_len}, seq_len);
}

Layer0Stats run_layer0_pass(const FrozenModel& model, std::size_t n_samples, std::size_t workers) {
  const ModelConfig& c = model.config();
  const LayerWeights& w = model.layer(0);
  const std::size_t len = c.seq_len;
  const std::size_t heads = c.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(c.head_dim()));

  Layer0Stats stats;
  stats.n_samples = n_samples;
  stats.attention_rows = default_attention_rows(len);
  stats.qkv_positions = default_qkv_positions(len);
  const std::size_t n_pos = stats.qkv_positions.size();
  for (auto* field : {&stats.q, &stats.k, &stats.v}) {
    field->assign(n_pos, std::vector<std::vector<std::vector<double>>>(heads));
  }
  stats.cumulative_attention.resize(stats.attention_rows.size());
  for (std::size_t r = 0; r < stats.attention_rows.size(); ++r) {
    stats.cumulative_attention[r].assign(stats.attention_rows[r], 0.0);
  }

  PositionVarianceAccumulator output_acc(len, c.d);
  std::vector<double> logit_sum(heads, 0.0), logit_sumsq(heads, 0.0);
  std::size_t logit_count = 0;

  auto compute = [&](std::size_t s) {
    RngStream rng(c.seed, s);
    const Matrix x = sample_inputs(c, rng);
    const Matrix e = layer_norm_rows(x, c.gamma, c.beta, c.ln_epsilon);
    AttentionResult attn = attention_forward(e, w, c.attention_mode, true);

    Layer0Partial p;
    p.output = std::move(attn.output);
    p.cumulative.resize(stats.attention_rows.size());
    for (std::size_t r = 0; r < stats.attention_rows.size(); ++r) {
      const std::size_t m = stats.attention_rows[r];
      std::vector<double>& cum = p.cumulative[r];
      cum.assign(m, 0.0);
      for (std::size_t h = 0; h < heads; ++h) {
        const auto row = attn.weights[h].row(m - 1);
        double running = 0.0;
        for (std::size_t n = 0; n < m; ++n) {
          running += row[n];
          cum[n] += running;
        }
      }
      for (double& v : cum) v /= static_cast<double>(heads);
    }
    p.logit_sum.assign(heads, 0.0);
    p.logit_sumsq.assign(heads, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      std::size_t count = 0;
      for (std::size_t m = 0; m < len; ++m) {
        const auto row = attn.logits[h].row(m);
        const std::size_t last = c.attention_mode == AttentionMode::causal ? m + 1 : len;
        for (std::size_t n = 0; n < last; ++n) {
          const double l = row[n] * inv_sqrt_dh;
          p.logit_sum[h] += l;
          p.logit_sumsq[h] += l * l;
        }
        count += last;
      }
      p.logit_count = count;
    }
    p.q.assign(n_pos, std::vector<std::vector<double>>(heads));
    p.k = p.q;
    p.v = p.q;
    for (std::size_t i = 0; i < n_pos; ++i) {
      const std::size_t row = stats.qkv_positions[i] - 1;
      for (std::size_t h = 0; h < heads; ++h) {
        p.q[i][h] = project_row(w.w_q[h], e.row(row));
        p.k[i][h] = project_row(w.w_k[h], e.row(row));
        const auto vr = attn.values[h].row(row);
        p.v[i][h].assign(vr.begin(), vr.end());
      }
    }
    return p;
  };

  auto fold = [&](std::size_t, Layer0Partial p) {
    output_acc.add(p.output);
    for (std::size_t r = 0; r < p.cumulative.size(); ++r) {
      auto& dst = stats.cumulative_attention[r];
      for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += p.cumulative[r][n];
    }
    for (std::size_t h = 0; h < heads; ++h) {
      logit_sum[h] += p.logit_sum[h];
      logit_sumsq[h] += p.logit_sumsq[h];
    }
    logit_count += p.logit_count;
    for (std::size_t i = 0; i < n_pos; ++i) {
      for (std::size_t h = 0; h < heads; ++h) {
        stats.q[i][h].push_back(std::move(p.q[i][h]));
        stats.k[i][h].push_back(std::move(p.k[i][h]));
        stats.v[i][h].push_back(std::move(p.v[i][h]));
      }
    }
  };

  ordered_parallel<Layer0Partial>(n_samples, workers, compute, fold);

  stats.output_variance = output_acc.pooled_variance();
  for (auto& cum : stats.cumulative_attention)
    for (double& v : cum) v /= static_cast<double>(n_samples);

  double total_sum = 0.0, total_sumsq = 0.0;
  stats.scaled_logit_variance_by_head.resize(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const double mean = logit_sum[h] / static_cast<double>(logit_count);
    stats.scaled_logit_variance_by_head[h] =
        logit_sumsq[h] / static_cast<double>(logit_count) - mean * mean;
    total_sum += logit_sum[h];
    total_sumsq += logit_sumsq[h];
  }
  stats.logit_count = logit_count * heads;
  stats.scaled_logit_mean = total_sum / static_cast<double>(stats.logit_count);
  stats.scaled_logit_variance = total_sumsq / static_cast<double>(stats.logit_count) -
                                stats.scaled_logit_mean * stats.scaled_logit_mean;
  return stats;
}

FinalLnStats run_final_ln_pass(const FrozenModel& model, std::size_t n_samples,
                               const std::vector<std::size_t>& positions,
                               const std::vector<std::size_t>& dims, std::size_t workers) {
  const ModelConfig& c = model.config();
  FinalLnStats stats;
  stats.positions = positions;
  stats.dims = dims;
  stats.n_samples = n_samples;
  PositionVarianceAccumulator acc(positions.size(), dims.size());

  auto compute = [&](std::size_t s) {
    RngStream rng(c.seed, s);
    const Matrix x = sample_inputs(c, rng);
    const TraceBundle trace = forward(model, x, CaptureSet::none().with(Tensor::final_output));
    Matrix picked(positions.size(), dims.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
      for (std::size_t j = 0; j < dims.size(); ++j)
        picked(i, j) = trace.final_output(positions[i] - 1, dims[j] - 1);
    return picked;
  };
  ordered_parallel<Matrix>(n_samples, workers, compute,
                           [&](std::size_t, Matrix picked) { acc.add(picked); });

  stats.variance = Matrix(positions.size(), dims.size());
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = 0; j < dims.size(); ++j) stats.variance(i, j) = acc.cell_variance(i, j);
  return stats;
}

}  // namespace nope
