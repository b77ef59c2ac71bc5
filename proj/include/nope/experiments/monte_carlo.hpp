#pragma once

#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "nope/model/model.hpp"
#include "nope/numerics/stats.hpp"

namespace nope {

/// NOPE_LAB_WORKERS if set to a positive integer, else the hardware thread
/// count (at least 1).
std::size_t worker_count();

/// Evaluates compute(i) for i in [0, n) on up to `workers` threads and feeds
/// the results to fold(i, partial) in increasing i. Results depend only on
/// compute and fold, never on the worker count.
template <class Partial, class Compute, class Fold>
void ordered_parallel(std::size_t n, std::size_t workers, Compute&& compute, Fold&& fold) {
  workers = workers == 0 ? 1 : workers;
  for (std::size_t base = 0; base < n; base += workers) {
    const std::size_t count = std::min(workers, n - base);
    std::vector<std::optional<Partial>> slots(count);
    if (count == 1) {
      slots[0].emplace(compute(base));
    } else {
      std::vector<std::exception_ptr> errors(count);
      {
        std::vector<std::jthread> threads;
        threads.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
          threads.emplace_back([&, i] {
            try {
              slots[i].emplace(compute(base + i));
            } catch (...) {
              errors[i] = std::current_exception();
            }
          });
        }
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t i = 0; i < count; ++i) fold(base + i, std::move(*slots[i]));
  }
}

/// Statistics of the first layer gathered over independent input sequences
/// fed through one frozen model. Sample s uses RngStream(seed, s).
struct Layer0Stats {
  std::size_t n_samples = 0;
  std::vector<double> output_variance;  // pooled variance of o_m, index m-1

  std::vector<std::size_t> attention_rows;  // 1-based rows m
  /// Per selected row: running sum over n <= p of a_mn, averaged over heads
  /// and samples, for p = 1..m.
  std::vector<std::vector<double>> cumulative_attention;

  // l_mn / sqrt(d/H) over every unmasked pair, pooled over heads and samples.
  double scaled_logit_mean = 0.0;
  double scaled_logit_variance = 0.0;
  std::vector<double> scaled_logit_variance_by_head;
  std::size_t logit_count = 0;

  /// 1-based positions at which q, k and v vectors are kept.
  std::vector<std::size_t> qkv_positions;
  /// [position][head][sample] -> head_dim vector.
  std::vector<std::vector<std::vector<std::vector<double>>>> q, k, v;
};

/// Row and position choices shared by every layer-0 experiment: {L/4, L/2, L}
/// for attention, {1, L/2, L} for q/k/v.
std::vector<std::size_t> default_attention_rows(std::size_t seq_len);
std::vector<std::size_t> default_qkv_positions(std::size_t seq_len);

Layer0Stats run_layer0_pass(const FrozenModel& model, std::size_t n_samples, std::size_t workers);

/// Variance across samples of y'_mj, the final layer norm output, for
/// 1-based positions m and dimensions j.
struct FinalLnStats {
  std::vector<std::size_t> positions;
  std::vector<std::size_t> dims;
  Matrix variance;  // positions x dims
  std::size_t n_samples = 0;
};

FinalLnStats run_final_ln_pass(const FrozenModel& model, std::size_t n_samples,
                               const std::vector<std::size_t>& positions,
                               const std::vector<std::size_t>& dims, std::size_t workers);

}  // namespace nope
