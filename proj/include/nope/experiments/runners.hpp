#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nope/experiments/monte_carlo.hpp"
#include "nope/experiments/spec.hpp"
#include "nope/model/model.hpp"
#include "nope/numerics/rng.hpp"
#include "nope/numerics/stats.hpp"

namespace nope {

/// Shares frozen models and first-layer passes between experiments that use
/// the same configuration, so `nope-lab all` samples each of them once.
class ExperimentContext {
 public:
  explicit ExperimentContext(std::size_t workers = worker_count());

  std::size_t workers() const { return workers_; }
  const FrozenModel& model(const ModelConfig& config);
  const Layer0Stats& layer0(const ModelConfig& config, std::size_t n_samples);

 private:
  std::size_t workers_;
  std::map<std::string, std::unique_ptr<FrozenModel>> models_;
  std::map<std::string, std::unique_ptr<Layer0Stats>> passes_;
};

/// lemma1, lemma2 or lemma4.
ExperimentResult run_lemma_check(const ExperimentSpec& spec, ExperimentContext& ctx);
/// property1-fig3.
ExperimentResult run_attention_uniformity(const ExperimentSpec& spec, ExperimentContext& ctx);
/// lemma3-fig4.
ExperimentResult run_variance_curve(const ExperimentSpec& spec, ExperimentContext& ctx);
/// sigma-sweep-fig5.
ExperimentResult run_sigma_sweep(const ExperimentSpec& spec, ExperimentContext& ctx);
/// init-sweep.
ExperimentResult run_init_sweep(const ExperimentSpec& spec, ExperimentContext& ctx);
/// bert-mode.
ExperimentResult run_bert_mode(const ExperimentSpec& spec, ExperimentContext& ctx);
/// probe-fig2.
ExperimentResult run_probe_experiment(const ExperimentSpec& spec, ExperimentContext& ctx);

ExperimentResult run_experiment(const ExperimentSpec& spec, ExperimentContext& ctx);

/// Max |cumulative[p-1] - p/m| over p = 1..m for one attention row m.
double uniform_deviation(std::span<const double> cumulative);

struct VarianceCurveCheck {
  LogLogFit fit;
  double max_rel_err = 0.0;
  double spearman = 0.0;
  std::vector<Verdict> verdicts;  // slope, relative error, monotonicity
  bool passed() const;
};

struct VarianceCurveTolerance {
  double slope = 0.05;
  double rel_err = 0.05;
  double spearman = -0.99;
};

/// Judges a measured per-position variance curve (index m-1) against the
/// d^2 sigma^4 / m law given as `theory`.
VarianceCurveCheck evaluate_variance_curve(const std::string& label, std::span<const double> measured,
                                           std::span<const double> theory,
                                           const VarianceCurveTolerance& tolerance = {});

/// max/min of a per-position curve must stay below 1 + tolerance.
Verdict flatness_verdict(const std::string& label, std::span<const double> curve,
                         double tolerance = 0.1);

using MatrixSampler = std::function<Matrix(std::size_t rows, std::size_t cols, double sigma, RngStream&)>;

/// Draws a 256 x 256 matrix from `sampler` and checks its mean square against
/// sigma^2 within `tolerance` relative. Run before any init-family sweep.
Verdict check_init_calibration(const std::string& label, const MatrixSampler& sampler, double sigma,
                               std::uint64_t seed, double tolerance = 0.02);

}  // namespace nope
