#include "nope/probe/training.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nope/model/trace.hpp"

namespace nope {
namespace {

void check_depth(const FrozenModel& model, std::size_t depth) {
  if (depth > model.num_layers()) {
    throw std::invalid_argument("probe depth " + std::to_string(depth) + " exceeds the " +
                                std::to_string(model.num_layers()) + "-layer model");
  }
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Serves training pairs from freshly sampled sequences, each consumed in a
/// random position order.
class PairStream {
 public:
  PairStream(const FrozenModel& model, std::span<const std::size_t> depths, std::uint64_t data_seed)
      : model_(model), depths_(depths.begin(), depths.end()), data_seed_(data_seed),
        shuffle_rng_(data_seed, kEvalStreamBase - 1) {}

  /// Fills one batch matrix per depth plus the shared targets.
  void next(std::size_t batch, std::vector<Matrix>& xs, std::vector<double>& targets) {
    while (queue_.size() < batch) load_sequence();
    const std::size_t d = model_.config().d;
    const double len = static_cast<double>(model_.config().seq_len);
    xs.assign(depths_.size(), Matrix(batch, d));
    targets.resize(batch);
    for (std::size_t r = 0; r < batch; ++r) {
      const auto [seq, pos] = queue_.front();
      queue_.pop_front();
      const auto& reps = sequences_[seq - first_sequence_];
      for (std::size_t k = 0; k < depths_.size(); ++k) {
        const auto src = reps[k].row(pos);
        std::copy(src.begin(), src.end(), xs[k].row(r).begin());
      }
      targets[r] = static_cast<double>(pos + 1) / len;
    }
    const std::size_t oldest_needed = queue_.empty() ? next_sequence_ : queue_.front().first;
    while (first_sequence_ < oldest_needed) {
      sequences_.pop_front();
      ++first_sequence_;
    }
  }

 private:
  void load_sequence() {
    RngStream rng(data_seed_, next_sequence_);
    const Matrix x = sample_inputs(model_.config(), rng);
    auto all = normalized_depth_outputs(model_, x);
    std::vector<Matrix> reps;
    reps.reserve(depths_.size());
    for (std::size_t depth : depths_) reps.push_back(all[depth]);
    sequences_.push_back(std::move(reps));

    const std::size_t len = model_.config().seq_len;
    std::vector<std::size_t> order(len);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = len; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng_.next_below(i)]);
    for (std::size_t pos : order) queue_.emplace_back(next_sequence_, pos);
    ++next_sequence_;
  }

  const FrozenModel& model_;
  std::vector<std::size_t> depths_;
  std::uint64_t data_seed_;
  RngStream shuffle_rng_;
  std::deque<std::vector<Matrix>> sequences_;
  std::deque<std::pair<std::size_t, std::size_t>> queue_;
  std::size_t first_sequence_ = 0;
  std::size_t next_sequence_ = 0;
};

}  // namespace

double baseline_mae(std::size_t seq_len) {
  if (seq_len == 0) throw std::invalid_argument("baseline_mae: empty sequence");
  const double mid = static_cast<double>(seq_len) / 2.0;
  double total = 0.0;
  for (std::size_t m = 1; m <= seq_len; ++m) total += std::abs(static_cast<double>(m) - mid);
  return total / static_cast<double>(seq_len);
}

std::vector<ProbeRun> train_probes(const FrozenModel& model, std::span<const std::size_t> depths,
                                   const ProbeConfig& config, ProbeSeeds seeds) {
  if (depths.empty()) throw std::invalid_argument("train_probes: no depths requested");
  for (std::size_t depth : depths) check_depth(model, depth);
  if (config.batch == 0) throw std::invalid_argument("train_probes: batch must be positive");
  const std::size_t d = model.config().d;
  const std::size_t hidden = config.hidden == 0 ? d : config.hidden;

  std::vector<ProbeRun> runs(depths.size());
  for (std::size_t k = 0; k < depths.size(); ++k) {
    RngStream init_rng(seeds.probe, depths[k]);
    runs[k].probe = make_probe(d, hidden, config.init, init_rng);
    runs[k].report.train_loss.reserve(config.steps);
  }

  PairStream stream(model, depths, seeds.data);
  std::vector<Matrix> xs;
  std::vector<double> targets;
  for (std::size_t step = 0; step < config.steps; ++step) {
    stream.next(config.batch, xs, targets);
    for (std::size_t k = 0; k < depths.size(); ++k) {
      const ProbeGradients g = probe_backward(runs[k].probe, xs[k], targets, config.loss);
      adam_step(runs[k].probe, g.grads, config.adam);
      runs[k].report.train_loss.push_back(g.loss);
    }
  }

  for (std::size_t k = 0; k < depths.size(); ++k) {
    ProbeReport eval = evaluate_probe(model, runs[k].probe, depths[k], config.eval_sequences, seeds.data);
    eval.train_loss = std::move(runs[k].report.train_loss);
    eval.seed = seeds.data;
    runs[k].report = std::move(eval);
  }
  return runs;
}

ProbeRun train_probe(const FrozenModel& model, std::size_t depth, const ProbeConfig& config,
                     ProbeSeeds seeds) {
  const std::size_t depths[] = {depth};
  auto runs = train_probes(model, depths, config, seeds);
  return std::move(runs.front());
}

ProbeReport evaluate_probe(const FrozenModel& model, const ProbeModel& probe, std::size_t depth,
                           std::size_t sequences, std::uint64_t data_seed) {
  check_depth(model, depth);
  if (sequences == 0) throw std::invalid_argument("evaluate_probe: need at least one sequence");
  const std::size_t len = model.config().seq_len;
  const double scale = static_cast<double>(len);
  ProbeReport report;
  report.layer = depth;
  report.seed = data_seed;
  report.position_mae.assign(len, 0.0);
  for (std::size_t s = 0; s < sequences; ++s) {
    RngStream rng(data_seed, kEvalStreamBase + s);
    const Matrix x = sample_inputs(model.config(), rng);
    const auto reps = normalized_depth_outputs(model, x);
    const auto preds = probe_forward_batch(probe, reps[depth]);
    for (std::size_t m = 0; m < len; ++m) {
      report.position_mae[m] += std::abs(preds[m] * scale - static_cast<double>(m + 1));
    }
  }
  for (double& v : report.position_mae) v /= static_cast<double>(sequences);
  report.global_mae = std::accumulate(report.position_mae.begin(), report.position_mae.end(), 0.0) /
                      static_cast<double>(len);
  report.baseline_mae = baseline_mae(len);
  return report;
}

std::string probe_reports_csv(std::span<const ProbeReport> reports) {
  std::ostringstream out;
  out << "layer,position,mae,seed\n";
  for (const auto& r : reports) {
    for (std::size_t m = 0; m < r.position_mae.size(); ++m) {
      out << r.layer << ',' << (m + 1) << ',' << fmt17(r.position_mae[m]) << ',' << r.seed << '\n';
    }
    out << r.layer << ",global," << fmt17(r.global_mae) << ',' << r.seed << '\n';
    out << r.layer << ",baseline," << fmt17(r.baseline_mae) << ',' << r.seed << '\n';
  }
  return out.str();
}

std::string training_curve_csv(const ProbeReport& report) {
  std::ostringstream out;
  out << "step,loss\n";
  for (std::size_t i = 0; i < report.train_loss.size(); ++i) {
    out << (i + 1) << ',' << fmt17(report.train_loss[i]) << '\n';
  }
  return out.str();
}

}  // namespace nope
