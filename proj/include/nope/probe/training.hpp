#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nope/model/model.hpp"
#include "nope/probe/probe.hpp"

namespace nope {

struct ProbeConfig {
  std::size_t hidden = 0;  // 0 means the model width d
  std::size_t steps = 5000;
  std::size_t batch = 32;  // (representation, position) pairs per update
  AdamConfig adam;
  std::size_t eval_sequences = 64;
  ProbeLoss loss = ProbeLoss::l1;
  ProbeInit init = ProbeInit::random;
};

struct ProbeSeeds {
  std::uint64_t probe = 0;  // probe initialization
  std::uint64_t data = 0;   // training and held-out input sequences
};

/// Held-out sequences use stream ids from here on; training uses 0, 1, 2, ...
inline constexpr std::uint64_t kEvalStreamBase = std::uint64_t{1} << 40;

struct ProbeReport {
  std::size_t layer = 0;
  std::uint64_t seed = 0;
  std::vector<double> position_mae;  // index m-1, token units
  double global_mae = 0.0;
  double baseline_mae = 0.0;
  std::vector<double> train_loss;    // one entry per update
};

struct ProbeRun {
  ProbeModel probe;
  ProbeReport report;
};

/// Mean |m - L/2| over m = 1..L: the error of always predicting the middle.
/// Equals L/4 for even L.
double baseline_mae(std::size_t seq_len);

/// Trains one probe per requested depth on the same stream of freshly
/// sampled sequences. Targets are m/L; predictions are multiplied by L
/// for MAE. Depth k reads the residual stream after k layers through a
/// fresh final layer norm. The frozen model is only read.
std::vector<ProbeRun> train_probes(const FrozenModel& model, std::span<const std::size_t> depths,
                                   const ProbeConfig& config, ProbeSeeds seeds);

ProbeRun train_probe(const FrozenModel& model, std::size_t depth, const ProbeConfig& config,
                     ProbeSeeds seeds);

/// Per-position MAE of a probe on held-out sequences.
ProbeReport evaluate_probe(const FrozenModel& model, const ProbeModel& probe, std::size_t depth,
                           std::size_t sequences, std::uint64_t data_seed);

/// Columns layer,position,mae,seed; each report also gets "global" and
/// "baseline" summary rows in the position column.
std::string probe_reports_csv(std::span<const ProbeReport> reports);
/// Columns step,loss.
std::string training_curve_csv(const ProbeReport& report);

}  // namespace nope
