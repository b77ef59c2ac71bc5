#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nope/model/config.hpp"
#include "nope/probe/training.hpp"

namespace nope {

enum class ExperimentId {
  lemma1,
  lemma2,
  property1_fig3,
  lemma3_fig4,
  sigma_sweep_fig5,
  init_sweep,
  lemma4,
  bert_mode,
  probe_fig2,
};

std::string_view to_string(ExperimentId id);
ExperimentId parse_experiment_id(std::string_view name);
/// Every experiment, in the order `nope-lab all` runs them.
std::vector<ExperimentId> all_experiments();

struct ProbeExperimentOptions {
  ProbeConfig probe;
  std::size_t seeds = 5;
  bool bidirectional_control = true;
};

struct ExperimentSpec {
  ExperimentId id = ExperimentId::lemma1;
  ModelConfig config;
  std::size_t n_samples = 500;
  std::filesystem::path out_dir = "out";
  std::vector<double> sigmas;          // sigma-sweep
  std::vector<InitFamily> families;    // init-sweep
  std::vector<std::size_t> positions;  // lemma4 positions m
  std::size_t lemma4_dims = 16;
  std::map<std::string, double> tolerance_overrides;
  ProbeExperimentOptions probe;

  /// Throws std::invalid_argument when n_samples < 2 or lists are malformed.
  void validate() const;
};

/// Defaults per experiment: the GPT-sized single layer at sigma = 0.02 for
/// the lemma checks, sigma = 0.002 for the 1/m curves, and the desk probe
/// model for probing.
ExperimentSpec default_spec(ExperimentId id, std::uint64_t seed = 42);

/// Monte-Carlo tolerances are pinned at a reference sample count and widen
/// as 1/sqrt(n) below it. Overrides replace the scaled value.
double scaled_tolerance(const ExperimentSpec& spec, const std::string& key, double base,
                        std::size_t reference_samples);

struct Curve {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> theory;  // NaN where no prediction exists
  bool log_x = false;
  bool log_y = false;
};

/// One numeric comparison and its outcome.
struct Verdict {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  std::string comparison;  // e.g. "max_rel_err 0.0123 < 0.05"
  bool passed = false;
};

Verdict verdict_less(std::string name, std::string quantity, double measured, double threshold);
Verdict verdict_greater(std::string name, std::string quantity, double measured, double threshold);
Verdict verdict_greater_equal(std::string name, std::string quantity, double measured, double threshold);
/// |measured - target| < tolerance
Verdict verdict_within(std::string name, std::string quantity, double measured, double target,
                       double tolerance);

struct Attachment {
  std::string filename;
  std::string content;
};

struct ExperimentResult {
  std::string experiment;
  std::string x_label = "x";
  std::string y_label = "y";
  std::vector<Curve> curves;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;
  std::vector<Attachment> attachments;
  double runtime_seconds = 0.0;
  ModelConfig config;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;

  bool passed() const;
};

}  // namespace nope
