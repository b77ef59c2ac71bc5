#include "nope/experiments/spec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace nope {
namespace {

struct IdName {
  ExperimentId id;
  std::string_view name;
};

constexpr IdName kNames[] = {
    {ExperimentId::lemma1, "lemma1"},
    {ExperimentId::lemma2, "lemma2"},
    {ExperimentId::property1_fig3, "property1-fig3"},
    {ExperimentId::lemma3_fig4, "lemma3-fig4"},
    {ExperimentId::sigma_sweep_fig5, "sigma-sweep-fig5"},
    {ExperimentId::init_sweep, "init-sweep"},
    {ExperimentId::lemma4, "lemma4"},
    {ExperimentId::bert_mode, "bert-mode"},
    {ExperimentId::probe_fig2, "probe-fig2"},
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string_view to_string(ExperimentId id) {
  for (const auto& n : kNames)
    if (n.id == id) return n.name;
  return "unknown";
}

ExperimentId parse_experiment_id(std::string_view name) {
  for (const auto& n : kNames)
    if (n.name == name) return n.id;
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

std::vector<ExperimentId> all_experiments() {
  std::vector<ExperimentId> out;
  for (const auto& n : kNames) out.push_back(n.id);
  return out;
}

void ExperimentSpec::validate() const {
  config.validate();
  if (n_samples < 2) {
    throw std::invalid_argument("n_samples must be at least 2, got " + std::to_string(n_samples));
  }
  for (double s : sigmas) {
    if (!(s > 0.0)) throw std::invalid_argument("sweep sigma values must be positive");
  }
  for (std::size_t m : positions) {
    if (m < 1 || m > config.seq_len) {
      throw std::invalid_argument("position " + std::to_string(m) + " outside [1, seq_len]");
    }
  }
  if (probe.seeds == 0) throw std::invalid_argument("probe seeds must be positive");
}

ExperimentSpec default_spec(ExperimentId id, std::uint64_t seed) {
  ExperimentSpec spec;
  spec.id = id;
  spec.config.seed = seed;
  switch (id) {
    case ExperimentId::lemma3_fig4:
    case ExperimentId::init_sweep:
    case ExperimentId::bert_mode:
      spec.config.sigma = 0.002;
      break;
    case ExperimentId::sigma_sweep_fig5:
      spec.sigmas = {0.2, 0.02, 0.002};
      break;
    case ExperimentId::lemma4:
      spec.n_samples = 2000;
      spec.positions = {1, 4, 16, 64, 256, 512};
      break;
    case ExperimentId::probe_fig2:
      spec.config = desk_probe_config();
      spec.config.seed = seed;
      break;
    default:
      break;
  }
  if (id == ExperimentId::bert_mode) spec.config.attention_mode = AttentionMode::bidirectional;
  if (id == ExperimentId::init_sweep) {
    spec.families = {InitFamily::gaussian, InitFamily::uniform, InitFamily::rademacher};
  }
  return spec;
}

double scaled_tolerance(const ExperimentSpec& spec, const std::string& key, double base,
                        std::size_t reference_samples) {
  if (auto it = spec.tolerance_overrides.find(key); it != spec.tolerance_overrides.end()) {
    return it->second;
  }
  const double ratio = static_cast<double>(reference_samples) / static_cast<double>(spec.n_samples);
  return base * std::max(1.0, std::sqrt(ratio));
}

Verdict verdict_less(std::string name, std::string quantity, double measured, double threshold) {
  Verdict v{std::move(name), measured, threshold, {}, measured < threshold};
  v.comparison = quantity + " " + num(measured) + " < " + num(threshold);
  return v;
}

Verdict verdict_greater(std::string name, std::string quantity, double measured, double threshold) {
  Verdict v{std::move(name), measured, threshold, {}, measured > threshold};
  v.comparison = quantity + " " + num(measured) + " > " + num(threshold);
  return v;
}

Verdict verdict_greater_equal(std::string name, std::string quantity, double measured,
                              double threshold) {
  Verdict v{std::move(name), measured, threshold, {}, measured >= threshold};
  v.comparison = quantity + " " + num(measured) + " >= " + num(threshold);
  return v;
}

Verdict verdict_within(std::string name, std::string quantity, double measured, double target,
                       double tolerance) {
  Verdict v{std::move(name), measured, tolerance, {}, std::abs(measured - target) < tolerance};
  v.comparison = "|" + quantity + " " + num(measured) + " - " + num(target) + "| < " + num(tolerance);
  return v;
}

bool ExperimentResult::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
}

}  // namespace nope
