#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nope/experiments/report.hpp"
#include "nope/experiments/runners.hpp"
#include "nope/theory/theory.hpp"

namespace {

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::size_t> samples;
  std::vector<double> sigmas;
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::vector<std::string> formats;
};

nope::ExperimentSpec build_spec(nope::ExperimentId id, const Options& opt) {
  nope::ExperimentSpec spec = nope::default_spec(id, opt.seed);
  if (!opt.config_path.empty()) {
    spec.config = nope::load_config(opt.config_path, spec.config);
    spec.config.seed = opt.seed;
  }
  if (opt.samples) spec.n_samples = *opt.samples;
  if (!opt.sigmas.empty()) {
    if (id == nope::ExperimentId::sigma_sweep_fig5) {
      spec.sigmas = opt.sigmas;
    } else {
      spec.config.sigma = opt.sigmas.front();
    }
  }
  spec.out_dir = opt.out_dir;
  return spec;
}

int print_theory(const Options& opt) {
  nope::ModelConfig config;
  if (!opt.config_path.empty()) config = nope::load_config(opt.config_path);
  if (!opt.sigmas.empty()) config.sigma = opt.sigmas.front();
  config.validate();
  std::cout << nope::format_theory(nope::predict(config));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo checks of position information in frozen NoPE transformers"};
  Options opt;
  std::string experiments = "all, print-theory";
  for (auto id : nope::all_experiments()) experiments += ", " + std::string(nope::to_string(id));
  app.add_option("command", opt.command, "one of: " + experiments)->required();
  app.add_option("--config", opt.config_path, "key = value model config")->check(CLI::ExistingFile);
  app.add_option("--samples", opt.samples, "Monte-Carlo sample count")->check(CLI::PositiveNumber);
  app.add_option("--sigma", opt.sigmas, "weight scale; repeat for the sigma sweep");
  app.add_option("--seed", opt.seed, "master seed")->capture_default_str();
  app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
  app.add_option("--format", opt.formats, "csv, svg or text; repeatable (default: all three)")
      ->check(CLI::IsMember({"csv", "svg", "text"}));
  CLI11_PARSE(app, argc, argv);

  try {
    if (opt.command == "print-theory") return print_theory(opt);

    std::vector<nope::ExperimentId> ids;
    if (opt.command == "all") {
      ids = nope::all_experiments();
    } else {
      ids.push_back(nope::parse_experiment_id(opt.command));
    }
    std::vector<nope::ReportFormat> formats;
    for (const auto& f : opt.formats) formats.push_back(nope::parse_report_format(f));
    if (formats.empty()) formats = {nope::ReportFormat::csv, nope::ReportFormat::svg, nope::ReportFormat::text};

    nope::ExperimentContext ctx;
    bool all_passed = true;
    for (auto id : ids) {
      const nope::ExperimentSpec spec = build_spec(id, opt);
      const nope::ExperimentResult result = nope::run_experiment(spec, ctx);
      nope::emit_report(result, formats, spec.out_dir);
      std::printf("%s %s (%.1f s)\n", result.passed() ? "PASS" : "FAIL", result.experiment.c_str(),
                  result.runtime_seconds);
      for (const auto& v : result.verdicts) {
        std::printf("  [%s] %s: %s\n", v.passed ? "PASS" : "FAIL", v.name.c_str(), v.comparison.c_str());
      }
      std::fflush(stdout);
      all_passed = all_passed && result.passed();
    }
    return all_passed ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nope-lab: %s\n", e.what());
    return 2;
  }
}
