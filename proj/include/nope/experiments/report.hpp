#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nope/experiments/spec.hpp"

namespace nope {

enum class ReportFormat { csv, svg, text };

std::string_view to_string(ReportFormat format);
ReportFormat parse_report_format(std::string_view name);

/// One line of the canonical CSV.
struct CsvRow {
  std::string experiment;
  std::string curve;
  double x = 0.0;
  double y = 0.0;
  double theory_y = 0.0;  // NaN when the curve has no prediction
  std::uint64_t seed = 0;
};

/// Header experiment,curve,x,y,theory_y,seed followed by one row per curve
/// point. Floats use 17 significant digits; missing predictions print "nan".
std::string result_csv(const ExperimentResult& result);
/// Throws std::invalid_argument on a malformed header or row.
std::vector<CsvRow> read_csv(std::string_view text);

/// Standalone 800x600 SVG with log axes where the curves ask for them.
/// Measured values are solid lines, predictions dashed.
std::string result_svg(const ExperimentResult& result);

/// Config echo, verdicts with their comparisons, notes and runtime.
std::string result_text(const ExperimentResult& result);

/// Writes <experiment>.<ext> for each format plus every attachment into
/// out_dir (created if missing). Throws IoError naming the path on failure.
std::vector<std::filesystem::path> emit_report(const ExperimentResult& result,
                                               std::span<const ReportFormat> formats,
                                               const std::filesystem::path& out_dir);

}  // namespace nope
