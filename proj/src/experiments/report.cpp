#include "nope/experiments/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "nope/errors.hpp"
#include "nope/model/config.hpp"

namespace nope {
namespace {

constexpr std::string_view kCsvHeader = "experiment,curve,x,y,theory_y,seed";

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double parse_double(const std::string& field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || field.empty()) throw std::invalid_argument("bad number '" + field + "' in CSV");
  return v;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0;
  double hi = 1.0;
  double pixel_lo = 0.0;
  double pixel_hi = 1.0;

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double to_unit(double v) const { return log ? std::log10(v) : v; }
  double map(double v) const {
    const double a = to_unit(lo), b = to_unit(hi);
    const double t = b > a ? (to_unit(v) - a) / (b - a) : 0.5;
    return pixel_lo + t * (pixel_hi - pixel_lo);
  }
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push_back(v);
      }
      if (out.size() < 2) out = {lo, hi};
    } else {
      for (int i = 0; i <= 4; ++i) out.push_back(lo + (hi - lo) * i / 4.0);
    }
    return out;
  }
};

void fit_range(Axis& axis, const std::vector<double>& values) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!axis.usable(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) {
    lo = axis.log ? 1.0 : 0.0;
    hi = axis.log ? 10.0 : 1.0;
  }
  if (hi == lo) {
    if (axis.log) {
      lo /= 2.0;
      hi *= 2.0;
    } else {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    }
  }
  axis.lo = lo;
  axis.hi = hi;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::svg: return "svg";
    case ReportFormat::text: return "text";
  }
  return "csv";
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "svg") return ReportFormat::svg;
  if (name == "text") return ReportFormat::text;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "'");
}

std::string result_csv(const ExperimentResult& result) {
  std::string out(kCsvHeader);
  out += '\n';
  const std::string seed = std::to_string(result.seed);
  for (const Curve& c : result.curves) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      const double theory = i < c.theory.size() ? c.theory[i] : std::numeric_limits<double>::quiet_NaN();
      out += result.experiment + ',' + c.name + ',' + fmt17(c.x[i]) + ',' + fmt17(c.y[i]) + ',' +
             fmt17(theory) + ',' + seed + '\n';
    }
  }
  return out;
}

std::vector<CsvRow> read_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::invalid_argument("CSV header must be '" + std::string(kCsvHeader) + "'");
  }
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 6) throw std::invalid_argument("CSV row needs 6 fields: '" + line + "'");
    CsvRow row;
    row.experiment = fields[0];
    row.curve = fields[1];
    row.x = parse_double(fields[2]);
    row.y = parse_double(fields[3]);
    row.theory_y = parse_double(fields[4]);
    try {
      row.seed = std::stoull(fields[5]);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad seed '" + fields[5] + "' in CSV");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string result_svg(const ExperimentResult& result) {
  constexpr double kWidth = 800, kHeight = 600;
  constexpr double kLeft = 90, kRight = 200, kTop = 50, kBottom = 70;
  Axis x_axis, y_axis;
  x_axis.log = !result.curves.empty() && result.curves.front().log_x;
  y_axis.log = !result.curves.empty() && result.curves.front().log_y;
  x_axis.pixel_lo = kLeft;
  x_axis.pixel_hi = kWidth - kRight;
  y_axis.pixel_lo = kHeight - kBottom;
  y_axis.pixel_hi = kTop;

  std::vector<double> xs, ys;
  for (const Curve& c : result.curves) {
    xs.insert(xs.end(), c.x.begin(), c.x.end());
    ys.insert(ys.end(), c.y.begin(), c.y.end());
    ys.insert(ys.end(), c.theory.begin(), c.theory.end());
  }
  fit_range(x_axis, xs);
  fit_range(y_axis, ys);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n"
      << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"18\">" << xml_escape(result.experiment) << "</text>\n";

  svg << "<g stroke=\"black\" fill=\"none\">\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << (kWidth - kLeft - kRight)
      << "\" height=\"" << (kHeight - kTop - kBottom) << "\"/>\n</g>\n";

  svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (double t : x_axis.ticks()) {
    const double px = x_axis.map(t);
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << fmt(px) << "\" y2=\""
        << kHeight - kBottom + 6 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << fmt(px) << "\" y=\"" << kHeight - kBottom + 20 << "\" text-anchor=\"middle\">"
        << xml_escape(fmt(t)) << "</text>\n";
  }
  for (double t : y_axis.ticks()) {
    const double py = y_axis.map(t);
    svg << "<line x1=\"" << kLeft - 6 << "\" y1=\"" << fmt(py) << "\" x2=\"" << kLeft << "\" y2=\"" << fmt(py)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kLeft - 10 << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">"
        << xml_escape(fmt(t, "%.3g")) << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 25
      << "\" text-anchor=\"middle\">" << xml_escape(result.x_label + (x_axis.log ? " (log)" : ""))
      << "</text>\n"
      << "<text transform=\"translate(22," << (kTop + kHeight - kBottom) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(result.y_label + (y_axis.log ? " (log)" : ""))
      << "</text>\n</g>\n";

  auto polyline = [&](const std::vector<double>& x, const std::vector<double>& y, const char* color,
                      bool dashed) {
    std::string points;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
      if (!x_axis.usable(x[i]) || !y_axis.usable(y[i])) continue;
      points += fmt(x_axis.map(x[i]), "%.2f") + ',' + fmt(y_axis.map(y[i]), "%.2f") + ' ';
    }
    if (points.empty()) return;
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
        << (dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << points << "\"/>\n";
  };

  for (std::size_t i = 0; i < result.curves.size(); ++i) {
    const Curve& c = result.curves[i];
    const char* color = kPalette[i % std::size(kPalette)];
    polyline(c.x, c.y, color, false);
    polyline(c.x, c.theory, color, true);
    const double ly = kTop + 16.0 * static_cast<double>(i) + 8.0;
    svg << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 32
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(c.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string result_text(const ExperimentResult& result) {
  std::ostringstream out;
  out << "experiment " << result.experiment << ": " << (result.passed() ? "PASS" : "FAIL") << '\n'
      << "samples " << result.n_samples << ", seed " << result.seed << ", runtime "
      << fmt(result.runtime_seconds, "%.1f") << " s\n\nconfig\n"
      << format_config(result.config) << "\nverdicts\n";
  for (const Verdict& v : result.verdicts) {
    out << "  [" << (v.passed ? "PASS" : "FAIL") << "] " << v.name << ": " << v.comparison << '\n';
  }
  if (!result.notes.empty()) {
    out << "\nnotes\n";
    for (const auto& n : result.notes) out << "  " << n << '\n';
  }
  return out.str();
}

std::vector<std::filesystem::path> emit_report(const ExperimentResult& result,
                                               std::span<const ReportFormat> formats,
                                               const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir.string() + "'");
  }
  std::vector<std::filesystem::path> written;
  for (ReportFormat f : formats) {
    std::filesystem::path path = out_dir / result.experiment;
    switch (f) {
      case ReportFormat::csv:
        path += ".csv";
        write_file(path, result_csv(result));
        break;
      case ReportFormat::svg:
        path += ".svg";
        write_file(path, result_svg(result));
        break;
      case ReportFormat::text:
        path += ".txt";
        write_file(path, result_text(result));
        break;
    }
    written.push_back(path);
  }
  for (const Attachment& a : result.attachments) {
    const auto path = out_dir / a.filename;
    write_file(path, a.content);
    written.push_back(path);
  }
  return written;
}

}  // namespace nope
