#include "nope/model/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nope/errors.hpp"

namespace nope {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class Int>
Int parse_int(std::string_view key, std::string_view value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw std::invalid_argument("config: key '" + std::string(key) + "' expects an integer, got '" +
                                std::string(value) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  const std::string text(value);
  char* end = nullptr;
  const double out = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw std::invalid_argument("config: key '" + std::string(key) + "' expects a number, got '" +
                                text + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  throw std::invalid_argument("config: key '" + std::string(key) + "' expects true/false, got '" +
                              std::string(value) + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(AttentionMode mode) {
  return mode == AttentionMode::causal ? "causal" : "bidirectional";
}

AttentionMode parse_attention_mode(std::string_view name) {
  if (name == "causal") return AttentionMode::causal;
  if (name == "bidirectional") return AttentionMode::bidirectional;
  throw std::invalid_argument("unknown attention mode '" + std::string(name) +
                              "' (expected causal or bidirectional)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("ModelConfig." + field + ": " + why);
  };
  if (d < 2) fail("d", "must be at least 2, got " + std::to_string(d));
  if (heads == 0) fail("heads", "must be positive");
  if (d % heads != 0) {
    fail("heads", "d=" + std::to_string(d) + " is not divisible by heads=" + std::to_string(heads));
  }
  if (seq_len == 0) fail("seq_len", "must be at least 1");
  if (layers == 0) fail("layers", "must be at least 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("sigma", "must be positive and finite");
  if (ffn && ffn_multiplier == 0) fail("ffn_multiplier", "must be positive when ffn is enabled");
  if (!(ln_epsilon >= 0.0) || !std::isfinite(ln_epsilon)) fail("ln_epsilon", "must be >= 0");
  if (!std::isfinite(gamma)) fail("gamma", "must be finite");
  if (!std::isfinite(beta)) fail("beta", "must be finite");
}

ModelConfig desk_probe_config() {
  ModelConfig c;
  c.d = 256;
  c.heads = 8;
  c.seq_len = 128;
  c.layers = 4;
  c.sigma = 0.02;
  c.ffn = true;
  return c;
}

ModelConfig parse_config(std::string_view text, ModelConfig base) {
  ModelConfig c = base;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "d") c.d = parse_int<std::size_t>(key, value);
    else if (key == "heads") c.heads = parse_int<std::size_t>(key, value);
    else if (key == "seq_len") c.seq_len = parse_int<std::size_t>(key, value);
    else if (key == "layers") c.layers = parse_int<std::size_t>(key, value);
    else if (key == "sigma") c.sigma = parse_double(key, value);
    else if (key == "attention_mode") c.attention_mode = parse_attention_mode(value);
    else if (key == "ffn") c.ffn = parse_bool(key, value);
    else if (key == "ffn_multiplier") c.ffn_multiplier = parse_int<std::size_t>(key, value);
    else if (key == "ln_epsilon") c.ln_epsilon = parse_double(key, value);
    else if (key == "gamma") c.gamma = parse_double(key, value);
    else if (key == "beta") c.beta = parse_double(key, value);
    else if (key == "init_family") c.init_family = parse_init_family(value);
    else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, value);
    else throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" +
                                     std::string(key) + "'");
  }
  c.validate();
  return c;
}

std::string format_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "d = " << c.d << '\n'
      << "heads = " << c.heads << '\n'
      << "seq_len = " << c.seq_len << '\n'
      << "layers = " << c.layers << '\n'
      << "sigma = " << format_double(c.sigma) << '\n'
      << "attention_mode = " << to_string(c.attention_mode) << '\n'
      << "ffn = " << (c.ffn ? "true" : "false") << '\n'
      << "ffn_multiplier = " << c.ffn_multiplier << '\n'
      << "ln_epsilon = " << format_double(c.ln_epsilon) << '\n'
      << "gamma = " << format_double(c.gamma) << '\n'
      << "beta = " << format_double(c.beta) << '\n'
      << "init_family = " << to_string(c.init_family) << '\n'
      << "seed = " << c.seed << '\n';
  return out.str();
}

ModelConfig load_config(const std::filesystem::path& path, ModelConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), base);
}

void save_config(const ModelConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file " + path.string());
  out << format_config(config);
  if (!out) throw IoError("failed writing config file " + path.string());
}

}  // namespace nope
