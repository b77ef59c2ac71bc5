#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nope/numerics/sampling.hpp"

namespace nope {

enum class AttentionMode { causal, bidirectional };

std::string_view to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view name);

/// Architecture and initialization of a frozen Pre-LN transformer without
/// positional embeddings. Defaults are the single-layer GPT-sized model used
/// for the variance checks.
struct ModelConfig {
  std::size_t d = 768;
  std::size_t heads = 12;
  std::size_t seq_len = 512;
  std::size_t layers = 1;
  double sigma = 0.02;
  AttentionMode attention_mode = AttentionMode::causal;
  bool ffn = false;
  std::size_t ffn_multiplier = 4;
  // Inside the square root. Inputs have variance sigma^2, which reaches
  // 4e-6 at sigma = 0.002, so the usual 1e-5 would dominate S(x).
  double ln_epsilon = 1e-12;
  double gamma = 1.0;
  double beta = 0.0;
  InitFamily init_family = InitFamily::gaussian;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return d / heads; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Reduced model for the probing runs: d=256, H=8, L=128, 4 layers, FFN on.
ModelConfig desk_probe_config();

// Flat "key = value" format, one entry per line, '#' starts a comment.
// Keys: d, heads, seq_len, layers, sigma, attention_mode, ffn, ffn_multiplier,
// ln_epsilon, gamma, beta, init_family, seed. Missing keys keep defaults.
ModelConfig parse_config(std::string_view text, ModelConfig base = {});
std::string format_config(const ModelConfig& config);
ModelConfig load_config(const std::filesystem::path& path, ModelConfig base = {});
void save_config(const ModelConfig& config, const std::filesystem::path& path);

}  // namespace nope
