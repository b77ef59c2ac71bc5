#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nope/model/config.hpp"
#include "nope/model/weights.hpp"
#include "nope/numerics/matrix.hpp"
#include "nope/numerics/rng.hpp"

namespace nope {

/// Stream ids at or above this value are reserved for weight sampling.
/// Input sequences use small stream ids (the Monte-Carlo sample index).
inline constexpr std::uint64_t kWeightStreamBase = std::uint64_t{1} << 63;

/// A randomly initialized transformer whose weights never change after
/// construction.
class FrozenModel {
 public:
  /// Samples every weight from the configured family with variance sigma^2.
  /// FFN biases start at zero.
  explicit FrozenModel(const ModelConfig& config);
  /// Wraps explicit weights; shapes are checked against the config.
  FrozenModel(const ModelConfig& config, std::vector<LayerWeights> layers);

  const ModelConfig& config() const { return config_; }
  std::size_t num_layers() const { return layers_.size(); }
  const LayerWeights& layer(std::size_t i) const { return layers_.at(i); }
  std::span<const LayerWeights> layers() const { return layers_; }

  /// FNV-1a over the bit patterns of every weight.
  std::uint64_t checksum() const;

 private:
  ModelConfig config_;
  std::vector<LayerWeights> layers_;
};

FrozenModel init_model(const ModelConfig& config);

/// L x d matrix of i.i.d. N(0, sigma^2) input vectors.
Matrix sample_inputs(const ModelConfig& config, RngStream& rng);

}  // namespace nope
