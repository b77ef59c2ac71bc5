#include "nope/model/model.hpp"

#include <bit>
#include <stdexcept>
#include <string>

#include "nope/errors.hpp"
#include "nope/numerics/sampling.hpp"

namespace nope {
namespace {

enum class WeightTensor : std::uint64_t { query = 0, key = 1, value = 2, output = 3, ffn_in = 4, ffn_out = 5 };

RngStream weight_stream(const ModelConfig& c, std::size_t layer, WeightTensor tensor, std::size_t head) {
  const std::uint64_t id = kWeightStreamBase | (static_cast<std::uint64_t>(layer) << 32) |
                           (static_cast<std::uint64_t>(tensor) << 24) | static_cast<std::uint64_t>(head);
  return RngStream(c.seed, id);
}

Matrix sample_weight(const ModelConfig& c, std::size_t rows, std::size_t cols, std::size_t layer,
                     WeightTensor tensor, std::size_t head) {
  RngStream rng = weight_stream(c, layer, tensor, head);
  return sample_zero_mean_matrix(rows, cols, c.sigma, c.init_family, rng);
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(what + " has shape " + m.shape_string() + ", expected " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
}

void fnv_mix(std::uint64_t& h, const Matrix& m) {
  for (double v : m.data()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= bits & 0xffu;
      h *= 0x100000001b3ull;
      bits >>= 8;
    }
  }
}

}  // namespace

FrozenModel::FrozenModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d;
  const std::size_t dh = config_.head_dim();
  layers_.resize(config_.layers);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    LayerWeights& w = layers_[l];
    for (std::size_t h = 0; h < config_.heads; ++h) {
      w.w_q.push_back(sample_weight(config_, dh, d, l, WeightTensor::query, h));
      w.w_k.push_back(sample_weight(config_, dh, d, l, WeightTensor::key, h));
      w.w_v.push_back(sample_weight(config_, dh, d, l, WeightTensor::value, h));
    }
    w.w_o = sample_weight(config_, d, d, l, WeightTensor::output, 0);
    if (config_.ffn) {
      const std::size_t hidden = config_.ffn_multiplier * d;
      w.ffn = FfnWeights{sample_weight(config_, hidden, d, l, WeightTensor::ffn_in, 0),
                         std::vector<double>(hidden, 0.0),
                         sample_weight(config_, d, hidden, l, WeightTensor::ffn_out, 0),
                         std::vector<double>(d, 0.0)};
    }
  }
}

FrozenModel::FrozenModel(const ModelConfig& config, std::vector<LayerWeights> layers)
    : config_(config), layers_(std::move(layers)) {
  config_.validate();
  if (layers_.size() != config_.layers) {
    throw ShapeError("FrozenModel: got " + std::to_string(layers_.size()) + " layers, config has " +
                     std::to_string(config_.layers));
  }
  const std::size_t d = config_.d;
  const std::size_t dh = config_.head_dim();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& w = layers_[l];
    const std::string prefix = "layer " + std::to_string(l) + " ";
    if (w.w_q.size() != config_.heads || w.w_k.size() != config_.heads || w.w_v.size() != config_.heads) {
      throw ShapeError(prefix + "does not have " + std::to_string(config_.heads) + " heads");
    }
    for (std::size_t h = 0; h < config_.heads; ++h) {
      expect_shape(w.w_q[h], dh, d, prefix + "W_q");
      expect_shape(w.w_k[h], dh, d, prefix + "W_k");
      expect_shape(w.w_v[h], dh, d, prefix + "W_v");
    }
    expect_shape(w.w_o, d, d, prefix + "W_o");
    if (config_.ffn != w.ffn.has_value()) {
      throw ShapeError(prefix + "FFN presence does not match config.ffn");
    }
    if (w.ffn) {
      const std::size_t hidden = config_.ffn_multiplier * d;
      expect_shape(w.ffn->w_in, hidden, d, prefix + "FFN W_in");
      expect_shape(w.ffn->w_out, d, hidden, prefix + "FFN W_out");
      if (w.ffn->b_in.size() != hidden || w.ffn->b_out.size() != d) {
        throw ShapeError(prefix + "FFN bias lengths do not match");
      }
    }
  }
}

std::uint64_t FrozenModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& w : layers_) {
    for (const auto& m : w.w_q) fnv_mix(h, m);
    for (const auto& m : w.w_k) fnv_mix(h, m);
    for (const auto& m : w.w_v) fnv_mix(h, m);
    fnv_mix(h, w.w_o);
    if (w.ffn) {
      fnv_mix(h, w.ffn->w_in);
      fnv_mix(h, w.ffn->w_out);
      fnv_mix(h, Matrix(1, w.ffn->b_in.size(), w.ffn->b_in));
      fnv_mix(h, Matrix(1, w.ffn->b_out.size(), w.ffn->b_out));
    }
  }
  return h;
}

FrozenModel init_model(const ModelConfig& config) { return FrozenModel(config); }

Matrix sample_inputs(const ModelConfig& config, RngStream& rng) {
  config.validate();
  if (rng.stream_id() >= kWeightStreamBase) {
    throw std::invalid_argument("sample_inputs: stream id collides with the weight stream range");
  }
  return sample_gaussian_matrix(config.seq_len, config.d, config.sigma, rng);
}

}  // namespace nope
