#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "nope/model/model.hpp"
#include "nope/numerics/matrix.hpp"
#include "nope/numerics/stats.hpp"

namespace nope {

enum class Tensor : unsigned {
  input,         // x_m
  ln_out,        // e_m, per layer
  logits,        // l_mn per head, per layer
  attention,     // a_mn per head, per layer
  values,        // v_n per head, per layer
  mha_output,    // o_m, per layer
  residual,      // y_m = layer input + o_m, per layer
  layer_output,  // residual stream after the layer (includes FFN)
  final_output,  // y'_m after the final layer norm
};

/// Which tensors forward() keeps. Logits are excluded by default since they
/// cost L x L x H doubles per layer.
class CaptureSet {
 public:
  constexpr CaptureSet() = default;
  static constexpr CaptureSet none() { return CaptureSet(0u); }
  static constexpr CaptureSet standard() {
    return CaptureSet(~0u & ~bit(Tensor::logits));
  }
  static constexpr CaptureSet everything() { return CaptureSet(~0u); }

  constexpr CaptureSet with(Tensor t) const { return CaptureSet(bits_ | bit(t)); }
  constexpr bool has(Tensor t) const { return (bits_ & bit(t)) != 0; }

 private:
  constexpr explicit CaptureSet(unsigned bits) : bits_(bits) {}
  static constexpr unsigned bit(Tensor t) { return 1u << static_cast<unsigned>(t); }
  unsigned bits_ = ~0u & ~(1u << static_cast<unsigned>(Tensor::logits));
};

struct LayerTrace {
  Matrix ln_out;
  std::vector<Matrix> logits;
  std::vector<Matrix> attention;
  std::vector<Matrix> values;
  Matrix mha_output;
  Matrix residual;
  Matrix layer_output;
};

/// Tensors captured during one forward pass. Uncaptured entries are empty.
struct TraceBundle {
  Matrix input;
  std::vector<LayerTrace> layers;
  Matrix final_output;
};

/// Runs every layer as LN -> MHA -> add (then LN -> FFN -> add when the FFN
/// is enabled) and applies the final layer norm.
TraceBundle forward(const FrozenModel& model, const Matrix& x,
                    CaptureSet capture = CaptureSet::standard());

/// Residual stream after the first `depth` layers, normalized by a fresh
/// final layer norm. depth == num_layers gives the model's own output.
std::vector<Matrix> normalized_depth_outputs(const FrozenModel& model, const Matrix& x);

/// Names one L x d tensor in a trace: "input", "final", or
/// "<ln|mha|residual|output>[:layer]".
struct TensorSelector {
  Tensor tensor = Tensor::mha_output;
  std::size_t layer = 0;
};

/// Throws std::invalid_argument for unknown names.
TensorSelector parse_selector(std::string_view text);

/// The selected tensor of a trace; throws std::invalid_argument when the
/// selector is not an L x d tensor or was not captured.
const Matrix& select(const TraceBundle& trace, TensorSelector selector);

/// Pooled per-position variance of the selected tensor across traces.
std::vector<double> per_position_variance(std::span<const TraceBundle> traces,
                                          TensorSelector selector,
                                          VarianceKind kind = VarianceKind::biased);

}  // namespace nope
