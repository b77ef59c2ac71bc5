#pragma once

#include <optional>
#include <vector>

#include "nope/numerics/matrix.hpp"

namespace nope {

struct FfnWeights {
  Matrix w_in;               // (multiplier * d) x d
  std::vector<double> b_in;  // multiplier * d
  Matrix w_out;              // d x (multiplier * d)
  std::vector<double> b_out; // d
};

/// Weights of one transformer layer. Query, key and value projections are
/// kept per head, each (d/H) x d; the output projection is d x d.
struct LayerWeights {
  std::vector<Matrix> w_q;
  std::vector<Matrix> w_k;
  std::vector<Matrix> w_v;
  Matrix w_o;
  std::optional<FfnWeights> ffn;

  std::size_t heads() const { return w_q.size(); }
  /// Per-head value projections stacked in head order into one d x d matrix.
  Matrix stacked_values() const;
};

}  // namespace nope
