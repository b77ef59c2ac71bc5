#pragma once

#include <span>
#include <vector>

#include "nope/numerics/matrix.hpp"

namespace nope {

/// (x_i - mean) / sqrt(S + epsilon) * gamma + beta, with S the biased sample
/// variance over the vector. A constant vector with epsilon == 0 throws
/// std::domain_error. Needs at least two entries.
std::vector<double> layer_norm(std::span<const double> x, double gamma = 1.0, double beta = 0.0,
                               double epsilon = 0.0);

/// Applies layer_norm to every row.
Matrix layer_norm_rows(const Matrix& x, double gamma = 1.0, double beta = 0.0,
                       double epsilon = 0.0);

}  // namespace nope
