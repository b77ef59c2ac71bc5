#include "nope/model/layer_norm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nope {
namespace {

void normalize_into(std::span<const double> x, std::span<double> out, double gamma, double beta,
                    double epsilon) {
  if (x.size() < 2) {
    throw std::invalid_argument("layer_norm: need at least 2 entries, got " +
                                std::to_string(x.size()));
  }
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double denom_sq = var + epsilon;
  if (!(denom_sq > 0.0)) {
    throw std::domain_error("layer_norm: zero variance with epsilon = 0");
  }
  const double inv = gamma / std::sqrt(denom_sq);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv + beta;
}

}  // namespace

std::vector<double> layer_norm(std::span<const double> x, double gamma, double beta,
                               double epsilon) {
  std::vector<double> out(x.size());
  normalize_into(x, out, gamma, beta, epsilon);
  return out;
}

Matrix layer_norm_rows(const Matrix& x, double gamma, double beta, double epsilon) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) normalize_into(x.row(r), out.row(r), gamma, beta, epsilon);
  return out;
}

}  // namespace nope
