#include "nope/numerics/sampling.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nope {
namespace {

void check_shape_and_scale(std::size_t rows, std::size_t cols, double sigma, const char* op) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument(std::string(op) + ": dimensions must be positive, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument(std::string(op) + ": sigma must be positive and finite, got " +
                                std::to_string(sigma));
  }
}

}  // namespace

std::string_view to_string(InitFamily family) {
  switch (family) {
    case InitFamily::gaussian:
      return "gaussian";
    case InitFamily::uniform:
      return "uniform";
    case InitFamily::rademacher:
      return "rademacher";
  }
  return "unknown";
}

InitFamily parse_init_family(std::string_view name) {
  if (name == "gaussian") return InitFamily::gaussian;
  if (name == "uniform") return InitFamily::uniform;
  if (name == "rademacher") return InitFamily::rademacher;
  throw std::invalid_argument("unknown init family '" + std::string(name) +
                              "' (expected gaussian, uniform or rademacher)");
}

Matrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, RngStream& rng) {
  return sample_zero_mean_matrix(rows, cols, sigma, InitFamily::gaussian, rng);
}

Matrix sample_zero_mean_matrix(std::size_t rows, std::size_t cols, double sigma,
                               InitFamily family, RngStream& rng) {
  check_shape_and_scale(rows, cols, sigma, "sample_zero_mean_matrix");
  Matrix out(rows, cols);
  auto data = out.data();
  switch (family) {
    case InitFamily::gaussian:
      for (double& v : data) v = sigma * rng.next_normal();
      break;
    case InitFamily::uniform: {
      const double half_width = sigma * std::sqrt(3.0);
      for (double& v : data) v = half_width * (2.0 * rng.next_uniform() - 1.0);
      break;
    }
    case InitFamily::rademacher:
      for (double& v : data) v = (rng.next_u32() & 1u) ? sigma : -sigma;
      break;
  }
  return out;
}

Matrix sample_zero_mean_matrix(std::size_t rows, std::size_t cols, double sigma,
                               std::string_view family, RngStream& rng) {
  return sample_zero_mean_matrix(rows, cols, sigma, parse_init_family(family), rng);
}

}  // namespace nope
