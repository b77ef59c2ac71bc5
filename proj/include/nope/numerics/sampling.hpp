#pragma once

#include <cstddef>
#include <string_view>

#include "nope/numerics/matrix.hpp"
#include "nope/numerics/rng.hpp"

namespace nope {

/// Zero-mean weight distributions. Every family is scaled to variance sigma^2.
enum class InitFamily { gaussian, uniform, rademacher };

std::string_view to_string(InitFamily family);
/// Throws std::invalid_argument for names outside {gaussian, uniform, rademacher}.
InitFamily parse_init_family(std::string_view name);

Matrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, RngStream& rng);

/// Entries i.i.d. with mean 0 and variance sigma^2: N(0, sigma^2),
/// U(-sigma*sqrt(3), sigma*sqrt(3)), or +/-sigma with equal probability.
Matrix sample_zero_mean_matrix(std::size_t rows, std::size_t cols, double sigma,
                               InitFamily family, RngStream& rng);
Matrix sample_zero_mean_matrix(std::size_t rows, std::size_t cols, double sigma,
                               std::string_view family, RngStream& rng);

}  // namespace nope
