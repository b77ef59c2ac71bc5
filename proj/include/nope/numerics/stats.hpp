#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nope/numerics/matrix.hpp"

namespace nope {

/// Biased divides by n, unbiased by n - 1.
enum class VarianceKind { biased, unbiased };

struct SummaryStats {
  std::size_t n_samples = 0;
  std::vector<double> mean;
  std::vector<double> variance;
  std::optional<Matrix> covariance;
};

/// Per-coordinate mean and variance of equal-length samples.
SummaryStats summarize(std::span<const std::vector<double>> samples,
                       VarianceKind kind = VarianceKind::biased, bool with_covariance = false);

/// With zero_mean set, returns (1/n) sum x x^T; otherwise the mean-subtracted
/// biased estimator. Needs at least two samples of equal length.
Matrix empirical_covariance(std::span<const std::vector<double>> samples, bool zero_mean = true);

double mean_of(std::span<const double> xs);
double variance_of(std::span<const double> xs, VarianceKind kind = VarianceKind::biased);

/// Streaming per-(position, coordinate) moments over a sequence of L x d
/// samples, folded with Welford's update. The pooled variance at position m
/// is the average over coordinates of the per-coordinate variance across
/// samples.
class PositionVarianceAccumulator {
 public:
  PositionVarianceAccumulator(std::size_t positions, std::size_t coords);

  void add(const Matrix& sample);

  std::size_t count() const { return count_; }
  std::size_t positions() const { return positions_; }
  std::size_t coords() const { return coords_; }

  std::vector<double> pooled_variance(VarianceKind kind = VarianceKind::biased) const;
  /// Variance across samples of one (position, coordinate) cell.
  double cell_variance(std::size_t position, std::size_t coord,
                       VarianceKind kind = VarianceKind::biased) const;
  double cell_mean(std::size_t position, std::size_t coord) const;

 private:
  std::size_t positions_;
  std::size_t coords_;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Pooled per-position variance of a set of L x d samples (see
/// PositionVarianceAccumulator). Needs at least two samples.
std::vector<double> per_position_variance(std::span<const Matrix> samples,
                                          VarianceKind kind = VarianceKind::biased);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of ln(y) on ln(x). Inputs must be positive.
LogLogFit loglog_slope(std::span<const double> xs, std::span<const double> ys);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace nope
