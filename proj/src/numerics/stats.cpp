#include "nope/numerics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nope/errors.hpp"

namespace nope {
namespace {

void check_samples(std::span<const std::vector<double>> samples, const char* op) {
  if (samples.size() < 2) {
    throw std::invalid_argument(std::string(op) + ": need at least 2 samples, got " +
                                std::to_string(samples.size()));
  }
  const std::size_t len = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != len) {
      throw std::invalid_argument(std::string(op) + ": ragged samples (lengths " +
                                  std::to_string(len) + " and " + std::to_string(s.size()) + ")");
    }
  }
}

std::vector<double> ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

SummaryStats summarize(std::span<const std::vector<double>> samples, VarianceKind kind,
                       bool with_covariance) {
  check_samples(samples, "summarize");
  const std::size_t n = samples.size();
  const std::size_t len = samples.front().size();
  SummaryStats out;
  out.n_samples = n;
  out.mean.assign(len, 0.0);
  out.variance.assign(len, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < len; ++i) out.mean[i] += s[i];
  for (double& m : out.mean) m /= static_cast<double>(n);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < len; ++i) out.variance[i] += (s[i] - out.mean[i]) * (s[i] - out.mean[i]);
  const double denom = kind == VarianceKind::biased ? static_cast<double>(n) : static_cast<double>(n - 1);
  for (double& v : out.variance) v /= denom;
  if (with_covariance) out.covariance = empirical_covariance(samples, false);
  return out;
}

Matrix empirical_covariance(std::span<const std::vector<double>> samples, bool zero_mean) {
  check_samples(samples, "empirical_covariance");
  const std::size_t n = samples.size();
  const std::size_t len = samples.front().size();
  std::vector<double> centre(len, 0.0);
  if (!zero_mean) {
    for (const auto& s : samples)
      for (std::size_t i = 0; i < len; ++i) centre[i] += s[i];
    for (double& c : centre) c /= static_cast<double>(n);
  }
  Matrix cov(len, len);
  std::vector<double> centred(len);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < len; ++i) centred[i] = s[i] - centre[i];
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = i; j < len; ++j) cov(i, j) += centred[i] * centred[j];
  }
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = i; j < len; ++j) {
      cov(i, j) /= static_cast<double>(n);
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty input");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance_of(std::span<const double> xs, VarianceKind kind) {
  if (xs.size() < 2) throw std::invalid_argument("variance_of: need at least 2 values");
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(kind == VarianceKind::biased ? xs.size() : xs.size() - 1);
}

PositionVarianceAccumulator::PositionVarianceAccumulator(std::size_t positions, std::size_t coords)
    : positions_(positions), coords_(coords), mean_(positions * coords, 0.0),
      m2_(positions * coords, 0.0) {}

void PositionVarianceAccumulator::add(const Matrix& sample) {
  if (sample.rows() != positions_ || sample.cols() != coords_) {
    throw ShapeError("PositionVarianceAccumulator: sample shape " +
                                sample.shape_string() + " does not match " +
                                std::to_string(positions_) + "x" + std::to_string(coords_));
  }
  ++count_;
  const double inv_n = 1.0 / static_cast<double>(count_);
  const auto x = sample.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta * inv_n;
    m2_[i] += delta * (x[i] - mean_[i]);
  }
}

std::vector<double> PositionVarianceAccumulator::pooled_variance(VarianceKind kind) const {
  if (count_ < 2) throw std::invalid_argument("pooled_variance: need at least 2 samples");
  const double denom = kind == VarianceKind::biased ? static_cast<double>(count_)
                                                    : static_cast<double>(count_ - 1);
  std::vector<double> out(positions_, 0.0);
  for (std::size_t m = 0; m < positions_; ++m) {
    double s = 0.0;
    for (std::size_t j = 0; j < coords_; ++j) s += m2_[m * coords_ + j];
    out[m] = std::max(0.0, s / (denom * static_cast<double>(coords_)));
  }
  return out;
}

double PositionVarianceAccumulator::cell_variance(std::size_t position, std::size_t coord,
                                                  VarianceKind kind) const {
  if (count_ < 2) throw std::invalid_argument("cell_variance: need at least 2 samples");
  const double denom = kind == VarianceKind::biased ? static_cast<double>(count_)
                                                    : static_cast<double>(count_ - 1);
  return std::max(0.0, m2_.at(position * coords_ + coord) / denom);
}

double PositionVarianceAccumulator::cell_mean(std::size_t position, std::size_t coord) const {
  return mean_.at(position * coords_ + coord);
}

std::vector<double> per_position_variance(std::span<const Matrix> samples, VarianceKind kind) {
  if (samples.size() < 2) {
    throw std::invalid_argument("per_position_variance: need at least 2 samples, got " +
                                std::to_string(samples.size()));
  }
  PositionVarianceAccumulator acc(samples.front().rows(), samples.front().cols());
  for (const auto& s : samples) acc.add(s);
  return acc.pooled_variance(kind);
}

LogLogFit loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("loglog_slope: " + std::to_string(xs.size()) + " xs but " +
                                std::to_string(ys.size()) + " ys");
  }
  if (xs.size() < 2) throw std::invalid_argument("loglog_slope: need at least 2 points");
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
      throw std::invalid_argument("loglog_slope: non-positive value at index " + std::to_string(i));
    }
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  const double mx = mean_of(lx);
  const double my = mean_of(ly);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: all xs are equal");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r2 = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      ss_res += r * r;
    }
    fit.r2 = 1.0 - ss_res / syy;
  }
  return fit;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("spearman: need two equal-length inputs with at least 2 values");
  }
  const auto rx = ranks(xs);
  const auto ry = ranks(ys);
  return pearson(rx, ry);
}

}  // namespace nope
