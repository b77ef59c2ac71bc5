#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nope/errors.hpp"
#include "nope/numerics/matrix.hpp"
#include "nope/numerics/rng.hpp"
#include "nope/numerics/sampling.hpp"
#include "nope/numerics/stats.hpp"

using namespace nope;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t stream) {
  RngStream rng(7, stream);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.next_normal();
  return m;
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

void check_close(const Matrix& a, const Matrix& b, double tol = 1e-12) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("matrix construction and access") {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(m.row(1)[0] == 4);
  CHECK(m.shape_string() == "2x3");
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ShapeError);
  CHECK(Matrix::identity(3)(1, 1) == 1.0);
  CHECK(Matrix::identity(3)(0, 1) == 0.0);
}

TEST_CASE("matmul agrees with the triple loop") {
  for (std::size_t trial = 0; trial < 5; ++trial) {
    const std::size_t n = 3 + 7 * trial, k = 5 + 3 * trial, p = 2 + 11 * trial;
    const Matrix a = random_matrix(n, k, trial);
    const Matrix b = random_matrix(k, p, 100 + trial);
    check_close(matmul(a, b), naive_matmul(a, b));
    check_close(matmul_bt(a, transpose(b)), naive_matmul(a, b));
    check_close(matmul_at(transpose(a), b), naive_matmul(a, b));
  }
}

TEST_CASE("matmul shape errors name both shapes") {
  const Matrix a(2, 3), b(2, 3);
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS((void)matmul_bt(Matrix(2, 3), Matrix(2, 4)), ShapeError);
  CHECK_THROWS_AS((void)matmul_at(Matrix(2, 3), Matrix(3, 3)), ShapeError);
  CHECK_THROWS_AS((void)add(Matrix(2, 3), Matrix(3, 2)), ShapeError);
}

TEST_CASE("identity is neutral and transpose is an involution") {
  const Matrix a = random_matrix(6, 4, 3);
  CHECK(matmul(Matrix::identity(6), a) == a);
  CHECK(transpose(transpose(a)) == a);
}

TEST_CASE("block helpers round-trip") {
  const Matrix a = random_matrix(6, 8, 4);
  const Matrix rows[] = {row_block(a, 0, 2), row_block(a, 2, 6)};
  CHECK(vstack(rows) == a);
  const Matrix cols[] = {col_block(a, 0, 3), col_block(a, 3, 5), col_block(a, 5, 8)};
  CHECK(hstack(cols) == a);
  CHECK_THROWS_AS((void)row_block(a, 4, 9), ShapeError);
  const Matrix mismatched[] = {Matrix(2, 2), Matrix(2, 3)};
  CHECK_THROWS_AS((void)vstack(mismatched), ShapeError);
}

TEST_CASE("elementwise helpers") {
  const Matrix a{{1, -2}, {3, 4}};
  CHECK(frobenius_norm_squared(a) == 30.0);
  CHECK(scale(a, 2.0)(1, 0) == 6.0);
  CHECK(add(a, a)(0, 1) == -4.0);
  CHECK(all_finite(a));
  Matrix b = a;
  b(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(b));
}

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(philox4x32_10(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
}

TEST_CASE("rng draw ranges and moments") {
  RngStream rng(1, 0);
  const int n = 200000;
  double sum = 0, sumsq = 0, usum = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    usum += u;
    const double o = rng.next_open_uniform();
    REQUIRE(o > 0.0);
    REQUIRE(o < 1.0);
    const double z = rng.next_normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(usum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sum / n) < 5.0 / std::sqrt(n));
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("next_below is bounded and roughly uniform") {
  RngStream rng(9, 1);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.next_below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  CHECK(chi2 < 30.0);  // 6 dof, far tail
  CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("zero-mean families match sigma^2") {
  const double sigma = 0.02;
  for (auto family : {InitFamily::gaussian, InitFamily::uniform, InitFamily::rademacher}) {
    RngStream rng(5, 0);
    const Matrix w = sample_zero_mean_matrix(300, 300, sigma, family, rng);
    const double ms = frobenius_norm_squared(w) / static_cast<double>(w.size());
    double mean = 0.0;
    for (double v : w.data()) mean += v;
    mean /= static_cast<double>(w.size());
    CHECK(ms == doctest::Approx(sigma * sigma).epsilon(0.02));
    CHECK(std::abs(mean) < 5.0 * sigma / 300.0);
  }
  RngStream rng(5, 1);
  for (double v : sample_zero_mean_matrix(20, 20, sigma, InitFamily::rademacher, rng).data()) {
    CHECK(std::abs(v) == sigma);
  }
  for (double v : sample_zero_mean_matrix(20, 20, sigma, "uniform", rng).data()) {
    CHECK(std::abs(v) <= sigma * std::sqrt(3.0));
  }
}

TEST_CASE("sampling rejects bad arguments") {
  RngStream rng(1, 1);
  CHECK_THROWS_AS((void)sample_zero_mean_matrix(3, 3, 0.1, "cauchy", rng), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_gaussian_matrix(0, 3, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_gaussian_matrix(3, 3, 0.0, rng), std::invalid_argument);
  CHECK(parse_init_family("rademacher") == InitFamily::rademacher);
  CHECK(to_string(InitFamily::uniform) == "uniform");
}

TEST_CASE("summary statistics against hand values") {
  const std::vector<std::vector<double>> s = {{1, 2}, {3, 2}, {5, 8}};
  const SummaryStats st = summarize(s, VarianceKind::biased, true);
  CHECK(st.mean[0] == doctest::Approx(3.0));
  CHECK(st.variance[0] == doctest::Approx(8.0 / 3.0));
  CHECK(st.variance[1] == doctest::Approx(8.0));
  const SummaryStats ub = summarize(s, VarianceKind::unbiased);
  CHECK(ub.variance[0] == doctest::Approx(4.0));
  const Matrix zc = empirical_covariance(s, true);
  CHECK(zc(0, 1) == doctest::Approx((2.0 + 6.0 + 40.0) / 3.0));
  const Matrix mc = empirical_covariance(s, false);
  CHECK(mc(0, 1) == doctest::Approx(((-2.0) * -2.0 + 0.0 * -2.0 + 2.0 * 4.0) / 3.0));
  CHECK(mean_of(std::vector<double>{1, 2, 3}) == 2.0);
  CHECK(variance_of(std::vector<double>{1, 2, 3}, VarianceKind::unbiased) == 1.0);
}

TEST_CASE("covariance input validation") {
  const std::vector<std::vector<double>> one = {{1, 2}};
  CHECK_THROWS_AS((void)empirical_covariance(one), std::invalid_argument);
  const std::vector<std::vector<double>> ragged = {{1, 2}, {1}};
  CHECK_THROWS_AS((void)empirical_covariance(ragged), std::invalid_argument);
}

TEST_CASE("position accumulator matches two-pass variance") {
  std::vector<Matrix> samples;
  for (std::uint64_t s = 0; s < 40; ++s) samples.push_back(random_matrix(5, 3, 200 + s));
  PositionVarianceAccumulator acc(5, 3);
  for (const auto& m : samples) acc.add(m);
  const auto pooled = acc.pooled_variance();
  for (std::size_t p = 0; p < 5; ++p) {
    double pooled_ref = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> xs;
      for (const auto& m : samples) xs.push_back(m(p, c));
      CHECK(acc.cell_variance(p, c) == doctest::Approx(variance_of(xs)).epsilon(1e-12));
      CHECK(acc.cell_mean(p, c) == doctest::Approx(mean_of(xs)).epsilon(1e-12));
      pooled_ref += variance_of(xs) / 3.0;
    }
    CHECK(pooled[p] == doctest::Approx(pooled_ref).epsilon(1e-12));
  }
  CHECK(per_position_variance(samples) == pooled);
  CHECK_THROWS_AS(acc.add(Matrix(4, 3)), ShapeError);
}

TEST_CASE("log-log fit recovers exact power laws") {
  std::vector<double> xs, ys;
  for (int m = 1; m <= 64; ++m) {
    xs.push_back(m);
    ys.push_back(3.5 / m);
  }
  const LogLogFit fit = loglog_slope(xs, ys);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::exp(fit.intercept) == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0));
  std::vector<double> flat(xs.size(), 2.0);
  CHECK(loglog_slope(xs, flat).slope == doctest::Approx(0.0));
  ys[3] = 0.0;
  CHECK_THROWS_AS((void)loglog_slope(xs, ys), std::invalid_argument);
}

TEST_CASE("spearman rank correlation") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  CHECK(spearman(x, std::vector<double>{10, 20, 25, 100, 1000}) == doctest::Approx(1.0));
  CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Ties get average ranks: y ranks (1.5, 1.5, 3, 4, 5).
  const double r = spearman(x, std::vector<double>{1, 1, 2, 3, 4});
  CHECK(r == doctest::Approx(0.9746794344808963));
  CHECK(spearman(x, std::vector<double>(5, 1.0)) == 0.0);
}
