#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nope/errors.hpp"
#include "nope/probe/probe.hpp"
#include "nope/probe/training.hpp"

using namespace nope;

namespace {

Matrix random_inputs(std::size_t rows, std::size_t cols, std::uint64_t stream) {
  RngStream rng(21, stream);
  Matrix x(rows, cols);
  for (double& v : x.data()) v = rng.next_normal();
  return x;
}

ProbeModel random_probe(std::size_t d, std::size_t hidden, std::uint64_t stream) {
  RngStream rng(22, stream);
  ProbeModel p = make_probe(d, hidden, ProbeInit::random, rng);
  // make_probe zeroes w2 and b1; give every parameter a nonzero value.
  for (double& v : p.params.w2) v = rng.next_normal();
  for (double& v : p.params.b1) v = 0.1 * rng.next_normal();
  p.params.b2 = 0.3;
  return p;
}

double& coordinate(ProbeParams& p, std::size_t block, std::size_t index) {
  return parameter_blocks(p)[block][index];
}

struct FdStats {
  std::size_t checked = 0;
  double worst = 0.0;
};

// Central differences on randomly chosen coordinates of every parameter block.
FdStats finite_difference_check(ProbeLoss loss, std::size_t per_block) {
  const std::size_t d = 12, hidden = 10, batch = 16;
  ProbeModel probe = random_probe(d, hidden, 1);
  const Matrix xs = random_inputs(batch, d, 2);
  std::vector<double> targets = probe_forward_batch(probe, xs);
  // Keep residuals well away from the |r| kink.
  for (std::size_t i = 0; i < batch; ++i) targets[i] += (i % 2 ? 1.0 : -1.0) * (0.5 + 0.1 * i);
  const ProbeGradients g = probe_backward(probe, xs, targets, loss);
  const ProbeParams grads = g.grads;

  RngStream pick(23, 0);
  const double h = 1e-5;
  FdStats st;
  for (std::size_t block = 0; block < 4; ++block) {
    const std::size_t size = parameter_blocks(probe.params)[block].size();
    for (std::size_t t = 0; t < per_block; ++t) {
      const std::size_t idx = pick.next_below(size);
      double& w = coordinate(probe.params, block, idx);
      const double saved = w;
      w = saved + h;
      const double up = probe_loss(probe, xs, targets, loss);
      w = saved - h;
      const double down = probe_loss(probe, xs, targets, loss);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = parameter_blocks(grads)[block][idx];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      st.worst = std::max(st.worst, std::abs(numeric - analytic) / denom);
      ++st.checked;
    }
  }
  return st;
}

ModelConfig small_model() {
  ModelConfig c;
  c.d = 16;
  c.heads = 2;
  c.seq_len = 8;
  c.layers = 2;
  c.sigma = 0.1;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("probe forward examples") {
  RngStream rng(1, 1);
  ProbeModel zero = make_probe(4, 3, ProbeInit::zero, rng);
  zero.params.b2 = 0.7;
  CHECK(probe_forward(zero, std::vector<double>{1, 2, 3, 4}) == 0.7);

  ProbeModel dead = make_probe(2, 2, ProbeInit::zero, rng);
  dead.params.w1 = Matrix{{1, 1}, {2, 0}};
  dead.params.b1 = {-100, -100};
  dead.params.w2 = {5, 5};
  dead.params.b2 = -0.25;
  CHECK(probe_forward(dead, std::vector<double>{1, 1}) == -0.25);

  ProbeModel one = make_probe(3, 1, ProbeInit::zero, rng);
  one.params.w1 = Matrix{{1, 0, 0}};
  one.params.w2 = {2};
  CHECK(probe_forward(one, std::vector<double>{3, 1, 1}) == 6.0);

  CHECK_THROWS_AS((void)probe_forward(one, std::vector<double>{3, 1}), ShapeError);
  CHECK_THROWS_AS((void)probe_forward_batch(one, Matrix(2, 4)), ShapeError);
}

TEST_CASE("batched forward agrees with the scalar path") {
  const ProbeModel p = random_probe(9, 7, 3);
  const Matrix xs = random_inputs(11, 9, 4);
  const auto batch = probe_forward_batch(p, xs);
  for (std::size_t i = 0; i < xs.rows(); ++i) CHECK(batch[i] == doctest::Approx(probe_forward(p, xs.row(i))));
}

TEST_CASE("random init follows the documented scheme") {
  RngStream rng(2, 0);
  const ProbeModel p = make_probe(400, 300, ProbeInit::random, rng);
  CHECK(p.params.b2 == 0.5);
  CHECK(std::all_of(p.params.w2.begin(), p.params.w2.end(), [](double v) { return v == 0.0; }));
  const double ms = frobenius_norm_squared(p.params.w1) / static_cast<double>(p.params.w1.size());
  CHECK(ms == doctest::Approx(2.0 / 400.0).epsilon(0.02));
  CHECK(p.params.parameter_count() == 300 * 400 + 300 + 300 + 1);
  CHECK(p.adam.step == 0);
}

TEST_CASE("gradients match central differences") {
  for (auto loss : {ProbeLoss::l1, ProbeLoss::mse}) {
    const FdStats st = finite_difference_check(loss, 40);
    CHECK(st.checked >= 100);
    CHECK(st.worst < 1e-4);
  }
}

TEST_CASE("zero-error batches give zero gradients") {
  const ProbeModel p = random_probe(6, 5, 5);
  const Matrix xs = random_inputs(8, 6, 6);
  const auto preds = probe_forward_batch(p, xs);
  for (auto loss : {ProbeLoss::l1, ProbeLoss::mse}) {
    const ProbeGradients g = probe_backward(p, xs, preds, loss);
    CHECK(g.loss == 0.0);
    for (const auto& block : parameter_blocks(g.grads))
      for (double v : block) CHECK(v == 0.0);
  }
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  const ProbeModel p = random_probe(6, 5, 7);
  const Matrix xs = random_inputs(8, 6, 8);
  std::vector<double> targets(8);
  for (std::size_t i = 0; i < 8; ++i) targets[i] = 0.1 * static_cast<double>(i);
  const Matrix pair[] = {xs, xs};
  std::vector<double> doubled = targets;
  doubled.insert(doubled.end(), targets.begin(), targets.end());
  const ProbeGradients a = probe_backward(p, xs, targets);
  const ProbeGradients b = probe_backward(p, vstack(pair), doubled);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto ga = parameter_blocks(a.grads)[k];
    const auto gb = parameter_blocks(b.grads)[k];
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(gb[i] == doctest::Approx(ga[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS((void)probe_backward(p, Matrix(0, 6), std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("adam update rules") {
  ProbeModel p = random_probe(4, 3, 9);
  const ProbeParams before = p.params;
  ProbeParams zero = ProbeParams::zeros_like(p.params);
  adam_step(p, zero, AdamConfig{});
  CHECK(p.params.w1 == before.w1);
  CHECK(p.params.b2 == before.b2);
  CHECK(p.adam.step == 1);

  ProbeModel q = random_probe(4, 3, 9);
  ProbeParams g = ProbeParams::zeros_like(q.params);
  for (auto& block : parameter_blocks(g))
    for (double& v : block) v = -3.0;
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(q, g, cfg);
  const auto after = parameter_blocks(q.params);
  const auto orig = parameter_blocks(before);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < after[k].size(); ++i)
      CHECK(after[k][i] - orig[k][i] == doctest::Approx(0.01).epsilon(1e-6));

  ProbeModel r = random_probe(4, 3, 9);
  cfg.lr = 0.0;
  adam_step(r, g, cfg);
  CHECK(r.params.w1 == before.w1);

  cfg.lr = 1e-3;
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(adam_step(r, g, cfg), std::invalid_argument);
  cfg.beta1 = 0.9;
  cfg.eps = 0.0;
  CHECK_THROWS_AS(adam_step(r, g, cfg), std::invalid_argument);
}

TEST_CASE("baseline MAE is L/4 for the constant-middle predictor") {
  CHECK(baseline_mae(128) == 32.0);
  CHECK(baseline_mae(512) == 128.0);
  CHECK(baseline_mae(256) == 64.0);
}

TEST_CASE("untrained zero probe has the constant-predictor MAE") {
  const FrozenModel model(small_model());
  ProbeConfig cfg;
  cfg.init = ProbeInit::zero;
  cfg.steps = 0;
  cfg.eval_sequences = 3;
  const ProbeRun run = train_probe(model, 2, cfg, ProbeSeeds{1, 2});
  // Prediction 0 for every token: MAE = mean of m over 1..L.
  CHECK(run.report.global_mae == doctest::Approx(4.5));
  CHECK(run.report.baseline_mae == 2.0);
  for (double v : run.report.position_mae) CHECK(v >= 0.0);
}

TEST_CASE("probe training is deterministic and leaves the model frozen") {
  const FrozenModel model(small_model());
  const auto checksum = model.checksum();
  ProbeConfig cfg;
  cfg.steps = 60;
  cfg.batch = 8;
  cfg.eval_sequences = 4;
  const std::size_t depths[] = {0, 1, 2};
  const auto a = train_probes(model, depths, cfg, ProbeSeeds{3, 4});
  const auto b = train_probes(model, depths, cfg, ProbeSeeds{3, 4});
  REQUIRE(a.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a[k].report.global_mae == b[k].report.global_mae);
    CHECK(a[k].report.train_loss == b[k].report.train_loss);
    CHECK(a[k].report.layer == depths[k]);
    CHECK(a[k].report.train_loss.size() == 60);
  }
  CHECK(model.checksum() == checksum);
  const auto c = train_probes(model, depths, cfg, ProbeSeeds{3, 5});
  CHECK(c[2].report.global_mae != a[2].report.global_mae);
  CHECK_THROWS_AS((void)train_probe(model, 3, cfg, ProbeSeeds{}), std::invalid_argument);
}

TEST_CASE("training reduces the loss on a learnable signal") {
  const FrozenModel model(small_model());
  ProbeConfig cfg;
  cfg.steps = 400;
  cfg.batch = 16;
  cfg.eval_sequences = 4;
  cfg.adam.lr = 1e-2;
  const ProbeRun run = train_probe(model, 0, cfg, ProbeSeeds{1, 1});
  double early = 0, late = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    early += run.report.train_loss[i];
    late += run.report.train_loss[run.report.train_loss.size() - 1 - i];
  }
  CHECK(late < early);
}

TEST_CASE("probe CSV layouts") {
  ProbeReport r;
  r.layer = 2;
  r.seed = 9;
  r.position_mae = {1.5, 0.25};
  r.global_mae = 0.875;
  r.baseline_mae = 0.5;
  r.train_loss = {0.5, 0.25};
  const std::vector<ProbeReport> reports = {r};
  CHECK(probe_reports_csv(reports) ==
        "layer,position,mae,seed\n2,1,1.5,9\n2,2,0.25,9\n2,global,0.875,9\n2,baseline,0.5,9\n");
  CHECK(training_curve_csv(r) == "step,loss\n1,0.5\n2,0.25\n");
}
