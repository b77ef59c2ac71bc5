#include "nope/probe/probe.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nope/errors.hpp"

namespace nope {
namespace {

void check_batch(const ProbeModel& model, const Matrix& xs, std::span<const double> targets) {
  if (xs.cols() != model.params.input_dim()) {
    throw ShapeError("probe: batch " + xs.shape_string() + " does not match W1 " +
                     model.params.w1.shape_string());
  }
  if (xs.rows() != targets.size()) {
    throw ShapeError("probe: " + std::to_string(xs.rows()) + " inputs but " +
                     std::to_string(targets.size()) + " targets");
  }
  if (xs.rows() == 0) throw std::invalid_argument("probe: empty batch");
}

/// Pre-activations W1 x + b1 for every row of xs.
Matrix pre_activations(const ProbeParams& p, const Matrix& xs) {
  Matrix z = matmul_bt(xs, p.w1);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += p.b1[k];
  }
  return z;
}

double readout(const ProbeParams& p, std::span<const double> z_row) {
  double out = p.b2;
  for (std::size_t k = 0; k < z_row.size(); ++k)
    if (z_row[k] > 0.0) out += p.w2[k] * z_row[k];
  return out;
}

double sign(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

}  // namespace

ProbeParams ProbeParams::zeros_like(const ProbeParams& p) {
  ProbeParams z;
  z.w1 = Matrix(p.w1.rows(), p.w1.cols());
  z.b1.assign(p.b1.size(), 0.0);
  z.w2.assign(p.w2.size(), 0.0);
  z.b2 = 0.0;
  return z;
}

std::size_t ProbeParams::parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

std::array<std::span<double>, 4> parameter_blocks(ProbeParams& p) {
  return {p.w1.data(), std::span<double>(p.b1), std::span<double>(p.w2), std::span<double>(&p.b2, 1)};
}

std::array<std::span<const double>, 4> parameter_blocks(const ProbeParams& p) {
  return {p.w1.data(), std::span<const double>(p.b1), std::span<const double>(p.w2),
          std::span<const double>(&p.b2, 1)};
}

ProbeModel make_probe(std::size_t input_dim, std::size_t hidden, ProbeInit init, RngStream& rng,
                      double initial_bias) {
  if (input_dim == 0 || hidden == 0) throw std::invalid_argument("make_probe: dimensions must be positive");
  ProbeModel model;
  ProbeParams& p = model.params;
  p.w1 = Matrix(hidden, input_dim);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(hidden, 0.0);
  if (init == ProbeInit::random) {
    const double scale = std::sqrt(2.0 / static_cast<double>(input_dim));
    for (double& w : p.w1.data()) w = scale * rng.next_normal();
    p.b2 = initial_bias;
  }
  model.adam.first_moment = ProbeParams::zeros_like(p);
  model.adam.second_moment = ProbeParams::zeros_like(p);
  return model;
}

double probe_forward(const ProbeModel& model, std::span<const double> x) {
  const ProbeParams& p = model.params;
  if (x.size() != p.input_dim()) {
    throw ShapeError("probe_forward: input of length " + std::to_string(x.size()) +
                     " does not match W1 " + p.w1.shape_string());
  }
  double out = p.b2;
  for (std::size_t k = 0; k < p.hidden(); ++k) {
    const auto w = p.w1.row(k);
    double z = p.b1[k];
    for (std::size_t i = 0; i < x.size(); ++i) z += w[i] * x[i];
    if (z > 0.0) out += p.w2[k] * z;
  }
  return out;
}

std::vector<double> probe_forward_batch(const ProbeModel& model, const Matrix& xs) {
  if (xs.cols() != model.params.input_dim()) {
    throw ShapeError("probe_forward_batch: batch " + xs.shape_string() + " does not match W1 " +
                     model.params.w1.shape_string());
  }
  const Matrix z = pre_activations(model.params, xs);
  std::vector<double> out(xs.rows());
  for (std::size_t r = 0; r < xs.rows(); ++r) out[r] = readout(model.params, z.row(r));
  return out;
}

double probe_loss(const ProbeModel& model, const Matrix& xs, std::span<const double> targets,
                  ProbeLoss loss) {
  check_batch(model, xs, targets);
  const auto preds = probe_forward_batch(model, xs);
  double total = 0.0;
  for (std::size_t r = 0; r < preds.size(); ++r) {
    const double residual = preds[r] - targets[r];
    total += loss == ProbeLoss::l1 ? std::abs(residual) : 0.5 * residual * residual;
  }
  return total / static_cast<double>(preds.size());
}

ProbeGradients probe_backward(const ProbeModel& model, const Matrix& xs,
                              std::span<const double> targets, ProbeLoss loss) {
  check_batch(model, xs, targets);
  const ProbeParams& p = model.params;
  const std::size_t batch = xs.rows();
  const std::size_t hidden = p.hidden();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  Matrix z = pre_activations(p, xs);
  ProbeGradients out;
  out.grads = ProbeParams::zeros_like(p);
  ProbeParams& g = out.grads;

  // dL/dz, overwritten in place of the ReLU-gated hidden gradient.
  Matrix grad_z(batch, hidden);
  for (std::size_t r = 0; r < batch; ++r) {
    const auto zr = z.row(r);
    const double residual = readout(p, zr) - targets[r];
    out.loss += loss == ProbeLoss::l1 ? std::abs(residual) : 0.5 * residual * residual;
    const double g_pred = (loss == ProbeLoss::l1 ? sign(residual) : residual) * inv_batch;
    g.b2 += g_pred;
    auto gz = grad_z.row(r);
    for (std::size_t k = 0; k < hidden; ++k) {
      if (zr[k] > 0.0) {
        g.w2[k] += g_pred * zr[k];
        gz[k] = g_pred * p.w2[k];
        g.b1[k] += gz[k];
      }
    }
  }
  out.loss *= inv_batch;
  g.w1 = matmul_at(grad_z, xs);
  return out;
}

void adam_step(ProbeModel& model, const ProbeParams& grads, const AdamConfig& c) {
  if (!(c.lr >= 0.0) || !(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0) ||
      !(c.eps > 0.0)) {
    throw std::invalid_argument("adam_step: hyperparameters out of range");
  }
  AdamState& s = model.adam;
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  auto params = parameter_blocks(model.params);
  auto m1 = parameter_blocks(s.first_moment);
  auto m2 = parameter_blocks(s.second_moment);
  const auto g = parameter_blocks(grads);
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (g[b].size() != params[b].size()) throw ShapeError("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      m1[b][i] = c.beta1 * m1[b][i] + (1.0 - c.beta1) * g[b][i];
      m2[b][i] = c.beta2 * m2[b][i] + (1.0 - c.beta2) * g[b][i] * g[b][i];
      const double m_hat = m1[b][i] / correction1;
      const double v_hat = m2[b][i] / correction2;
      params[b][i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace nope
