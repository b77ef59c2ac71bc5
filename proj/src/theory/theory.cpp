#include "nope/theory/theory.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nope {
namespace {

double d_of(const ModelConfig& c) { return static_cast<double>(c.d); }

double output_scale(const ModelConfig& c) {
  const double s2 = c.sigma * c.sigma;
  return d_of(c) * d_of(c) * s2 * s2;
}

void check_position(const ModelConfig& c, std::size_t m) {
  if (m < 1 || m > c.seq_len) {
    throw std::invalid_argument("position m=" + std::to_string(m) + " outside [1, " +
                                std::to_string(c.seq_len) + "]");
  }
}

}  // namespace

double predict_qkv_variance(const ModelConfig& c) { return d_of(c) * c.sigma * c.sigma; }

double predict_logit_variance(const ModelConfig& c, bool scaled) {
  const double h = static_cast<double>(c.heads);
  const double scaled_var = output_scale(c) / h;
  return scaled ? scaled_var : scaled_var * (d_of(c) / h);
}

double implied_logit_variance(const ModelConfig& c, bool scaled) {
  const double qk = predict_qkv_variance(c);
  const double dh = static_cast<double>(c.head_dim());
  return scaled ? qk * qk : dh * qk * qk;
}

double predict_output_variance(const ModelConfig& c, std::size_t m) {
  check_position(c, m);
  return output_scale(c) / static_cast<double>(m);
}

double predict_bidirectional_output_variance(const ModelConfig& c) {
  return output_scale(c) / static_cast<double>(c.seq_len);
}

double predict_residual_variance(const ModelConfig& c, std::size_t m) {
  return c.sigma * c.sigma + predict_output_variance(c, m);
}

double projected_row_energy(const Matrix& w_o, const Matrix& w_v_full, std::size_t j) {
  if (w_o.cols() != w_v_full.rows()) {
    throw std::invalid_argument("projected_row_energy: W_o " + w_o.shape_string() +
                                " incompatible with W_v " + w_v_full.shape_string());
  }
  if (j < 1 || j > w_o.rows()) {
    throw std::invalid_argument("dimension j=" + std::to_string(j) + " outside [1, " +
                                std::to_string(w_o.rows()) + "]");
  }
  const auto row = w_o.row(j - 1);
  double energy = 0.0;
  for (std::size_t i = 0; i < w_v_full.cols(); ++i) {
    double dot = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) dot += row[k] * w_v_full(k, i);
    energy += dot * dot;
  }
  return energy;
}

double predict_final_ln_variance(const Matrix& w_o, const Matrix& w_v_full, const ModelConfig& c,
                                 std::size_t m, std::size_t j) {
  check_position(c, m);
  if (w_o.rows() != c.d || w_o.cols() != c.d || w_v_full.rows() != c.d || w_v_full.cols() != c.d) {
    throw std::invalid_argument("predict_final_ln_variance: expected " + std::to_string(c.d) + "x" +
                                std::to_string(c.d) + " matrices, got W_o " + w_o.shape_string() +
                                " and W_v " + w_v_full.shape_string());
  }
  const double m_sigma2 = static_cast<double>(m) * c.sigma * c.sigma;
  return (m_sigma2 + projected_row_energy(w_o, w_v_full, j)) / (m_sigma2 + output_scale(c));
}

Property1Check check_property1(const ModelConfig& c, double threshold) {
  Property1Check out;
  out.margin = predict_logit_variance(c, true);
  out.threshold = threshold;
  out.holds = out.margin < threshold;
  return out;
}

TheoryPrediction predict(const ModelConfig& c, double property1_threshold) {
  c.validate();
  TheoryPrediction p;
  p.config = c;
  p.var_qkv = predict_qkv_variance(c);
  p.var_logit = predict_logit_variance(c, false);
  p.var_scaled_logit = predict_logit_variance(c, true);
  p.var_logit_implied = implied_logit_variance(c, false);
  p.var_scaled_logit_implied = implied_logit_variance(c, true);
  p.var_output.reserve(c.seq_len);
  p.var_residual.reserve(c.seq_len);
  for (std::size_t m = 1; m <= c.seq_len; ++m) {
    p.var_output.push_back(predict_output_variance(c, m));
    p.var_residual.push_back(predict_residual_variance(c, m));
  }
  p.var_bidirectional = predict_bidirectional_output_variance(c);
  p.property1 = check_property1(c, property1_threshold);
  return p;
}

std::string format_theory(const TheoryPrediction& p) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  const auto& c = p.config;
  std::ostringstream out;
  out << "config: d=" << c.d << " heads=" << c.heads << " head_dim=" << c.head_dim()
      << " seq_len=" << c.seq_len << " sigma=" << num(c.sigma) << '\n';
  out << "var(q|k|v coordinate)      d*sigma^2        = " << num(p.var_qkv) << '\n';
  out << "var(l_mn)                  d^3 sigma^4/H^2  = " << num(p.var_logit) << '\n';
  out << "var(l_mn/sqrt(d/H))        d^2 sigma^4/H    = " << num(p.var_scaled_logit) << '\n';
  out << "  implied by q/k covariance d^3 sigma^4/H    = " << num(p.var_logit_implied) << '\n';
  out << "  implied, scaled          d^2 sigma^4      = " << num(p.var_scaled_logit_implied) << '\n';
  out << "var(o_m), causal           d^2 sigma^4/m    : m=1 " << num(p.var_output.front());
  for (std::size_t m : {2u, 16u, 128u}) {
    if (m <= p.var_output.size()) out << ", m=" << m << ' ' << num(p.var_output[m - 1]);
  }
  out << ", m=L " << num(p.var_output.back()) << '\n';
  out << "var(y_m)                   sigma^2 + d^2 sigma^4/m : m=1 " << num(p.var_residual.front())
      << ", m=L " << num(p.var_residual.back()) << '\n';
  out << "var(o_m), bidirectional    d^2 sigma^4/L    = " << num(p.var_bidirectional) << '\n';
  out << "near-uniform attention     margin sigma^4 d^2/H = " << num(p.property1.margin)
      << (p.property1.holds ? " < " : " >= ") << num(p.property1.threshold)
      << (p.property1.holds ? " (holds)" : " (does not hold)") << '\n';
  return out.str();
}

}  // namespace nope
