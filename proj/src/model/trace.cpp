#include "nope/model/trace.hpp"

#include <stdexcept>
#include <string>

#include "nope/errors.hpp"
#include "nope/model/attention.hpp"
#include "nope/model/layer_norm.hpp"

namespace nope {
namespace {

void check_input(const FrozenModel& model, const Matrix& x) {
  const auto& c = model.config();
  if (x.cols() != c.d || x.rows() == 0) {
    throw ShapeError("forward: input " + x.shape_string() + " does not have " + std::to_string(c.d) +
                     " columns");
  }
}

Matrix layer_norm_cfg(const ModelConfig& c, const Matrix& x) {
  return layer_norm_rows(x, c.gamma, c.beta, c.ln_epsilon);
}

}  // namespace

TraceBundle forward(const FrozenModel& model, const Matrix& x, CaptureSet capture) {
  check_input(model, x);
  const auto& c = model.config();
  TraceBundle trace;
  if (capture.has(Tensor::input)) trace.input = x;
  trace.layers.resize(model.num_layers());

  Matrix stream = x;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const LayerWeights& w = model.layer(l);
    LayerTrace& t = trace.layers[l];
    Matrix e = layer_norm_cfg(c, stream);
    AttentionResult attn = attention_forward(e, w, c.attention_mode, capture.has(Tensor::logits));
    Matrix residual = add(stream, attn.output);
    Matrix out = residual;
    if (w.ffn) out = add(residual, ffn_forward(layer_norm_cfg(c, residual), w));

    if (capture.has(Tensor::ln_out)) t.ln_out = std::move(e);
    if (capture.has(Tensor::logits)) t.logits = std::move(attn.logits);
    if (capture.has(Tensor::attention)) t.attention = std::move(attn.weights);
    if (capture.has(Tensor::values)) t.values = std::move(attn.values);
    if (capture.has(Tensor::mha_output)) t.mha_output = std::move(attn.output);
    if (capture.has(Tensor::residual)) t.residual = std::move(residual);
    if (capture.has(Tensor::layer_output)) t.layer_output = out;
    stream = std::move(out);
  }
  if (capture.has(Tensor::final_output)) trace.final_output = layer_norm_cfg(c, stream);
  return trace;
}

std::vector<Matrix> normalized_depth_outputs(const FrozenModel& model, const Matrix& x) {
  const auto& c = model.config();
  const TraceBundle trace = forward(model, x, CaptureSet::none().with(Tensor::layer_output));
  std::vector<Matrix> out;
  out.reserve(model.num_layers() + 1);
  out.push_back(layer_norm_cfg(c, x));
  for (const auto& t : trace.layers) out.push_back(layer_norm_cfg(c, t.layer_output));
  return out;
}

TensorSelector parse_selector(std::string_view text) {
  std::string_view name = text;
  std::size_t layer = 0;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    name = text.substr(0, colon);
    const std::string digits(text.substr(colon + 1));
    std::size_t consumed = 0;
    try {
      layer = std::stoul(digits, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (digits.empty() || consumed != digits.size()) {
      throw std::invalid_argument("selector '" + std::string(text) + "': bad layer index");
    }
  }
  if (name == "input") return {Tensor::input, 0};
  if (name == "final") return {Tensor::final_output, 0};
  if (name == "ln") return {Tensor::ln_out, layer};
  if (name == "mha") return {Tensor::mha_output, layer};
  if (name == "residual") return {Tensor::residual, layer};
  if (name == "output") return {Tensor::layer_output, layer};
  throw std::invalid_argument("unknown tensor selector '" + std::string(text) + "'");
}

const Matrix& select(const TraceBundle& trace, TensorSelector selector) {
  const Matrix* m = nullptr;
  if (selector.tensor == Tensor::input) {
    m = &trace.input;
  } else if (selector.tensor == Tensor::final_output) {
    m = &trace.final_output;
  } else {
    if (selector.layer >= trace.layers.size()) {
      throw std::invalid_argument("selector layer " + std::to_string(selector.layer) +
                                  " outside a trace of " + std::to_string(trace.layers.size()) +
                                  " layers");
    }
    const LayerTrace& t = trace.layers[selector.layer];
    switch (selector.tensor) {
      case Tensor::ln_out: m = &t.ln_out; break;
      case Tensor::mha_output: m = &t.mha_output; break;
      case Tensor::residual: m = &t.residual; break;
      case Tensor::layer_output: m = &t.layer_output; break;
      default:
        throw std::invalid_argument("selector does not name an L x d tensor");
    }
  }
  if (m->empty()) throw std::invalid_argument("selected tensor was not captured");
  return *m;
}

std::vector<double> per_position_variance(std::span<const TraceBundle> traces,
                                          TensorSelector selector, VarianceKind kind) {
  if (traces.size() < 2) {
    throw std::invalid_argument("per_position_variance: need at least 2 traces, got " +
                                std::to_string(traces.size()));
  }
  const Matrix& first = select(traces.front(), selector);
  PositionVarianceAccumulator acc(first.rows(), first.cols());
  for (const auto& t : traces) acc.add(select(t, selector));
  return acc.pooled_variance(kind);
}

}  // namespace nope
