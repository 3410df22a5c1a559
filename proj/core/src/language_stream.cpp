#include "vlg/language_stream.hpp"

#include <cmath>

#include "vlg/error.hpp"
#include "vlg/ops.hpp"

namespace vlg {

std::size_t LanguageStreamConfig::attention_hidden() const {
  return attention_width ? attention_width : std::max<std::size_t>(1, hidden_width / 2);
}

void LanguageStreamConfig::validate() const {
  if (input_width == 0 || hidden_width == 0 || lstm_layers == 0) {
    throw ConfigError("language stream: widths and LSTM layer count must be positive");
  }
}

template <typename T>
LstmLayer<T> LstmLayer<T>::create(ParameterSet<T>& params, const std::string& prefix, std::size_t in_width,
                                  std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmLayer layer;
  layer.w_ih = params.add(prefix + ".w_ih", uniform<T>({4 * hidden, in_width}, bound, rng));
  layer.w_hh = params.add(prefix + ".w_hh", uniform<T>({4 * hidden, hidden}, bound, rng));
  layer.bias = params.add(prefix + ".bias", uniform<T>({4 * hidden, 1}, bound, rng));
  return layer;
}

template <typename T>
Tensor<T> LstmLayer<T>::forward(const Tensor<T>& x, bool reverse) const {
  const std::size_t hidden = w_hh.dim(1);
  const std::size_t n = x.dim(1);
  if (x.dim(0) != w_ih.dim(1)) {
    throw DimensionError("LSTM layer expects " + std::to_string(w_ih.dim(1)) + " input channels, got " +
                         shape_str(x.shape()));
  }
  const Tensor<T> projected = add(matmul(w_ih, x), bias);  // [4h x n]
  Tensor<T> h = Tensor<T>::zeros({hidden, 1});
  Tensor<T> c = Tensor<T>::zeros({hidden, 1});
  std::vector<Tensor<T>> outputs(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    const Tensor<T> gates = add(slice(projected, 1, t, t + 1), matmul(w_hh, h));
    const Tensor<T> in_gate = sigmoid(slice(gates, 0, 0, hidden));
    const Tensor<T> forget_gate = sigmoid(slice(gates, 0, hidden, 2 * hidden));
    const Tensor<T> candidate = tanh(slice(gates, 0, 2 * hidden, 3 * hidden));
    const Tensor<T> out_gate = sigmoid(slice(gates, 0, 3 * hidden, 4 * hidden));
    c = add(mul(forget_gate, c), mul(in_gate, candidate));
    h = mul(out_gate, tanh(c));
    outputs[t] = h;
  }
  return n == 1 ? outputs[0] : concat(outputs, 1);
}

template <typename T>
LstmParams<T> LstmParams<T>::create(ParameterSet<T>& params, const LanguageStreamConfig& config, Rng& rng) {
  LstmParams p;
  const std::size_t h = config.hidden_width;
  std::size_t in_width = config.input_width;
  for (std::size_t l = 0; l < config.lstm_layers; ++l) {
    p.forward_layers.push_back(LstmLayer<T>::create(params, "lang.lstm" + std::to_string(l), in_width, h, rng));
    if (config.bidirectional) {
      p.backward_layers.push_back(
          LstmLayer<T>::create(params, "lang.lstm" + std::to_string(l) + "_reverse", in_width, h, rng));
    }
    in_width = config.bidirectional ? 2 * h : h;
  }
  if (config.bidirectional) p.merge = params.add("lang.lstm_merge", glorot_uniform<T>({h, 2 * h}, 2 * h, h, rng));
  return p;
}

template <typename T>
Tensor<T> lstm_forward(const Tensor<T>& tokens, const LstmParams<T>& params) {
  if (tokens.rank() != 2) throw DimensionError("LSTM expects [c_l x n_l] tokens, got " + shape_str(tokens.shape()));
  Tensor<T> x = tokens;
  const bool bidirectional = !params.backward_layers.empty();
  for (std::size_t l = 0; l < params.forward_layers.size(); ++l) {
    Tensor<T> fwd = params.forward_layers[l].forward(x);
    x = bidirectional ? concat<T>({fwd, params.backward_layers[l].forward(x, true)}, 0) : fwd;
  }
  return bidirectional ? matmul(params.merge, x) : x;
}

template <typename T>
SyntacGcnLayer<T> SyntacGcnLayer<T>::create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                                            std::size_t attention, Rng& rng) {
  SyntacGcnLayer layer;
  layer.w_l = params.add(prefix + ".w_l", glorot_uniform<T>({width, width}, width, width, rng));
  layer.w_alpha = params.add(prefix + ".w_alpha", glorot_uniform<T>({attention, 2 * width}, 2 * width, attention, rng));
  layer.v_alpha = params.add(prefix + ".v_alpha", glorot_uniform<T>({1, attention}, attention, 1, rng));
  return layer;
}

template <typename T>
SyntacGcnResult<T> syntacgcn_forward(const Tensor<T>& x, const EdgeSet& syntactic, const SyntacGcnLayer<T>& layer) {
  if (x.rank() != 2 || x.dim(0) != layer.w_l.dim(0)) {
    throw DimensionError("SyntacGCN expects [" + std::to_string(layer.w_l.dim(0)) + " x n_l] features, got " +
                         shape_str(x.shape()));
  }
  const std::size_t n = x.dim(1);
  if (syntactic.node_count != n) {
    throw DimensionError("syntactic edges cover " + std::to_string(syntactic.node_count) + " tokens, features have " +
                         std::to_string(n));
  }
  SyntacGcnResult<T> result;
  result.edges = syntactic.flatten();
  for (auto i : result.edges.source) {
    if (i >= n) throw DimensionError("syntactic edge index " + std::to_string(i) + " exceeds token count");
  }
  if (result.edges.source.empty()) {
    result.output = relu(x);
    return result;
  }
  const auto& src = result.edges.source;
  const auto& dst = result.edges.target;
  const Tensor<T> pairs = concat<T>({gather_columns(x, dst), gather_columns(x, src)}, 0);
  const Tensor<T> scores = matmul(layer.v_alpha, relu(matmul(layer.w_alpha, pairs)));
  result.alpha = segment_softmax(scores, dst, n);
  const Tensor<T> messages = mul(gather_columns(matmul(layer.w_l, x), src), result.alpha);
  result.output = relu(add(x, scatter_add_columns(messages, dst, n)));
  return result;
}

template <typename T>
LanguageStream<T>::LanguageStream(ParameterSet<T>& params, const LanguageStreamConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  lstm_ = LstmParams<T>::create(params, config_, rng);
  for (std::size_t l = 0; l < config_.syntac_layers; ++l) {
    syntac_.push_back(SyntacGcnLayer<T>::create(params, "lang.syntac" + std::to_string(l), config_.hidden_width,
                                                config_.attention_hidden(), rng));
  }
}

template <typename T>
Tensor<T> LanguageStream<T>::forward(const Tensor<T>& tokens, const DependencyParse& parse) const {
  if (tokens.rank() != 2 || tokens.dim(0) != config_.input_width) {
    throw DimensionError("language stream expects " + std::to_string(config_.input_width) +
                         " x n_l token features, got " + shape_str(tokens.shape()));
  }
  Tensor<T> x = lstm_forward(tokens, lstm_);
  const EdgeSet edges = build_syntactic_edges(parse, tokens.dim(1), config_.head_to_dependent_only);
  for (const auto& layer : syntac_) x = syntacgcn_forward(x, edges, layer).output;
  return x;
}

#define VLG_INSTANTIATE_LANGUAGE(T)                                                                  \
  template struct LstmLayer<T>;                                                                      \
  template struct LstmParams<T>;                                                                     \
  template Tensor<T> lstm_forward(const Tensor<T>&, const LstmParams<T>&);                           \
  template struct SyntacGcnLayer<T>;                                                                 \
  template SyntacGcnResult<T> syntacgcn_forward(const Tensor<T>&, const EdgeSet&, const SyntacGcnLayer<T>&); \
  template class LanguageStream<T>;

VLG_INSTANTIATE_LANGUAGE(float)
VLG_INSTANTIATE_LANGUAGE(double)

}  // namespace vlg
