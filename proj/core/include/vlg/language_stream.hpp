#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vlg/graphs.hpp"
#include "vlg/params.hpp"
#include "vlg/tensor.hpp"

namespace vlg {

struct LanguageStreamConfig {
  std::size_t input_width = 0;   // c_l
  std::size_t hidden_width = 0;  // c
  std::size_t lstm_layers = 1;   // b_s
  std::size_t syntac_layers = 1; // b_l
  std::size_t attention_width = 0;  // 0 -> c / 2
  bool bidirectional = false;
  bool head_to_dependent_only = false;

  std::size_t attention_hidden() const;
  void validate() const;
};

template <typename T>
struct LstmLayer {
  Tensor<T> w_ih;  // [4h x in], gate order i, f, g, o
  Tensor<T> w_hh;  // [4h x h]
  Tensor<T> bias;  // [4h x 1]

  static LstmLayer create(ParameterSet<T>& params, const std::string& prefix, std::size_t in_width,
                          std::size_t hidden, Rng& rng);
  // Runs over columns of x [in x n] (reversed when `reverse`), zero initial state.
  Tensor<T> forward(const Tensor<T>& x, bool reverse = false) const;
};

template <typename T>
struct LstmParams {
  std::vector<LstmLayer<T>> forward_layers;
  std::vector<LstmLayer<T>> backward_layers;  // empty unless bidirectional
  Tensor<T> merge;                            // [h x 2h], bidirectional only

  static LstmParams create(ParameterSet<T>& params, const LanguageStreamConfig& config, Rng& rng);
};

// Top-layer hidden states [h x n_l].
template <typename T>
Tensor<T> lstm_forward(const Tensor<T>& tokens, const LstmParams<T>& params);

template <typename T>
struct SyntacGcnLayer {
  Tensor<T> w_l;        // [c x c]
  Tensor<T> w_alpha;    // [a x 2c]
  Tensor<T> v_alpha;    // [1 x a]

  static SyntacGcnLayer create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                               std::size_t attention, Rng& rng);
};

template <typename T>
struct SyntacGcnResult {
  Tensor<T> output;  // [c x n_l]
  Tensor<T> alpha;   // [1 x E] in EdgeSet::flatten() order; undefined without edges
  EdgeSet::Flat edges;
};

// X_j <- relu(X_j + sum_{k in N(j)} alpha_jk W_l X_k), alpha softmax-normalized
// over N(j) from v^T relu(W [X_j || X_k]).
template <typename T>
SyntacGcnResult<T> syntacgcn_forward(const Tensor<T>& x, const EdgeSet& syntactic, const SyntacGcnLayer<T>& layer);

template <typename T>
class LanguageStream {
 public:
  LanguageStream(ParameterSet<T>& params, const LanguageStreamConfig& config, Rng& rng);

  Tensor<T> forward(const Tensor<T>& tokens, const DependencyParse& parse) const;

  const LanguageStreamConfig& config() const { return config_; }
  const LstmParams<T>& lstm() const { return lstm_; }
  const std::vector<SyntacGcnLayer<T>>& syntac_layers() const { return syntac_; }

 private:
  LanguageStreamConfig config_;
  LstmParams<T> lstm_;
  std::vector<SyntacGcnLayer<T>> syntac_;
};

}  // namespace vlg
