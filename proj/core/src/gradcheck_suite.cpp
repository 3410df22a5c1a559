#include "vlg/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "vlg/error.hpp"
#include "vlg/fusion.hpp"
#include "vlg/language_stream.hpp"
#include "vlg/localization.hpp"
#include "vlg/moments.hpp"
#include "vlg/ops.hpp"
#include "vlg/params.hpp"
#include "vlg/video_stream.hpp"

namespace vlg {

namespace {

using T = double;
using Fn = std::function<Tensor<T>()>;

struct Instance {
  Fn fn;
  std::vector<Tensor<T>> inputs;
};

struct Case {
  const char* module;
  const char* op;
  std::function<Instance(Rng&)> build;
};

Tensor<T> rand(Shape shape, Rng& rng, double bound = 1.0) { return uniform<T>(std::move(shape), bound, rng); }

// Scalar readout sum(out * R) with a fixed random R, so every output
// coordinate contributes a distinct weight.
Fn contract(std::function<Tensor<T>()> f, Shape shape, Rng& rng) {
  const Tensor<T> weights = rand(std::move(shape), rng);
  return [f = std::move(f), weights] { return sum(mul(f(), weights)); };
}

// Parameter values drawn away from zero so bias gradients are exercised.
std::vector<Tensor<T>> randomized(ParameterSet<T>& params, Rng& rng) {
  std::vector<Tensor<T>> out;
  std::uniform_real_distribution<double> dist(-0.6, 0.6);
  for (const auto& e : params.entries()) {
    auto t = e.tensor;
    for (auto& v : t.mutable_data()) v = dist(rng);
    out.push_back(t);
  }
  return out;
}

DependencyParse random_tree(std::size_t n, Rng& rng) {
  DependencyParse parse;
  for (std::size_t i = 0; i < n; ++i) {
    DependencyArc arc;
    arc.dependent = i;
    if (i > 0) arc.head = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    parse.arcs.push_back(arc);
  }
  return parse;
}

// y = x^2 with a backward pass that is off by a factor of 2.
Tensor<T> faulty_square(const Tensor<T>& x) {
  std::vector<T> value(x.numel());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = x[i] * x[i];
  return make_result<T>(x.shape(), std::move(value), {x.node_ptr()}, [xn = x.node_ptr()](Node<T>& self) {
    auto g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * 2.0 * xn->value[i] * self.grad[i];
  });
}

std::vector<Case> all_cases() {
  std::vector<Case> cases;
  auto elementwise = [&](const char* op, std::function<Tensor<T>(const Tensor<T>&)> f) {
    cases.push_back({"tensor", op, [f](Rng& rng) {
                       auto x = rand({3, 4}, rng);
                       return Instance{contract([=] { return f(x); }, {3, 4}, rng), {x}};
                     }});
  };

  cases.push_back({"tensor", "matmul", [](Rng& rng) {
                     auto a = rand({3, 4}, rng), b = rand({4, 2}, rng);
                     return Instance{contract([=] { return matmul(a, b); }, {3, 2}, rng), {a, b}};
                   }});
  cases.push_back({"tensor", "transpose_reshape", [](Rng& rng) {
                     auto a = rand({3, 4}, rng);
                     return Instance{contract([=] { return reshape(transpose(a), {2, 6}); }, {2, 6}, rng), {a}};
                   }});
  cases.push_back({"tensor", "add_broadcast", [](Rng& rng) {
                     auto a = rand({3, 4}, rng), b = rand({1, 4}, rng), c = rand({3, 1}, rng);
                     return Instance{contract([=] { return add(add(a, b), c); }, {3, 4}, rng), {a, b, c}};
                   }});
  cases.push_back({"tensor", "sub_broadcast", [](Rng& rng) {
                     auto a = rand({3, 4}, rng), b = rand({4}, rng);
                     return Instance{contract([=] { return sub(a, b); }, {3, 4}, rng), {a, b}};
                   }});
  cases.push_back({"tensor", "mul_broadcast", [](Rng& rng) {
                     auto a = rand({3, 4}, rng), b = rand({3, 1}, rng);
                     return Instance{contract([=] { return mul(a, b); }, {3, 4}, rng), {a, b}};
                   }});
  elementwise("scale", [](const Tensor<T>& x) { return scale(x, 1.7); });
  elementwise("relu", [](const Tensor<T>& x) { return relu(x); });
  elementwise("sigmoid", [](const Tensor<T>& x) { return sigmoid(x); });
  elementwise("tanh", [](const Tensor<T>& x) { return tanh(x); });
  elementwise("softmax_axis0", [](const Tensor<T>& x) { return softmax(x, 0); });
  elementwise("softmax_axis1", [](const Tensor<T>& x) { return softmax(x, 1); });
  elementwise("slice", [](const Tensor<T>& x) { return concat<T>({slice(x, 1, 1, 3), slice(x, 1, 0, 2)}, 1); });
  cases.push_back({"tensor", "concat", [](Rng& rng) {
                     auto a = rand({2, 3}, rng), b = rand({1, 3}, rng), c = rand({3, 2}, rng);
                     return Instance{contract([=] { return concat<T>({transpose(concat<T>({a, b}, 0)), c}, 1); },
                                              {3, 5}, rng),
                                     {a, b, c}};
                   }});
  cases.push_back({"tensor", "gather_scatter", [](Rng& rng) {
                     auto a = rand({3, 4}, rng);
                     const std::vector<std::size_t> idx{2, 0, 2, 3, 1, 2};
                     const std::vector<std::size_t> dst{0, 4, 1, 1, 3, 0};
                     return Instance{contract([=] { return scatter_add_columns(gather_columns(a, idx), dst, 5); },
                                              {3, 5}, rng),
                                     {a}};
                   }});
  cases.push_back({"tensor", "sum_mean_axis", [](Rng& rng) {
                     auto a = rand({3, 4}, rng);
                     auto w = rand({1, 4}, rng);
                     return Instance{[=] { return add(sum(mul(sum_axis(a, 0), w)), mean(mul(a, a))); }, {a}};
                   }});
  cases.push_back({"tensor", "segment_softmax", [](Rng& rng) {
                     auto s = rand({1, 7}, rng, 2.0);
                     const std::vector<std::size_t> seg{0, 2, 0, 2, 2, 3, 0};
                     return Instance{contract([=] { return segment_softmax(s, seg, 4); }, {1, 7}, rng), {s}};
                   }});
  cases.push_back({"tensor", "conv1d_k3", [](Rng& rng) {
                     auto x = rand({3, 5}, rng), k = rand({2, 3, 3}, rng), b = rand({2}, rng);
                     return Instance{contract([=] { return conv1d(x, k, b); }, {2, 5}, rng), {x, k, b}};
                   }});
  cases.push_back({"tensor", "conv1d_k1", [](Rng& rng) {
                     auto x = rand({4, 3}, rng), k = rand({2, 4, 1}, rng), b = rand({2}, rng);
                     return Instance{contract([=] { return conv1d(x, k, b); }, {2, 3}, rng), {x, k, b}};
                   }});
  cases.push_back({"tensor", "bce_with_logits", [](Rng& rng) {
                     auto z = rand({1, 6}, rng, 3.0);
                     auto t = uniform<T>({1, 6}, 0.5, rng);
                     for (auto& v : t.mutable_data()) v += 0.5;
                     return Instance{[=] { return bce_with_logits(z, t); }, {z}};
                   }});

  // ---- video stream ----
  cases.push_back({"video_stream", "input_projection", [](Rng& rng) {
                     ParameterSet<T> params;
                     auto proj = InputProjection<T>::create(params, "p", 6, 4, rng);
                     auto inputs = randomized(params, rng);
                     auto x = rand({6, 5}, rng);
                     inputs.push_back(x);
                     return Instance{contract([=] { return proj.forward(x); }, {4, 5}, rng), inputs};
                   }});
  cases.push_back({"video_stream", "edge_conv_branch", [](Rng& rng) {
                     ParameterSet<T> params;
                     auto branch = EdgeConvBranch<T>::create(params, "b", 4, 2, 2, rng);
                     auto inputs = randomized(params, rng);
                     auto x = rand({4, 5}, rng);
                     inputs.push_back(x);
                     const auto edges = build_ordering_edges(5);
                     return Instance{contract([=] { return branch.forward(x, edges); }, {4, 5}, rng), inputs};
                   }});
  cases.push_back({"video_stream", "gcnext", [](Rng& rng) {
                     ParameterSet<T> params;
                     GcnextParams<T> block{EdgeConvBranch<T>::create(params, "o", 4, 2, 2, rng),
                                           EdgeConvBranch<T>::create(params, "s", 4, 2, 2, rng)};
                     auto inputs = randomized(params, rng);
                     auto x = rand({4, 6}, rng);
                     inputs.push_back(x);
                     const auto ordering = build_ordering_edges(6);
                     const auto semantic = build_semantic_edges(x, 2);
                     return Instance{
                         contract([=] { return gcnext_forward(x, ordering, semantic, block); }, {4, 6}, rng), inputs};
                   }});

  // ---- language stream ----
  cases.push_back({"language_stream", "lstm_cell", [](Rng& rng) {
                     ParameterSet<T> params;
                     auto layer = LstmLayer<T>::create(params, "l", 3, 2, rng);
                     auto inputs = randomized(params, rng);
                     auto x = rand({3, 4}, rng);
                     inputs.push_back(x);
                     return Instance{contract([=] { return layer.forward(x); }, {2, 4}, rng), inputs};
                   }});
  cases.push_back({"language_stream", "lstm_bidirectional", [](Rng& rng) {
                     LanguageStreamConfig cfg;
                     cfg.input_width = 3;
                     cfg.hidden_width = 2;
                     cfg.lstm_layers = 2;
                     cfg.bidirectional = true;
                     ParameterSet<T> params;
                     auto lstm = LstmParams<T>::create(params, cfg, rng);
                     auto inputs = randomized(params, rng);
                     auto x = rand({3, 4}, rng);
                     inputs.push_back(x);
                     return Instance{contract([=] { return lstm_forward(x, lstm); }, {2, 4}, rng), inputs};
                   }});
  cases.push_back({"language_stream", "syntacgcn", [](Rng& rng) {
                     ParameterSet<T> params;
                     auto layer = SyntacGcnLayer<T>::create(params, "g", 4, 3, rng);
                     auto inputs = randomized(params, rng);
                     auto x = rand({4, 5}, rng);
                     inputs.push_back(x);
                     const auto edges = build_syntactic_edges(random_tree(5, rng), 5);
                     return Instance{contract([=] { return syntacgcn_forward(x, edges, layer).output; }, {4, 5}, rng),
                                     inputs};
                   }});
  cases.push_back({"language_stream", "syntacgcn_alpha", [](Rng& rng) {
                     ParameterSet<T> params;
                     auto layer = SyntacGcnLayer<T>::create(params, "g", 4, 3, rng);
                     auto inputs = randomized(params, rng);
                     auto x = rand({4, 5}, rng);
                     inputs.push_back(x);
                     const auto edges = build_syntactic_edges(random_tree(5, rng), 5);
                     return Instance{
                         contract([=] { return syntacgcn_forward(x, edges, layer).alpha; }, {1, edges.edge_count()}, rng),
                         inputs};
                   }});

  // ---- fusion ----
  auto matching_case = [&](const char* op, bool scalars_only) {
    cases.push_back({"fusion", op, [scalars_only](Rng& rng) {
                       const std::size_t c = 3, n_v = 4, n_l = 3;
                       ParameterSet<T> params;
                       const EdgeToggles toggles;
                       auto fp = FusionParams<T>::create(params, "f", c, toggles, rng);
                       auto inputs = randomized(params, rng);
                       auto v = rand({c, n_v}, rng), l = rand({c, n_l}, rng);
                       inputs.push_back(v);
                       inputs.push_back(l);
                       const auto base = assemble_matching_graph(v, l, 2, toggles);
                       auto build = [=] {
                         MatchingGraph<T> g = base;
                         g.features = concat<T>({v, l}, 1);
                         return g;
                       };
                       if (scalars_only) {
                         const auto probe = compute_edge_scalars(base);
                         const Tensor<T> wb = rand({1, probe.beta.numel()}, rng), wg = rand({1, probe.gamma.numel()}, rng);
                         return Instance{[=] {
                                           const auto s = compute_edge_scalars(build());
                                           return add(sum(mul(s.beta, wb)), sum(mul(s.gamma, wg)));
                                         },
                                         inputs};
                       }
                       const Tensor<T> wv = rand({c, n_v}, rng), wl = rand({c, n_l}, rng);
                       return Instance{[=] {
                                         const auto g = build();
                                         const auto out = graph_match_forward(g, compute_edge_scalars(g), fp);
                                         return add(sum(mul(out.video, wv)), sum(mul(out.language, wl)));
                                       },
                                       inputs};
                     }});
  };
  matching_case("graph_match", false);
  matching_case("edge_scalars_beta_gamma", true);
  cases.push_back({"fusion", "hadamard", [](Rng& rng) {
                     auto v = rand({4, 5}, rng), q = rand({4, 1}, rng);
                     return Instance{contract([=] { return hadamard_snippet_fusion(v, q); }, {4, 5}, rng), {v, q}};
                   }});
  cases.push_back({"fusion", "concat_projection", [](Rng& rng) {
                     auto v = rand({4, 5}, rng), q = rand({4, 1}, rng), p = rand({4, 8}, rng);
                     return Instance{contract([=] { return concat_snippet_fusion(v, q, p); }, {4, 5}, rng), {v, q, p}};
                   }});

  // ---- moments ----
  auto pooling_case = [&](const char* op, PoolingVariant variant) {
    cases.push_back({"moments", op, [variant](Rng& rng) {
                       const std::size_t c = 4, n_v = 6;
                       ParameterSet<T> params;
                       auto pooling = PoolingParams<T>::create(params, "p", variant, c, rng);
                       auto inputs = randomized(params, rng);
                       auto v = rand({c, n_v}, rng), q = rand({c, 1}, rng);
                       inputs.push_back(v);
                       if (variant != PoolingVariant::kLearnableSelf) inputs.push_back(q);
                       const auto cands = enumerate_candidates(n_v, 6.0, SamplingConfig::default_for(n_v));
                       const auto mask = cands.mask<T>();
                       std::optional<Tensor<T>> query;
                       if (variant != PoolingVariant::kLearnableSelf) query = q;
                       return Instance{contract([=] { return masked_attention_pool(v, query, cands, mask, pooling).pooled; },
                                                {c, cands.size()}, rng),
                                       inputs};
                     }});
  };
  pooling_case("pool_learnable_self", PoolingVariant::kLearnableSelf);
  pooling_case("pool_cross", PoolingVariant::kCross);
  pooling_case("pool_learnable_cross", PoolingVariant::kLearnableCross);
  cases.push_back({"moments", "query_self_attention", [](Rng& rng) {
                     ParameterSet<T> params;
                     auto scorer = ScoreConv<T>::create(params, "q", 4, rng);
                     auto inputs = randomized(params, rng);
                     auto l = rand({4, 5}, rng);
                     inputs.push_back(l);
                     return Instance{contract([=] { return self_attention_pool_query(l, scorer).pooled; }, {4, 1}, rng),
                                     inputs};
                   }});

  // ---- localization ----
  cases.push_back({"localization", "scorer_mlp", [](Rng& rng) {
                     ParameterSet<T> params;
                     auto scorer = ScorerParams<T>::create(params, "s", 4, 3, rng);
                     auto inputs = randomized(params, rng);
                     auto x = rand({4, 7}, rng);
                     inputs.push_back(x);
                     return Instance{contract([=] { return score_moments(x, scorer).logits; }, {1, 7}, rng), inputs};
                   }});
  cases.push_back({"localization", "bce_soft_labels", [](Rng& rng) {
                     const auto cands = enumerate_candidates(8, 8.0, SamplingConfig::default_for(8));
                     std::uniform_real_distribution<double> pos(0.0, 6.0);
                     const double s = pos(rng);
                     const auto labels = soft_iou_labels<T>(cands, {s, s + 2.0}, LossConfig{0.3, 0.7});
                     auto z = rand({1, cands.size()}, rng, 3.0);
                     return Instance{[=] { return bce_loss(z, labels); }, {z}};
                   }});
  return cases;
}

}  // namespace

const std::vector<std::string>& gradcheck_modules() {
  static const std::vector<std::string> modules{"tensor", "video_stream", "language_stream", "fusion", "moments",
                                                "localization"};
  return modules;
}

std::vector<SuiteCaseResult> run_gradcheck_suite(const SuiteOptions& options) {
  const auto& modules = gradcheck_modules();
  if (!options.module.empty() && std::find(modules.begin(), modules.end(), options.module) == modules.end()) {
    std::string known;
    for (const auto& m : modules) known += (known.empty() ? "" : ", ") + m;
    throw ConfigError("unknown gradcheck module '" + options.module + "' (known: " + known + ")");
  }
  if (options.seeds == 0) throw ConfigError("gradcheck needs at least one seed");
  auto cases = all_cases();
  if (options.inject_fault) {
    cases.push_back({"tensor", "injected_fault", [](Rng& rng) {
                       auto x = rand({2, 3}, rng);
                       return Instance{contract([=] { return faulty_square(x); }, {2, 3}, rng), {x}};
                     }});
  }

  std::vector<SuiteCaseResult> results;
  for (const auto& c : cases) {
    if (!options.module.empty() && options.module != c.module) continue;
    SuiteCaseResult result;
    result.module = c.module;
    result.op = c.op;
    result.seeds = options.seeds;
    result.passed = true;
    for (std::size_t seed = 0; seed < options.seeds; ++seed) {
      Rng rng(0x9e3779b97f4a7c15ULL * (seed + 1));
      auto instance = c.build(rng);
      auto report = grad_check(instance.fn, instance.inputs, options.check);
      if (!report.passed || seed == 0 || report.max_relative_error > result.worst.max_relative_error) {
        result.worst = report;
        result.worst_seed = seed;
      }
      if (!report.passed) {
        result.passed = false;
        break;
      }
    }
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace vlg
