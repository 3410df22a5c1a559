#include <benchmark/benchmark.h>

#include <random>

#include "test_support.hpp"
#include "vlg/dataio.hpp"
#include "vlg/fusion.hpp"
#include "vlg/model.hpp"
#include "vlg/moments.hpp"
#include "vlg/ops.hpp"

namespace {

using namespace vlg;

Tensor<float> random(Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  return testing::random_tensor<float>(std::move(shape), rng, -1.0, 1.0, grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random({n, n}, 1), b = random({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Conv1d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random({128, n}, 3), kernel = random({128, 128, 3}, 4), bias = random({128}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, kernel, bias));
}
BENCHMARK(BM_Conv1d)->Arg(16)->Arg(64)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  for (auto _ : state) {
    const auto a = random({128, 128}, 6, true), b = random({128, 128}, 7, true);
    backward(sum(matmul(a, b)));
    benchmark::DoNotOptimize(a.grad());
  }
}
BENCHMARK(BM_MatmulBackward);

void BM_GraphMatch(benchmark::State& state) {
  const auto n_v = static_cast<std::size_t>(state.range(0));
  ParameterSet<float> params;
  Rng rng(8);
  const auto layer = FusionParams<float>::create(params, "f", 64, EdgeToggles{}, rng);
  const auto graph = assemble_matching_graph(random({64, n_v}, 9), random({64, 12}, 10), 3, EdgeToggles{});
  const auto scalars = compute_edge_scalars(graph);
  for (auto _ : state) benchmark::DoNotOptimize(graph_match_forward(graph, scalars, layer));
}
BENCHMARK(BM_GraphMatch)->Arg(16)->Arg(64);

void BM_MaskedPooling(benchmark::State& state) {
  const auto n_v = static_cast<std::size_t>(state.range(0));
  ParameterSet<float> params;
  Rng rng(11);
  const auto pool = PoolingParams<float>::create(params, "p", PoolingVariant::kLearnableCross, 64, rng);
  const auto video = random({64, n_v}, 12);
  const auto query = random({64, 1}, 13);
  const auto candidates = enumerate_candidates(n_v, double(n_v), SamplingConfig::default_for(n_v));
  const auto mask = candidates.mask<float>();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        masked_attention_pool(video, std::optional<Tensor<float>>(query), candidates, mask, pool));
  state.counters["candidates"] = double(candidates.size());
}
BENCHMARK(BM_MaskedPooling)->Arg(16)->Arg(64);

void BM_ModelForward(benchmark::State& state) {
  SyntheticConfig data;
  data.num_videos = 1;
  data.num_test_videos = 0;
  const auto dir = std::filesystem::temp_directory_path() / "vlg_bench_data";
  std::filesystem::remove_all(dir);
  const auto summary = generate_synthetic(data, dir.string());
  const auto samples = Manifest::read(summary.train_manifest).load_all();
  const auto& s = samples.front();
  VlgNet<float> model(ModelConfig::for_profile("synthetic"), s.snippet_features.dim(0), s.token_features.dim(0));
  NoGradGuard no_grad;
  for (auto _ : state)
    benchmark::DoNotOptimize(model.forward(s.snippet_features, s.token_features, s.parse, s.duration));
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_ModelForward);

}  // namespace

BENCHMARK_MAIN();
