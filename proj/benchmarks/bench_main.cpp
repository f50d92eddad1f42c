#include <benchmark/benchmark.h>

#include <random>

#include "epmine/data.hpp"
#include "epmine/encoder.hpp"
#include "epmine/eval.hpp"
#include "epmine/linalg.hpp"
#include "epmine/losses.hpp"
#include "epmine/mining.hpp"

namespace {

using namespace epmine;

template <typename T>
BasicMatrix<T> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  BasicMatrix<T> m(rows, cols);
  for (auto& v : m.data()) v = static_cast<T>(normal(rng));
  return m;
}

std::vector<Label> group_labels(std::size_t batch, std::size_t group) {
  std::vector<Label> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<Label>(i / group);
  return labels;
}

template <typename T>
void BM_CosineSimilarity(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto e = l2_normalize_rows(random_matrix<T>(b, 64, 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(cosine_similarity_matrix(e));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b * b));
}
BENCHMARK(BM_CosineSimilarity<double>)->Arg(128)->Arg(512);
BENCHMARK(BM_CosineSimilarity<float>)->Arg(128)->Arg(512);

void BM_MineBatch(benchmark::State& state) {
  const auto e = l2_normalize_rows(random_matrix<double>(128, 64, 2));
  const auto s = cosine_similarity_matrix(e);
  const auto labels = group_labels(128, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mine_batch(s, labels, {PositiveRule::Easy, NegativeRule::SemiHard}));
  }
}
BENCHMARK(BM_MineBatch)->Arg(2)->Arg(8)->Arg(32);

void BM_ComputeLoss(benchmark::State& state) {
  const auto e = l2_normalize_rows(random_matrix<double>(128, 64, 3));
  LossConfig cfg;
  cfg.strategy = static_cast<LossStrategy>(state.range(0));
  const auto labels = group_labels(128, cfg.strategy == LossStrategy::NPair ? 2 : 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_loss(e, labels, cfg));
  }
  state.SetLabel(std::string(to_string(cfg.strategy)));
}
BENCHMARK(BM_ComputeLoss)->DenseRange(0, 7);

void BM_ForwardBackward(benchmark::State& state) {
  MlpConfig cfg;
  cfg.input_dim = 32;
  cfg.hidden_dims = {64};
  cfg.embed_dim = 64;
  const auto params = init_params(cfg);
  const auto x = random_matrix<double>(128, 32, 4);
  const auto labels = group_labels(128, 8);
  LossConfig loss;
  for (auto _ : state) {
    auto [e, cache] = forward(params, x);
    const auto out = compute_loss(e, labels, loss);
    benchmark::DoNotOptimize(backward(params, cache, out.grad));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_RecallAtK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto e = l2_normalize_rows(random_matrix<double>(n, 64, 5));
  const auto labels = group_labels(n, 10);
  RetrievalConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(recall_at_k(e, labels, e, labels, cfg));
  }
}
BENCHMARK(BM_RecallAtK)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
