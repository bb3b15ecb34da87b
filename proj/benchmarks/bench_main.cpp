#include <benchmark/benchmark.h>

#include <random>

#include "trojanq/forge.hpp"
#include "trojanq/qtest.hpp"
#include "trojanq/tensor_formats.hpp"
#include "trojanq/weights_io.hpp"

namespace {

std::vector<double> random_values(std::size_t n) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> dist(0.0, 0.1);
  std::vector<double> values(n);
  for (auto& v : values) v = dist(rng);
  return values;
}

void BM_Detect(benchmark::State& state) {
  const auto classes = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 512;
  const trojanq::WeightMatrix matrix(classes, dim, random_values(classes * dim));
  const auto policy = trojanq::default_policy(classes);
  for (auto _ : state) benchmark::DoNotOptimize(trojanq::detect(matrix, policy));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(classes * dim));
}
BENCHMARK(BM_Detect)->Arg(10)->Arg(30)->Arg(1000);

void BM_NpyParse(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 512;
  const auto values = random_values(rows * cols);
  const auto bytes = trojanq::encode_npy(rows, cols, values);
  for (auto _ : state) benchmark::DoNotOptimize(trojanq::parse_npy(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_NpyParse)->Arg(10)->Arg(1000);

void BM_TrainOneEpoch(benchmark::State& state) {
  trojanq::forge::ForgeSpec spec;
  spec.hidden_dim = static_cast<std::size_t>(state.range(0));
  const auto data = trojanq::forge::gen_dataset(spec);
  trojanq::forge::TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trojanq::forge::train_model(spec, data, trojanq::forge::PoisonConfig{}, cfg));
  }
}
BENCHMARK(BM_TrainOneEpoch)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
