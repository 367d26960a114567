// Microbenchmarks for the hot paths: raw bank searches and full
// multi-pass inference on a mapped model. Inputs are seeded so runs
// are comparable.

#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cambnn/bnn.hpp"
#include "cambnn/cam.hpp"
#include "cambnn/inference.hpp"
#include "cambnn/mapper.hpp"
#include "cambnn/training.hpp"

namespace {

using namespace cambnn;

RowPattern random_pattern(std::size_t width, std::mt19937_64& rng) {
  RowPattern p(width);
  std::bernoulli_distribution bit(0.5);
  for (std::size_t i = 0; i < width; ++i) p.set_bit(i, bit(rng));
  return p;
}

BinaryVector random_signs(std::size_t n, std::mt19937_64& rng) {
  BinaryVector v(n);
  std::bernoulli_distribution bit(0.5);
  for (auto& e : v) e = bit(rng) ? 1 : -1;
  return v;
}

BinaryLayer random_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  BinaryLayer layer;
  layer.in_dim = in;
  layer.out_dim = out;
  layer.weights = random_signs(in * out, rng);
  layer.bn_constants.assign(out, 0);
  return layer;
}

CamBank full_bank(const CamGeometry& geometry, std::mt19937_64& rng) {
  CamBank bank(geometry);
  for (std::size_t r = 0; r < geometry.rows; ++r) {
    bank.write_row(r, random_pattern(geometry.columns, rng));
  }
  return bank;
}

void BM_BankSearch(benchmark::State& state) {
  std::mt19937_64 rng(11);
  const CamGeometry geometry{64, 2048, 1};
  const CamBank bank = full_bank(geometry, rng);
  const RowPattern query = random_pattern(geometry.columns, rng);
  const auto threshold = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(bank.search(query, threshold));
  }
  state.SetItemsProcessed(state.iterations() * geometry.rows);
}
BENCHMARK(BM_BankSearch)->Arg(0)->Arg(32)->Arg(1023);

void BM_BankSearchAnalog(benchmark::State& state) {
  std::mt19937_64 rng(12);
  const CamGeometry geometry{64, 2048, 1};
  const CamBank bank = full_bank(geometry, rng);
  const RowPattern query = random_pattern(geometry.columns, rng);
  const DischargeParams params;
  const AnalogKnobs knobs = calibrate_knobs(32, params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bank.search_analog(query, knobs, params));
  }
  state.SetItemsProcessed(state.iterations() * geometry.rows);
}
BENCHMARK(BM_BankSearchAnalog);

void BM_LayerExecute(benchmark::State& state) {
  std::mt19937_64 rng(13);
  const BnnModel model = {random_layer(784, 128, rng)};
  const MappedModel mapped = map_model(model, CamGeometry{});
  const BinaryVector x = random_signs(784, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(execute_layer(mapped.layers[0], x, {}));
  }
}
BENCHMARK(BM_LayerExecute);

void BM_InferSweep(benchmark::State& state) {
  std::mt19937_64 rng(14);
  const BnnModel model = {random_layer(784, 128, rng), random_layer(128, 10, rng)};
  const MappedModel mapped = map_model(model, CamGeometry{});
  const BinaryVector x = random_signs(784, rng);
  SweepConfig cfg;
  cfg.thresholds.resize(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < cfg.thresholds.size(); ++i) {
    cfg.thresholds[i] = static_cast<std::uint32_t>(2 * i);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer(mapped, x, cfg));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_InferSweep)->Arg(1)->Arg(33);

}  // namespace

BENCHMARK_MAIN();
