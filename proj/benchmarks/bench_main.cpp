#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "cdm/calibration.hpp"
#include "cdm/monitor.hpp"
#include "cdm/qt_ewma.hpp"
#include "cdm/quanttree.hpp"
#include "cdm/random.hpp"

namespace {

using namespace cdm;

Matrix normal_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

std::shared_ptr<const ThresholdTable> flat_table(std::size_t bins, std::size_t n) {
  ThresholdTableInfo info{bins, kDefaultLambda, 375.0, n, 500, 10000, 0, 1000};
  return std::make_shared<const ThresholdTable>(info, std::vector<double>(500, 1e9), std::vector<double>(500, 0.0));
}

// args: bins, dimension
void BM_QuantTreeBuild(benchmark::State& state) {
  const auto bins = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const Matrix train = normal_rows(16 * bins, d, 1);
  const auto probs = uniform_probabilities(bins);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(QuantTreeHistogram::build(train, probs, seed++));
}
BENCHMARK(BM_QuantTreeBuild)->Args({16, 2})->Args({32, 2})->Args({16, 33});

void BM_LocateBin(benchmark::State& state) {
  const auto bins = static_cast<std::size_t>(state.range(0));
  const Matrix train = normal_rows(16 * bins, 2, 2);
  const auto hist = QuantTreeHistogram::build(train, uniform_probabilities(bins), 3);
  const Matrix xs = normal_rows(4096, 2, 4);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hist.locate_bin(xs.row(i)));
    i = (i + 1) & 4095;
  }
}
BENCHMARK(BM_LocateBin)->Arg(16)->Arg(32)->Arg(128);

// Per-sample update cost should grow like K.
void BM_QtEwmaUpdate(benchmark::State& state) {
  const auto bins = static_cast<std::size_t>(state.range(0));
  const std::size_t n = 16 * bins;
  auto hist = std::make_shared<const QuantTreeHistogram>(
      QuantTreeHistogram::build(normal_rows(n, 2, 5), uniform_probabilities(bins), 6));
  QtEwmaDetector det(hist, kDefaultLambda, flat_table(bins, n));
  const Matrix xs = normal_rows(4096, 2, 7);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(det.update(xs.row(i)));
    i = (i + 1) & 4095;
  }
  state.SetComplexityN(static_cast<std::int64_t>(bins));
}
BENCHMARK(BM_QtEwmaUpdate)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_CdmProcess(benchmark::State& state) {
  const auto classes = static_cast<Label>(state.range(0));
  LabeledSet train(2);
  Rng rng(8);
  for (Label m = 1; m <= classes; ++m)
    for (int i = 0; i < 256; ++i) train.add(std::vector<double>{rng.normal() + m, rng.normal()}, m);
  CdmMonitor mon = CdmMonitor::fit(train, flat_table(16, 256));
  const Matrix xs = normal_rows(4096, 2, 9);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mon.process(xs.row(i), static_cast<Label>(1 + i % classes)));
    i = (i + 1) & 4095;
  }
}
BENCHMARK(BM_CdmProcess)->Arg(2)->Arg(8);

void BM_CalibrateSmall(benchmark::State& state) {
  CalibrationOptions o;
  o.replicates = 10000;
  o.t_max = 200;
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_thresholds(o));
}
BENCHMARK(BM_CalibrateSmall)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
