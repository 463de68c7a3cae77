#include <benchmark/benchmark.h>

#include "kamq/kam.hpp"
#include "kamq/oracle.hpp"
#include "kamq/series.hpp"

using namespace kamq;

static void BM_PoissonBracket(benchmark::State& state) {
  PhaseGeometry g{2, 1};
  const int n = static_cast<int>(state.range(0));
  const Series f = random_series(g, 4, 3, n, 1), h = random_series(g, 4, 3, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(poisson_bracket(f, h));
  state.SetComplexityN(n);
}
BENCHMARK(BM_PoissonBracket)->RangeMultiplier(2)->Range(16, 256)->Complexity();

static void BM_LieTransform(benchmark::State& state) {
  PhaseGeometry g{1, 1};
  const Series H = random_series(g, 4, 2, 40, 3);
  const Series F = cplx(1e-2) * cutoff(random_series(g, 4, 2, 40, 4), 4).R;
  LieOptions lo;
  lo.truncation = Truncation{12, 4};
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lie_transform(H, F, 1.0, order, lo));
}
BENCHMARK(BM_LieTransform)->DenseRange(2, 8, 2);

static void BM_KamStep(benchmark::State& state) {
  PhaseGeometry g{1, 0};
  const Series P = cplx(1e-3) * cutoff(random_series(g, 6, 2, 20, 5), 6).R;
  const auto st = make_state(g, 1e-3, 0.0, Eigen::VectorXd::Constant(1, 0.6180339887498949), Eigen::MatrixXd(0, 0),
                             Series(g, 6, 2), P);
  StepOptions opt;
  opt.Kplus = 6;
  opt.weights = {1.0, 1.0, 2.0};
  opt.r = opt.s = 0.25;
  const auto D = ApproximationFunction::power_log(2.0, 2.0, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(kam_step(st, D, opt));
}
BENCHMARK(BM_KamStep);

static void BM_OracleDiagonalize(benchmark::State& state) {
  SymbolSpec s;
  s.d = 1;
  s.d0 = 1;
  s.h0 = {{1.0, {1}}};
  s.S = Eigen::Matrix2d{{1.0, 0.0}, {0.0, 2.0}};
  s.couplings.push_back({1.0, {1}, false, {}});
  const int Nt = static_cast<int>(state.range(0));
  const auto op = build_operator(s, 0.05, 0.01, Nt, 10);
  for (auto _ : state) benchmark::DoNotOptimize(diagonalize(op));
  state.SetLabel("dim " + std::to_string(op.basis.size()));
}
BENCHMARK(BM_OracleDiagonalize)->Arg(5)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
