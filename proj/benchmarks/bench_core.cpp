#include "anisomax/decomposition.hpp"
#include "anisomax/maximal.hpp"
#include "anisomax/surface_checks.hpp"

#include <benchmark/benchmark.h>

using namespace anisomax;

namespace {

const DilationStructure& diag24() {
  static const DilationStructure D = [] {
    Mat A(2, 2);
    A << 2, 0, 0, 4;
    return validate_dilation(A);
  }();
  return D;
}

void BM_EnumerateCover(benchmark::State& st) {
  const auto& D = diag24();
  Vec lo(2), hi(2);
  lo << -1, -1;
  hi << 1, 1;
  const int tau = -static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(enumerate_cover(D, 0, tau, Box{lo, hi}));
}
BENCHMARK(BM_EnumerateCover)->Arg(2)->Arg(4)->Arg(6);

void BM_Whitney(benchmark::State& st) {
  const auto& D = diag24();
  RandomCubeSpec spec;
  spec.count = static_cast<int>(st.range(0));
  spec.seed = 7;
  auto Q = random_weighted_cubes(D, spec);
  for (auto _ : st) benchmark::DoNotOptimize(whitney_decompose(D, Q, 1.0));
}
BENCHMARK(BM_Whitney)->Arg(10)->Arg(25)->Arg(50);

void BM_Stopping(benchmark::State& st) {
  const auto& D = diag24();
  auto S = GraphSurface::make(GraphSurface::Kind::CircleArc, 2);
  auto sample = support_sample(S, 4000);
  RandomCubeSpec spec;
  spec.count = static_cast<int>(st.range(0));
  spec.seed = 11;
  auto Q = random_weighted_cubes(D, spec);
  auto W = whitney_decompose(D, Q, 1.0);
  std::vector<WeightedCube> inQ;
  for (std::size_t j = 0; j < Q.size(); ++j)
    if (W.assigned[j] >= 0) inQ.push_back(Q[j]);
  for (auto _ : st) benchmark::DoNotOptimize(stopping_time(D, W.selected, inQ, 1.0, {}, sample));
}
BENCHMARK(BM_Stopping)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_ConvolveDilated(benchmark::State& st) {
  const auto& D = diag24();
  auto S = GraphSurface::make(GraphSurface::Kind::CircleArc, 2);
  auto mu = MeasureRef::whole(S);
  AtomicSum f{&D, {{make_atom(D, GridCube{0, 0, {0, 0}}, AtomProfile::HaarSplit, 0), 1.0}}};
  const int n = static_cast<int>(st.range(0));
  auto L = covering_lattice(D, f, mu, KRange{-2, 2}, {n, n});
  for (auto _ : st) benchmark::DoNotOptimize(convolve_dilated(D, f, mu, 1, L));
}
BENCHMARK(BM_ConvolveDilated)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Autocorrelation(benchmark::State& st) {
  auto S = GraphSurface::make(GraphSurface::Kind::CircleArc, 2);
  auto nu = S.quadrature(static_cast<int>(st.range(0)), 8);
  Vec half(2), h(2);
  half << 1.65, 0.45;
  h << 0.005, 0.005;
  auto L = Lattice::centered(half, h);
  for (auto _ : st) benchmark::DoNotOptimize(autocorrelation_kernel(nu, L, 0.0125));
}
BENCHMARK(BM_Autocorrelation)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
