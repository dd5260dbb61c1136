#include <benchmark/benchmark.h>

#include "fwem/adjoint_source.hpp"
#include "fwem/fdtd.hpp"

using namespace fwem;

namespace {

// Leap-frog steps on an n^3 interior with an 8-cell PML.
void BM_LeapfrogSteps(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  GridSpec s;
  for (auto& a : s.axes) a = {n, 100.0};
  s.npml = 8;
  const Grid3D g = build_grid(s);
  const Medium m = Medium::homogeneous(g, 1.0);
  SimConfig cfg;
  cfg.freqs = {0.25, 1.0};
  cfg.wavelet = Wavelet::for_frequencies(cfg.freqs, cfg.omega0);
  cfg.dt = compute_time_step(g, sigma_to_epsilon(m, cfg.omega0), m.mu, cfg.cfl);
  Dipole d;
  d.pos = {0.5 * n * 100.0 + 50.0, 0.5 * n * 100.0, 0.5 * n * 100.0};
  SimulationRequest req;
  req.sources = dipole_source(d, cfg);
  req.receivers = {{d.pos, {Component::Ex}}};
  req.nt = 50;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(g, m, cfg, req));
  }
  const Dims p = g.cell_dims();
  state.counters["cell_steps/s"] =
      benchmark::Counter(static_cast<double>(p.size()) * req.nt * state.iterations(), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_LeapfrogSteps)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Basis(benchmark::State& state) {
  BasisParams p;
  p.dt = 0.004;
  p.nt = static_cast<int>(state.range(0));
  p.freqs = {0.25, 0.75, 2.25};
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_basis(p));
  }
}
BENCHMARK(BM_Basis)->Arg(1000)->Arg(4000)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
