#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fwem/error.hpp"
#include "fwem/fdtd.hpp"

using namespace fwem;

namespace {

Grid3D cube(int n, double h, int npml, bool absorbing = true) {
  GridSpec s;
  for (auto& a : s.axes) a = {n, h};
  s.npml = npml;
  s.absorbing = absorbing;
  return build_grid(s);
}

SimConfig basic_config(std::vector<double> freqs) {
  SimConfig cfg;
  cfg.freqs = std::move(freqs);
  cfg.wavelet = Wavelet::for_frequencies(cfg.freqs, cfg.omega0);
  cfg.nt_max = 3000;
  return cfg;
}

}  // namespace

TEST_CASE("time step scaling") {
  const Grid3D g1 = cube(6, 100.0, 8);
  const Grid3D g2 = cube(6, 50.0, 8);
  Medium m1 = Medium::homogeneous(g1, 1.0);
  Medium m2 = Medium::homogeneous(g2, 1.0);
  const double dt1 = compute_time_step(g1, sigma_to_epsilon(m1, kDefaultOmega0), kMu0, 0.9);
  const double dt2 = compute_time_step(g2, sigma_to_epsilon(m2, kDefaultOmega0), kMu0, 0.9);
  CHECK(dt2 == doctest::Approx(0.5 * dt1));

  Medium m3 = Medium::homogeneous(g1, 0.25);
  const double dt3 = compute_time_step(g1, sigma_to_epsilon(m3, kDefaultOmega0), kMu0, 0.9);
  CHECK(dt3 == doctest::Approx(0.5 * dt1));

  CHECK_THROWS_AS(compute_time_step(g1, sigma_to_epsilon(m1, kDefaultOmega0), kMu0, 0.0), Error);
}

TEST_CASE("dt above the stability bound is rejected") {
  const Grid3D g = cube(6, 100.0, 8);
  const Medium m = Medium::homogeneous(g, 1.0);
  SimConfig cfg = basic_config({1.0});
  cfg.dt = 1.01 * compute_time_step(g, sigma_to_epsilon(m, cfg.omega0), kMu0, 1.0);
  CHECK_THROWS_AS(FdtdEngine(g, m, cfg), Error);
}

TEST_CASE("zero source keeps zero fields") {
  const Grid3D g = cube(6, 100.0, 8);
  FdtdEngine e(g, Medium::homogeneous(g, 1.0), basic_config({1.0}));
  for (int n = 0; n < 50; ++n) e.step(n);
  for (Component c : {Component::Ex, Component::Ey, Component::Ez, Component::Hx, Component::Hy,
                      Component::Hz}) {
    for (double v : e.state().field(c).flat()) CHECK(v == 0.0);
  }
}

TEST_CASE("injection is linear and respects orientation") {
  const Grid3D g = cube(6, 100.0, 8);
  const Medium m = Medium::homogeneous(g, 1.0);
  FdtdEngine a(g, m, basic_config({1.0}));
  FdtdEngine b(g, m, basic_config({1.0}));
  Dipole d;
  d.pos = {310.0, 270.0, 333.0};
  inject_dipole(a, d, 0.75);
  inject_dipole(a, d, 0.75);
  inject_dipole(b, d, 1.5);
  int touched = 0;
  for (std::size_t p = 0; p < a.state().ex.size(); ++p) {
    CHECK(a.state().ex[p] == doctest::Approx(b.state().ex[p]));
    if (a.state().ex[p] != 0.0) ++touched;
  }
  CHECK(touched == 8);
  for (Component c : {Component::Ey, Component::Ez, Component::Hx, Component::Hy, Component::Hz}) {
    for (double v : a.state().field(c).flat()) CHECK(v == 0.0);
  }
  Dipole bad = d;
  bad.pos = {-10.0, 0.0, 0.0};
  CHECK_THROWS_AS(inject_dipole(a, bad, 1.0), Error);
}

TEST_CASE("pulse front travels at the fictitious wave speed") {
  GridSpec s;
  s.axes = {AxisSpec{70, 10.0}, AxisSpec{40, 10.0}, AxisSpec{40, 10.0}};
  s.npml = 0;
  s.absorbing = false;
  const Grid3D g = build_grid(s);
  const Medium m = Medium::homogeneous(g, 1.0);
  SimConfig cfg = basic_config({1.0});
  FdtdEngine e(g, m, cfg);
  const double c = 1.0 / std::sqrt(kMu0 * 1.0 / (2.0 * cfg.omega0));
  const double dt = e.dt();
  Wavelet w;
  w.tau = 6.0 * dt;
  w.t0 = 4.0 * w.tau;
  TimedInjection src;
  src.pos = {150.0, 200.0, 200.0};
  src.comp = Component::Ey;
  for (int n = 0; n * dt < w.duration(); ++n) src.series.push_back(w((n + 0.5) * dt));
  e.set_sources({src});

  const StaggerWeights p1 = stagger_weights(g, {350.0, 200.0, 200.0}, Component::Ey);
  const StaggerWeights p2 = stagger_weights(g, {550.0, 200.0, 200.0}, Component::Ey);
  double best1 = 0.0, best2 = 0.0, t1 = 0.0, t2 = 0.0;
  const int nt = static_cast<int>((w.t0 + 55.0 * 10.0 / c) / dt);
  for (int n = 0; n < nt; ++n) {
    e.step(n);
    const double v1 = std::abs(e.sample(p1, Component::Ey));
    const double v2 = std::abs(e.sample(p2, Component::Ey));
    if (v1 > best1) { best1 = v1; t1 = (n + 1) * dt; }
    if (v2 > best2) { best2 = v2; t2 = (n + 1) * dt; }
  }
  const double expected = 200.0 / c;
  CHECK(std::abs((t2 - t1) - expected) < 0.05 * expected);
}

TEST_CASE("energy stays bounded in a closed lossless box") {
  const Grid3D g = cube(10, 10.0, 0, false);
  const Medium m = Medium::homogeneous(g, 1.0);
  FdtdEngine e(g, m, basic_config({1.0}));
  Wavelet w;
  w.tau = 5.0 * e.dt();
  w.t0 = 4.0 * w.tau;
  TimedInjection src;
  src.pos = {43.0, 51.0, 48.0};
  src.comp = Component::Ez;
  for (int n = 0; n * e.dt() < w.duration(); ++n) src.series.push_back(w((n + 0.5) * e.dt()));
  const int ns = static_cast<int>(src.series.size());
  e.set_sources({src});
  double e0 = 0.0, emax = 0.0;
  for (int n = 0; n < 10000; ++n) {
    e.step(n);
    if (n == ns) e0 = e.energy();
    if (n > ns) emax = std::max(emax, e.energy());
  }
  CHECK(e0 > 0.0);
  CHECK(std::isfinite(emax));
  CHECK(emax < 1.5 * e0);
  CHECK(e.state().all_finite());
}

TEST_CASE("DTFT accumulator") {
  DtftAccumulator acc({0.5, 2.0}, kDefaultOmega0, 1);
  const std::vector<double> one{1.0};
  acc.accumulate(one, 0.0, 0.01);
  CHECK(acc.value(0, 0) == cplx(0.01, 0.0));
  CHECK(acc.value(1, 0) == cplx(0.01, 0.0));
  const double a = kernel_rate(0.5, kDefaultOmega0);
  CHECK(std::abs(dtft_kernel(0.5, kDefaultOmega0, 1.0 / a)) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("steady-state check") {
  const std::vector<cplx> a{{1.0, 2.0}, {0.5, -0.1}};
  CHECK(check_steady_state(a, a, 1e-5));
  std::vector<cplx> b = a;
  b[1] *= 1.0 + 10.0 * 1e-5;
  CHECK_FALSE(check_steady_state(a, b, 1e-5));
  const std::vector<cplx> z(2, 0.0);
  CHECK_FALSE(check_steady_state(z, z, 1e-5));
}

TEST_CASE("on-the-fly spectra equal the offline transform of recorded traces") {
  const Grid3D g = cube(8, 100.0, 8);
  const Medium m = Medium::homogeneous(g, 1.0);
  SimConfig cfg = basic_config({0.5, 1.5});
  SimulationRequest req;
  TimedInjection src;
  src.pos = {400.0, 400.0, 400.0};
  src.comp = Component::Ex;
  src.series = {0.0, 1.0, 0.5, -0.3, -1.0};
  req.sources = {src};
  req.receivers = {ReceiverSpec{{700.0, 400.0, 400.0}, {Component::Ex, Component::Hz}}};
  req.nt = 300;
  req.steady_check = false;
  req.traces = true;
  const SimulationOutput out = simulate(g, m, cfg, req);
  const double dt = compute_time_step(g, sigma_to_epsilon(m, cfg.omega0), kMu0, cfg.cfl);
  for (std::size_t slot = 0; slot < 2; ++slot) {
    DtftAccumulator offline(cfg.freqs, cfg.omega0, 1);
    const double shift = slot == 0 ? 1.0 : 0.5;
    for (std::size_t n = 0; n < out.traces[slot].size(); ++n) {
      offline.accumulate(std::span<const double>(&out.traces[slot][n], 1), (n + shift) * dt, dt);
    }
    for (std::size_t k = 0; k < 2; ++k) CHECK(offline.value(k, 0) == out.receiver[k * 2 + slot]);
  }
}

TEST_CASE("forward response is linear in the moment") {
  const Grid3D g = cube(8, 100.0, 8);
  const Medium m = Medium::homogeneous(g, 1.0);
  SimConfig cfg = basic_config({1.0});
  cfg.steady_check = false;
  cfg.nt_max = 400;
  const std::vector<ReceiverSpec> rcv{{{650.0, 400.0, 400.0}, {Component::Ex, Component::Ey, Component::Hz}}};
  Dipole d;
  d.pos = {350.0, 400.0, 400.0};
  const FreqFieldSet a = run_forward(d, rcv, m, g, cfg);
  d.moment = 2.0;
  const FreqFieldSet b = run_forward(d, rcv, m, g, cfg);
  for (std::size_t s = 0; s < a.slots; ++s) CHECK(b.at(0, s) == 2.0 * a.at(0, s));
}

TEST_CASE("edge stencil weights are normalized cross-section areas") {
  GridSpec s;
  s.axes = {AxisSpec{4, 10.0}, AxisSpec{4, 10.0, 1.2}, AxisSpec{4, 10.0}};
  s.npml = 8;
  const Grid3D g = build_grid(s);
  const EdgeStencil st = edge_stencil(g, Component::Ex, 9, 10, 10);
  CHECK(st.count == 4);
  double sum = 0.0;
  for (int n = 0; n < st.count; ++n) sum += st.weight[n];
  CHECK(sum == doctest::Approx(1.0));
  const EdgeStencil wall = edge_stencil(g, Component::Ez, 0, 0, 3);
  CHECK(wall.count == 1);
}
