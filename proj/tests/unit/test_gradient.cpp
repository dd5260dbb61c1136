#include <cmath>
#include <random>

#include "doctest.h"
#include "fwem/error.hpp"
#include "fwem/gradient.hpp"
#include "fwem/oracle.hpp"

using namespace fwem;

namespace {

Grid3D cube(int n, double h, int npml) {
  GridSpec s;
  for (auto& a : s.axes) a = {n, h};
  s.npml = npml;
  return build_grid(s);
}

Survey line_survey() {
  Survey sv;
  sv.freqs = {1.0};
  Dipole d;
  d.pos = {150.0, 200.0, 200.0};
  sv.sources = {d};
  sv.source_ids = {1};
  sv.receivers = {{50.0, 300.0, 300.0}, {350.0, 100.0, 300.0}};
  sv.receiver_ids = {1, 2};
  sv.receiver_comps = {{Component::Ex, Component::Ey}, {Component::Ex, Component::Hz}};
  return sv;
}

ModelParam uniform(Dims in, double rho, bool vti, double m_max) {
  const std::vector<double> r(in.size(), rho);
  return make_param(in, r, vti ? std::span<const double>(r) : std::span<const double>{}, std::log(0.5),
                    m_max);
}

}  // namespace

TEST_CASE("misfit value") {
  Dataset obs(2);
  obs[0].value = {1.0, 2.0};
  obs[0].weight = 2.0;
  obs[1].value = {0.0, 0.0};
  obs[1].weight = 0.0;
  const std::vector<cplx> syn{{0.0, 0.0}, {5.0, 5.0}};
  const MisfitValue v = misfit_value(obs, syn);
  CHECK(v.value == doctest::Approx(0.5 * 4.0 * 5.0));
  CHECK(v.count == 1);
  CHECK(v.normalized == doctest::Approx(10.0));
  CHECK_THROWS_AS((void)misfit_value(obs, std::vector<cplx>(1)), Error);
}

TEST_CASE("uncertainty weights and muting") {
  Survey sv = line_survey();
  Dataset d(2);
  d[0].rcv = 0;
  d[0].value = {3.0e-12, 4.0e-12};
  d[1].rcv = 1;
  d[1].value = {1.0e-12, 0.0};
  UncertaintyModel um;
  um.relative = 0.05;
  um.floor = 1.0e-13;
  compute_weights(d, sv, um);
  CHECK(d[0].weight == doctest::Approx(1.0 / (0.05 * 5.0e-12 + 1.0e-13)));
  CHECK(d[1].weight == doctest::Approx(1.0 / (0.05 * 1.0e-12 + 1.0e-13)));

  um.mute_offset = datum_offset(sv, d[0]) + 1.0;
  CHECK(datum_offset(sv, d[1]) > um.mute_offset);
  compute_weights(d, sv, um);
  CHECK(d[0].weight == 0.0);
  CHECK(d[1].weight > 0.0);
}

TEST_CASE("significant misfit per source-receiver pair") {
  Dataset obs(4);
  obs[0] = {0, 1, Component::Ex, 0, {1.0, 0.0}, 1.0};
  obs[1] = {0, 1, Component::Ey, 0, {0.0, 1.0}, 2.0};
  obs[2] = {0, 0, Component::Ex, 0, {3.0, 0.0}, 0.0};
  obs[3] = {1, 0, Component::Ex, 0, {0.0, 0.0}, 1.0};
  const std::vector<cplx> syn{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {3.0, 4.0}};
  const auto pm = significant_misfit(obs, syn);
  REQUIRE(pm.size() == 3);
  CHECK(pm[0].src == 0);
  CHECK(pm[0].rcv == 0);
  CHECK(pm[0].value == 0.0);
  CHECK(pm[1].rcv == 1);
  CHECK(pm[1].value == doctest::Approx(std::sqrt(1.0 + 4.0)));
  CHECK(pm[2].src == 1);
  CHECK(pm[2].value == doctest::Approx(5.0));
}

TEST_CASE("Tikhonov gradient matches finite differences") {
  const Dims in{4, 3, 3};
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> rh(in.size()), rv(in.size());
  for (auto& r : rh) r = std::exp(u(rng));
  for (auto& r : rv) r = std::exp(u(rng));
  ModelParam p = make_param(in, rh, rv, -5.0, 5.0);
  const auto [v0, g0] = tikhonov_value_and_gradient(p, {1.0, 1.0, 0.1});
  CHECK(v0 == 0.0);
  for (double g : g0) CHECK(g == 0.0);
  ModelParam shifted = p;
  std::vector<double> xs = p.packed();
  for (auto& v : xs) v += 0.75;
  shifted.unpack(xs);
  const auto [vs, gs] = tikhonov_value_and_gradient(shifted, {1.0, 1.0, 0.1});
  CHECK(vs == doctest::Approx(0.0));
  for (double g : gs) CHECK(g == doctest::Approx(0.0));

  std::vector<double> x = p.packed();
  for (auto& v : x) v += u(rng) - 1.5;
  p.unpack(x);
  const std::array<double, 3> alpha{1.0, 0.7, 0.1};
  const auto [value, grad] = tikhonov_value_and_gradient(p, alpha);
  CHECK(value > 0.0);
  REQUIRE(grad.size() == x.size());
  for (std::size_t i = 0; i < x.size(); i += 5) {
    ModelParam a = p, b = p;
    std::vector<double> xa = x, xb = x;
    xa[i] += 1e-5;
    xb[i] -= 1e-5;
    a.unpack(xa);
    b.unpack(xb);
    const double fd =
        (tikhonov_value_and_gradient(a, alpha).first - tikhonov_value_and_gradient(b, alpha).first) / 2e-5;
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("depth preconditioner") {
  const Grid3D g = cube(4, 100.0, 8);
  DepthPreconditioner dp;
  dp.z_seabed = 100.0;
  dp.z0 = 500.0;
  dp.power = 1.5;
  const std::vector<double> w = depth_weights(g, dp);
  const Dims in = g.interior_dims();
  REQUIRE(w.size() == static_cast<std::size_t>(in.n3));
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(std::pow((150.0 - 100.0 + 500.0) / 500.0, 1.5)));
  CHECK(w[3] == doctest::Approx(std::pow((350.0 - 100.0 + 500.0) / 500.0, 1.5)));
  for (std::size_t k = 1; k < w.size(); ++k) CHECK(w[k] >= w[k - 1]);

  std::vector<double> stacked(2 * in.size(), 2.0);
  depth_precondition(stacked, g, dp);
  CHECK(stacked[in.index(1, 1, 3)] == doctest::Approx(2.0 * w[3]));
  CHECK(stacked[in.size() + in.index(1, 1, 3)] == doctest::Approx(2.0 * w[3]));

  dp.power = 0.0;
  std::vector<double> same(in.size(), 1.5);
  depth_precondition(same, g, dp);
  for (double v : same) CHECK(v == 1.5);

  // A gradient decaying faster than the weight grows peaks no shallower.
  dp.power = 1.5;
  std::vector<double> decay(in.size());
  for (int k = 0; k < in.n3; ++k) {
    for (int j = 0; j < in.n2; ++j)
      for (int i = 0; i < in.n1; ++i) decay[in.index(i, j, k)] = std::exp(-g.center(2, k + 8) / 150.0);
  }
  depth_precondition(decay, g, dp);
  for (int k = 1; k < in.n3; ++k) CHECK(decay[in.index(0, 0, k)] <= decay[in.index(0, 0, 0)]);
}

TEST_CASE("log-parameter gradient of an inverted model") {
  const Grid3D g = cube(2, 100.0, 8);
  Evaluation ev;
  ev.model = uniform(g.interior_dims(), 4.0, false, 5.0);
  ev.medium = param_to_medium(ev.model, g);
  GradientVolume gs;
  gs.h.assign(8, 1.0);
  gs.v.assign(8, 3.0);
  const auto iso = logparam_gradient(g, ev, gs);
  REQUIRE(iso.size() == 8);
  CHECK(iso[0] == doctest::Approx(-0.25 * 4.0));

  ev.model = uniform(g.interior_dims(), 4.0, true, 5.0);
  ev.model.frozen.assign(8, 0);
  ev.model.frozen[3] = 1;
  ev.medium = param_to_medium(ev.model, g);
  const auto vti = logparam_gradient(g, ev, gs);
  REQUIRE(vti.size() == 16);
  CHECK(vti[0] == doctest::Approx(-0.25));
  CHECK(vti[8] == doctest::Approx(-0.75));
  CHECK(vti[3] == 0.0);
  CHECK(vti[11] == 0.0);
}

TEST_CASE("adjoint gradient on a tiny problem") {
  const Grid3D g = cube(4, 100.0, 8);
  const Survey sv = line_survey();
  ProblemOptions opt;
  opt.m_max = std::log(20.0);
  Problem pb = make_problem(g, sv, survey_dataset(sv), opt);
  const Dims in = g.interior_dims();

  for (bool vti : {false, true}) {
    CAPTURE(vti);
    const ModelParam start = uniform(in, 2.0, vti, opt.m_max);
    ModelParam truth = start;
    for (int k = 1; k < 3; ++k) {
      for (int j = 1; j < 3; ++j) truth.m_h[in.index(2, j, k)] = std::log(8.0);
    }
    if (vti) truth.m_v[in.index(2, 2, 2)] = std::log(12.0);
    set_pml_reference(pb, start);
    const std::vector<cplx> obs = simulate_data(pb, problem_medium(pb, truth));
    for (std::size_t i = 0; i < obs.size(); ++i) pb.observed[i].value = obs[i];
    compute_weights(pb.observed, pb.survey, UncertaintyModel{0.03, 1e-13, 0.0});

    const Evaluation ev = evaluate(pb, start, true);
    CHECK(ev.misfit.value > 0.0);
    const std::vector<double> adj = data_gradient(pb, ev);
    REQUIRE(adj.size() == in.size() * (vti ? 2 : 1));

    const std::size_t c1 = in.index(2, 2, 2);
    std::vector<std::size_t> probe{c1};
    if (vti) probe.push_back(in.size() + c1);
    const MisfitFunction phi = [&](const ModelParam& m) { return evaluate(pb, m, false).misfit.value; };
    const std::vector<double> fd = fd_gradient(phi, start, probe, 1e-3);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      CHECK(adj[probe[i]] == doctest::Approx(fd[i]).epsilon(0.02));
    }

    if (vti) {
      // With equal h and v models the isotropic gradient is the class sum.
      const ModelParam iso_start = uniform(in, 2.0, false, opt.m_max);
      const Evaluation ev_iso = evaluate(pb, iso_start, true);
      const std::vector<double> iso = data_gradient(pb, ev_iso);
      for (std::size_t c = 0; c < in.size(); c += 7) {
        CHECK(iso[c] == doctest::Approx(adj[c] + adj[in.size() + c]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gradient invariants") {
  const Grid3D g = cube(4, 100.0, 8);
  Survey sv = line_survey();
  Dipole second;
  second.pos = {300.0, 250.0, 100.0};
  second.orientation = {0.0, 1.0, 0.0};
  sv.sources.push_back(second);
  sv.source_ids.push_back(2);
  ProblemOptions opt;
  opt.m_max = std::log(20.0);
  const Dims in = g.interior_dims();
  const ModelParam start = uniform(in, 2.0, false, opt.m_max);
  ModelParam truth = start;
  truth.m_h[in.index(1, 2, 2)] = std::log(6.0);
  truth.m_h[in.index(2, 2, 2)] = std::log(6.0);

  auto build = [&](const Survey& s) {
    Problem pb = make_problem(g, s, survey_dataset(s), opt);
    set_pml_reference(pb, start);
    const std::vector<cplx> obs = simulate_data(pb, problem_medium(pb, truth));
    for (std::size_t i = 0; i < obs.size(); ++i) pb.observed[i].value = obs[i];
    compute_weights(pb.observed, pb.survey, UncertaintyModel{0.03, 1e-13, 0.0});
    return pb;
  };
  const Problem both = build(sv);
  const std::vector<double> gb = data_gradient(both, evaluate(both, start, true));

  SUBCASE("multi-source gradient is the sum of single-source gradients") {
    std::vector<double> sum(gb.size(), 0.0);
    for (std::size_t s = 0; s < 2; ++s) {
      Survey one = sv;
      one.sources = {sv.sources[s]};
      one.source_ids = {sv.source_ids[s]};
      const Problem pb = build(one);
      const std::vector<double> gs = data_gradient(pb, evaluate(pb, start, true));
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += gs[i];
    }
    for (std::size_t i = 0; i < sum.size(); ++i) CHECK(gb[i] == doctest::Approx(sum[i]).epsilon(1e-10));
  }

  SUBCASE("frozen cells have zero gradient") {
    ModelParam fz = start;
    fz.frozen.assign(in.size(), 0);
    for (int j = 0; j < in.n2; ++j)
      for (int i = 0; i < in.n1; ++i) fz.frozen[in.index(i, j, 0)] = 1;
    const std::vector<double> gf = data_gradient(both, evaluate(both, fz, true));
    for (int j = 0; j < in.n2; ++j)
      for (int i = 0; i < in.n1; ++i) CHECK(gf[in.index(i, j, 0)] == 0.0);
    CHECK(gf[in.index(2, 2, 2)] == doctest::Approx(gb[in.index(2, 2, 2)]));
  }

  SUBCASE("muted data do not contribute") {
    Problem muted = both;
    for (Datum& d : muted.observed) {
      if (d.src == 1) d.weight = 0.0;
    }
    const Evaluation e1 = evaluate(muted, start, true);
    const std::vector<double> g1 = data_gradient(muted, e1);
    for (Datum& d : muted.observed) {
      if (d.src == 1) d.value *= 3.0;
    }
    const Evaluation e2 = evaluate(muted, start, true);
    const std::vector<double> g2 = data_gradient(muted, e2);
    CHECK(e1.misfit.value == e2.misfit.value);
    CHECK(g1 == g2);
  }

  SUBCASE("first-order Taylor remainder shrinks quadratically") {
    const double phi0 = evaluate(both, start, false).misfit.value;
    std::vector<double> dm(gb.size());
    for (std::size_t i = 0; i < dm.size(); ++i) dm[i] = 0.05 * std::sin(1.0 + 3.0 * static_cast<double>(i));
    double prev = 0.0;
    for (int h = 0; h < 3; ++h) {
      const double s = std::ldexp(1.0, -h);
      ModelParam m = start;
      std::vector<double> x = m.packed();
      double lin = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += s * dm[i];
        lin += s * dm[i] * gb[i];
      }
      m.unpack(x);
      const double rem = std::abs(evaluate(both, m, false).misfit.value - phi0 - lin);
      if (h > 0) CHECK(prev / rem == doctest::Approx(4.0).epsilon(0.25));
      prev = rem;
    }
  }
}
