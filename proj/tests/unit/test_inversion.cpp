#include <cmath>

#include "doctest.h"
#include "fwem/error.hpp"
#include "fwem/inversion.hpp"

using namespace fwem;

namespace {

// f(x) = 1/2 x^T A x - b^T x
struct Quadratic {
  double a11 = 3.0, a12 = 1.0, a22 = 2.0;
  double b1 = 1.0, b2 = -2.0;

  double value(const std::vector<double>& x) const {
    return 0.5 * (a11 * x[0] * x[0] + 2.0 * a12 * x[0] * x[1] + a22 * x[1] * x[1]) - b1 * x[0] - b2 * x[1];
  }
  std::vector<double> grad(const std::vector<double>& x) const {
    return {a11 * x[0] + a12 * x[1] - b1, a12 * x[0] + a22 * x[1] - b2};
  }
};

Grid3D cube(int n, double h) {
  GridSpec s;
  for (auto& a : s.axes) a = {n, h};
  s.npml = 8;
  return build_grid(s);
}

Problem tiny_problem(const ModelParam& truth) {
  const Grid3D g = cube(4, 100.0);
  Survey sv;
  sv.freqs = {1.0};
  Dipole d;
  d.pos = {150.0, 200.0, 100.0};
  sv.sources = {d};
  sv.source_ids = {1};
  sv.receivers = {{50.0, 300.0, 300.0}, {350.0, 100.0, 300.0}, {250.0, 300.0, 400.0}};
  sv.receiver_ids = {1, 2, 3};
  ProblemOptions opt;
  opt.m_max = std::log(20.0);
  Problem pb = make_problem(g, sv, survey_dataset(sv), opt);
  set_pml_reference(pb, truth);
  const std::vector<cplx> obs = simulate_data(pb, problem_medium(pb, truth));
  for (std::size_t i = 0; i < obs.size(); ++i) pb.observed[i].value = obs[i];
  compute_weights(pb.observed, pb.survey, UncertaintyModel{0.03, 1e-13, 0.0});
  return pb;
}

ModelParam uniform(double rho) {
  const Dims in{4, 4, 4};
  const std::vector<double> r(in.size(), rho);
  return make_param(in, r, {}, std::log(0.5), std::log(20.0));
}

}  // namespace

TEST_CASE("l-BFGS memory rejects non-positive curvature") {
  LbfgsMemory mem(2);
  CHECK_FALSE(mem.push({1.0, 0.0}, {-1.0, 0.0}));
  CHECK_FALSE(mem.push({1.0, 0.0}, {0.0, 1.0}));
  CHECK(mem.empty());
  CHECK(mem.push({1.0, 0.0}, {2.0, 0.0}));
  CHECK(mem.push({0.0, 1.0}, {0.0, 3.0}));
  CHECK(mem.push({1.0, 1.0}, {1.0, 1.0}));
  CHECK(mem.size() == 2);
  CHECK(mem.pairs().front().s[1] == 1.0);
  CHECK(mem.pairs().back().rho == doctest::Approx(0.5));
  CHECK_THROWS_AS(LbfgsMemory(0), Error);
}

TEST_CASE("l-BFGS direction") {
  const std::vector<double> g{2.0, -1.0};
  LbfgsMemory mem;
  const std::vector<double> p{1.0, 4.0};
  const auto d0 = lbfgs_direction(g, mem, p);
  CHECK(d0[0] == -2.0);
  CHECK(d0[1] == 4.0);
  const auto plain = lbfgs_direction(g, mem, {});
  CHECK(plain[0] == -2.0);

  (void)mem.push({0.5, 0.25}, {1.0, 0.75});
  const auto d1 = lbfgs_direction(g, mem, {});
  CHECK(d1[0] * g[0] + d1[1] * g[1] < 0.0);
  // A rejected pair leaves the direction unchanged.
  CHECK_FALSE(mem.push({1.0, 0.0}, {-3.0, 0.0}));
  const auto d2 = lbfgs_direction(g, mem, {});
  CHECK(d2 == d1);
}

TEST_CASE("l-BFGS with backtracking minimizes a quadratic bowl") {
  const Quadratic q;
  std::vector<double> x{4.0, -3.0};
  LbfgsMemory mem(5);
  const Objective f = [&](const std::vector<double>& t) { return q.value(t); };
  const auto g0 = q.grad(x);
  const double g0n = std::hypot(g0[0], g0[1]);
  int iters = 0;
  for (; iters < 20; ++iters) {
    const auto g = q.grad(x);
    if (std::hypot(g[0], g[1]) < 1e-3 * g0n) break;
    const auto dir = lbfgs_direction(g, mem, {});
    const LineSearchResult ls = line_search(x, q.value(x), g, dir, f, 1.0, -1e9, 1e9);
    REQUIRE(ls.ok);
    const auto gn = q.grad(ls.x);
    (void)mem.push({ls.x[0] - x[0], ls.x[1] - x[1]}, {gn[0] - g[0], gn[1] - g[1]});
    x = ls.x;
  }
  CHECK(iters <= 5);
  const double det = q.a11 * q.a22 - q.a12 * q.a12;
  CHECK(std::abs(x[0] - (q.a22 * q.b1 - q.a12 * q.b2) / det) < 1e-2);
  CHECK(std::abs(x[1] - (q.a11 * q.b2 - q.a12 * q.b1) / det) < 1e-2);
}

TEST_CASE("Armijo line search") {
  // phi(a) = (a - 0.3)^2 along d = 1 from x = 0.
  const Objective f = [](const std::vector<double>& t) { return (t[0] - 0.3) * (t[0] - 0.3); };
  const std::vector<double> x{0.0}, g{-0.6}, d{1.0};
  const LineSearchResult ls = line_search(x, f(x), g, d, f, 1.0, -10.0, 10.0);
  CHECK(ls.ok);
  CHECK(ls.alpha == 0.5);
  CHECK(ls.trials == 2);
  CHECK(ls.value < f(x));

  const LineSearchResult up = line_search(x, f(x), g, std::vector<double>{-1.0}, f, 1.0, -10.0, 10.0);
  CHECK_FALSE(up.ok);
  CHECK(up.trials == 0);

  const Objective flat = [](const std::vector<double>&) { return 1.0; };
  const LineSearchResult fail = line_search(x, 1.0, g, d, flat, 1.0, -10.0, 10.0, 1e-4, 8);
  CHECK_FALSE(fail.ok);
  CHECK(fail.trials == 8);
}

TEST_CASE("line search evaluates projected trials") {
  std::vector<double> seen;
  const Objective f = [&](const std::vector<double>& t) {
    seen.push_back(t[0]);
    return (t[0] - 5.0) * (t[0] - 5.0);
  };
  const std::vector<double> x{0.0}, g{-10.0}, d{10.0};
  const LineSearchResult ls = line_search(x, 25.0, g, d, f, 1.0, -1.0, 2.0);
  REQUIRE(ls.ok);
  CHECK(seen.front() == 2.0);
  CHECK(ls.x[0] == 2.0);
}

TEST_CASE("inversion config validation") {
  InversionConfig c;
  CHECK_NOTHROW(c.validate());
  c.cooling = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.max_iter = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.c1 = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("inversion without iterations returns the start model") {
  const ModelParam start = uniform(2.0);
  ModelParam truth = start;
  truth.m_h[truth.dims.index(1, 2, 2)] = std::log(8.0);
  Problem pb = tiny_problem(truth);
  InversionConfig cfg;
  cfg.max_iter = 0;
  const InversionResult r = invert(pb, start, cfg);
  CHECK(r.model.m_h == start.m_h);
  REQUIRE(r.log.size() == 1);
  CHECK(r.log[0].phi_d > 0.0);
  CHECK(r.log[0].step == 0.0);
  CHECK(r.stop_reason == "max_iter");
}

TEST_CASE("inversion from the true model stays put") {
  const ModelParam truth = uniform(2.0);
  Problem pb = tiny_problem(truth);
  InversionConfig cfg;
  cfg.max_iter = 3;
  const InversionResult r = invert(pb, truth, cfg);
  CHECK(r.log[0].phi_d < 1e-20);
  CHECK(r.log.size() == 1);
  CHECK(r.stop_reason != "max_iter");
  CHECK(r.model.m_h == truth.m_h);
}

TEST_CASE("accepted iterations decrease the objective within bounds") {
  const ModelParam start = uniform(2.0);
  ModelParam truth = start;
  for (int k = 1; k < 3; ++k) truth.m_h[truth.dims.index(2, 2, k)] = std::log(0.6);
  Problem pb = tiny_problem(truth);
  InversionConfig cfg;
  cfg.max_iter = 3;
  int calls = 0;
  const InversionResult r = invert(pb, start, cfg, [&](const IterationRecord&) { ++calls; });
  CHECK(calls == static_cast<int>(r.log.size()));
  REQUIRE(r.log.size() >= 2);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    const IterationRecord& a = r.log[i - 1];
    const IterationRecord& b = r.log[i];
    CHECK(b.phi_d + b.beta * b.phi_m < a.phi_d + b.beta * a.phi_m);
    CHECK(b.step > 0.0);
    CHECK(b.beta == doctest::Approx(cfg.beta0 * std::pow(cfg.cooling, static_cast<double>(i - 1))));
  }
  for (double m : r.model.m_h) {
    CHECK(m >= r.model.m_min);
    CHECK(m <= r.model.m_max);
  }
}
