#include <cmath>

#include "doctest.h"
#include "fwem/error.hpp"
#include "fwem/grid.hpp"

using namespace fwem;

namespace {

GridSpec cube(int n, double h, int npml) {
  GridSpec s;
  for (auto& a : s.axes) a = {n, h};
  s.npml = npml;
  return s;
}

}  // namespace

TEST_CASE("padding adds npml cells per face") {
  const Grid3D g = build_grid(cube(10, 100.0, 8));
  CHECK(g.cell_dims() == Dims{26, 26, 26});
  CHECK(g.interior_dims() == Dims{10, 10, 10});
  CHECK(g.interior_lo(0) == doctest::Approx(0.0));
  CHECK(g.interior_hi(2) == doctest::Approx(1000.0));
}

TEST_CASE("geometric stretching") {
  GridSpec s = cube(10, 25.0, 8);
  s.axes[2].stretch = 1.05;
  const Grid3D g = build_grid(s);
  CHECK(g.spacing(2, 8 + 9) == doctest::Approx(25.0 * std::pow(1.05, 9)).epsilon(1e-14));
  CHECK(g.spacing(2, 8 + 9 + 1) == doctest::Approx(25.0 * std::pow(1.05, 9)).epsilon(1e-14));
  for (int i = 1; i < g.cells(2); ++i) {
    const double r = g.spacing(2, i) / g.spacing(2, i - 1);
    CHECK(r >= 1.0);
    CHECK(r <= kMaxStretch + 1e-12);
  }
}

TEST_CASE("invalid grids are rejected") {
  GridSpec s = cube(10, 25.0, 8);
  s.axes[0].stretch = 1.5;
  CHECK_THROWS_AS(build_grid(s), Error);
  s = cube(10, -1.0, 8);
  CHECK_THROWS_AS(build_grid(s), Error);
  s = cube(0, 10.0, 8);
  CHECK_THROWS_AS(build_grid(s), Error);
  s = cube(10, 10.0, 4);
  CHECK_THROWS_AS(build_grid(s), Error);
  s.absorbing = false;
  CHECK_NOTHROW(build_grid(s));
}

TEST_CASE("stagger weights") {
  const Grid3D g = build_grid(cube(10, 100.0, 8));
  SUBCASE("on an Ex sample") {
    const StaggerWeights w = stagger_weights(g, {350.0, 300.0, 400.0}, Component::Ex);
    int ones = 0;
    double sum = 0.0;
    for (int n = 0; n < 8; ++n) {
      sum += w.weight[n];
      if (w.weight[n] == doctest::Approx(1.0)) {
        ++ones;
        CHECK(w.index[n] == g.node_dims().index(8 + 3, 8 + 3, 8 + 4));
      } else {
        CHECK(w.weight[n] == doctest::Approx(0.0));
      }
    }
    CHECK(ones == 1);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("midway between two Ex samples along x") {
    const StaggerWeights w = stagger_weights(g, {400.0, 300.0, 400.0}, Component::Ex);
    const Dims nd = g.node_dims();
    double a = 0.0, b = 0.0;
    for (int n = 0; n < 8; ++n) {
      if (w.index[n] == nd.index(11, 11, 12)) a += w.weight[n];
      if (w.index[n] == nd.index(12, 11, 12)) b += w.weight[n];
    }
    CHECK(a == doctest::Approx(0.5));
    CHECK(b == doctest::Approx(0.5));
  }
  SUBCASE("partition of unity and non-negativity") {
    for (Component c : {Component::Ex, Component::Ey, Component::Ez, Component::Hx, Component::Hy,
                        Component::Hz}) {
      const StaggerWeights w = stagger_weights(g, {123.0, 777.7, 501.0}, c);
      double sum = 0.0;
      for (double x : w.weight) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
  SUBCASE("PML position is rejected") {
    CHECK_THROWS_AS(stagger_weights(g, {-50.0, 300.0, 300.0}, Component::Ex), Error);
  }
}

TEST_CASE("sample volumes use primal spacing along staggered axes") {
  GridSpec s = cube(6, 10.0, 8);
  s.axes[1].spacing = 20.0;
  const Grid3D g = build_grid(s);
  CHECK(g.sample_volume(Component::Ex, 9, 9, 9) == doctest::Approx(10.0 * 20.0 * 10.0));
  CHECK(g.sample_volume(Component::Hz, 9, 9, 9) == doctest::Approx(10.0 * 20.0 * 10.0));
  CHECK(g.sample_volume(Component::Ex, 9, 0, 9) == doctest::Approx(10.0 * 10.0 * 10.0));
}

TEST_CASE("component names round-trip") {
  for (Component c : {Component::Ex, Component::Ey, Component::Ez, Component::Hx, Component::Hy,
                      Component::Hz}) {
    CHECK(parse_component(component_name(c)) == c);
  }
  CHECK_THROWS_AS(parse_component("Bx"), Error);
}
