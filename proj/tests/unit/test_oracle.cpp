#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fwem/error.hpp"
#include "fwem/oracle.hpp"

using namespace fwem;

namespace {

constexpr double kSigma = 0.5;
constexpr double kFreq = 1.0;

CVec3 field(const Vec3& p) {
  Dipole d;
  d.pos = {10.0, -20.0, 5.0};
  d.orientation = {0.6, 0.0, 0.8};
  d.moment = 2.0;
  return analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, p);
}

}  // namespace

TEST_CASE("analytic dipole solves the vector Helmholtz equation away from the source") {
  const double h = 0.5;
  const Vec3 p{300.0, 150.0, -200.0};
  const CVec3 e0 = field(p);
  const cplx k2(0.0, 2.0 * std::numbers::pi * kFreq * kMu0 * kSigma);
  CVec3 lap{};
  cplx div = 0.0;
  for (int a = 0; a < 3; ++a) {
    Vec3 lo = p, hi = p;
    lo[a] -= h;
    hi[a] += h;
    const CVec3 el = field(lo), eh = field(hi);
    for (int c = 0; c < 3; ++c) lap[c] += (eh[c] - 2.0 * e0[c] + el[c]) / (h * h);
    div += (eh[a] - el[a]) / (2.0 * h);
  }
  double scale = 0.0;
  for (int c = 0; c < 3; ++c) scale = std::max(scale, std::abs(k2 * e0[c]));
  for (int c = 0; c < 3; ++c) CHECK(std::abs(lap[c] + k2 * e0[c]) < 1e-3 * scale);
  const double r = std::sqrt(290.0 * 290.0 + 170.0 * 170.0 + 205.0 * 205.0);
  CHECK(std::abs(div) < 1e-3 * std::max({std::abs(e0[0]), std::abs(e0[1]), std::abs(e0[2])}) / r);
}

TEST_CASE("analytic dipole approaches the static dipole near the source") {
  Dipole d;
  const double delta = skin_depth(kSigma, kMu0, kFreq);
  const double r = delta / 200.0;
  const Vec3 p{r * 0.6, r * 0.8, 0.0};
  const CVec3 e = analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, p);
  const double pre = 1.0 / (4.0 * std::numbers::pi * kSigma * r * r * r);
  const double ex = pre * (3.0 * 0.6 * 0.6 - 1.0);
  const double ey = pre * 3.0 * 0.6 * 0.8;
  CHECK(e[0].real() == doctest::Approx(ex).epsilon(1e-3));
  CHECK(e[1].real() == doctest::Approx(ey).epsilon(1e-3));
  CHECK(std::abs(e[2]) < 1e-12 * pre);
}

TEST_CASE("analytic dipole symmetry and decay") {
  Dipole d;
  const Vec3 a{200.0, 300.0, 100.0}, b{200.0, -300.0, 100.0};
  const CVec3 ea = analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, a);
  const CVec3 eb = analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, b);
  CHECK(std::abs(ea[0] - eb[0]) < 1e-12 * std::abs(ea[0]));
  CHECK(std::abs(ea[1] + eb[1]) < 1e-12 * std::abs(ea[1]));

  const double delta = skin_depth(kSigma, kMu0, kFreq);
  const Vec3 far1{0.0, delta, 0.0}, far3{0.0, 3.0 * delta, 0.0};
  const double m1 = std::abs(analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, far1)[0]);
  const double m3 = std::abs(analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, far3)[0]);
  CHECK(m3 < m1 * std::exp(-2.0));

  CHECK(skin_depth(1.0, kMu0, 1.0) == doctest::Approx(503.29).epsilon(1e-4));
  CHECK_THROWS_AS((void)analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, d.pos), Error);
  d.kind = SourceKind::Magnetic;
  CHECK_THROWS_AS((void)analytic_whole_space_dipole(kSigma, kMu0, kFreq, d, a), Error);
}

TEST_CASE("central differences are exact for quadratics") {
  const Dims in{3, 2, 2};
  const std::vector<double> rho(in.size(), 2.0);
  ModelParam m = make_param(in, rho, rho, -5.0, 5.0);
  m.frozen.assign(in.size(), 0);
  m.frozen[4] = 1;
  const MisfitFunction f = [](const ModelParam& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.m_h.size(); ++i) s += (i + 1.0) * p.m_h[i] * p.m_h[i] + p.m_v[i];
    return s;
  };
  const std::vector<std::size_t> idx{0, 4, 5, in.size() + 2};
  const auto g = fd_gradient(f, m, idx, 1e-3);
  const double m0 = std::log(2.0);
  CHECK(g[0] == doctest::Approx(2.0 * m0));
  CHECK(g[1] == 0.0);
  CHECK(g[2] == doctest::Approx(12.0 * m0));
  CHECK(g[3] == doctest::Approx(1.0));
  CHECK_THROWS_AS((void)fd_gradient(f, m, idx, 0.0), Error);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> a{1.0, 2.0, 3.0}, b{2.0, 4.0, 6.0}, c{-1.0, -2.0, -3.0}, z(3, 0.0);
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, c) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(a, z) == 0.0);
  CHECK_THROWS_AS((void)cosine_similarity(a, std::vector<double>{1.0}), Error);
}

TEST_CASE("snapshot budget") {
  GridSpec s;
  for (auto& ax : s.axes) ax = {4, 100.0};
  s.npml = 8;
  const Grid3D g = build_grid(s);
  CHECK(snapshot_bytes(g, 10) == 3u * 125u * 10u * sizeof(double));
  SimConfig cfg;
  cfg.freqs = {1.0};
  cfg.dt = 1e-3;
  CHECK_THROWS_AS((void)record_snapshots(g, Medium::homogeneous(g, 1.0), cfg, {}, 10, 100), Error);
  const Snapshots snap = record_snapshots(g, Medium::homogeneous(g, 1.0), cfg, {}, 10, 1u << 20);
  CHECK(snap.steps == 10);
  CHECK(snap.at(0, 9)[0] == 0.0);
}
