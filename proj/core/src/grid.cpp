#include "fwem/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fwem/error.hpp"

namespace fwem {

std::string_view component_name(Component c) {
  switch (c) {
    case Component::Ex: return "Ex";
    case Component::Ey: return "Ey";
    case Component::Ez: return "Ez";
    case Component::Hx: return "Hx";
    case Component::Hy: return "Hy";
    case Component::Hz: return "Hz";
  }
  return "?";
}

Component parse_component(std::string_view name) {
  for (Component c : {Component::Ex, Component::Ey, Component::Ez, Component::Hx, Component::Hy,
                      Component::Hz}) {
    if (component_name(c) == name) return c;
  }
  throw Error("bad_component", "unknown field component '" + std::string(name) + "'");
}

bool is_electric(Component c) {
  return c == Component::Ex || c == Component::Ey || c == Component::Ez;
}

int component_axis(Component c) {
  switch (c) {
    case Component::Ex:
    case Component::Hx: return 0;
    case Component::Ey:
    case Component::Hy: return 1;
    default: return 2;
  }
}

bool is_staggered(Component c, int axis) {
  // E sits on edges (half index along its own axis); H sits on faces (half
  // index along the two other axes).
  const bool own = component_axis(c) == axis;
  return is_electric(c) ? own : !own;
}

double Grid3D::min_spacing() const {
  double h = spacing_[0].front();
  for (const auto& s : spacing_) h = std::min(h, *std::min_element(s.begin(), s.end()));
  return h;
}

bool Grid3D::inside_interior(const Vec3& pos) const {
  for (int a = 0; a < 3; ++a) {
    if (!(pos[a] >= interior_lo(a) && pos[a] <= interior_hi(a))) return false;
  }
  return true;
}

double Grid3D::sample_volume(Component c, int i, int j, int k) const {
  const std::array<int, 3> idx{i, j, k};
  double v = 1.0;
  for (int a = 0; a < 3; ++a) v *= is_staggered(c, a) ? spacing_[a][idx[a]] : dual_[a][idx[a]];
  return v;
}

Grid3D build_grid(const GridSpec& spec) {
  if (spec.npml < 0) throw Error("bad_grid", "npml must be non-negative");
  if (spec.absorbing && spec.npml < kMinPmlCells) {
    throw Error("bad_grid", "absorbing boundaries need at least " + std::to_string(kMinPmlCells) +
                                " PML cells, got " + std::to_string(spec.npml));
  }
  Grid3D g;
  g.npml_ = spec.npml;
  g.absorbing_ = spec.absorbing;
  for (int a = 0; a < 3; ++a) {
    const AxisSpec& ax = spec.axes[a];
    if (ax.cells <= 0) throw Error("bad_grid", "cell count must be positive on axis " + std::to_string(a));
    if (!(ax.spacing > 0.0) || !std::isfinite(ax.spacing)) {
      throw Error("bad_grid", "spacing must be positive on axis " + std::to_string(a));
    }
    if (!(ax.stretch >= 1.0 && ax.stretch <= kMaxStretch)) {
      throw Error("bad_grid", "stretch factor " + std::to_string(ax.stretch) + " outside [1, 1.2]");
    }
    if (ax.stretch_start < 0) throw Error("bad_grid", "stretch_start must be non-negative");

    std::vector<double> interior(ax.cells);
    for (int i = 0; i < ax.cells; ++i) {
      interior[i] = ax.spacing * std::pow(ax.stretch, std::max(0, i - ax.stretch_start));
    }
    auto& d = g.spacing_[a];
    d.assign(spec.npml, interior.front());
    d.insert(d.end(), interior.begin(), interior.end());
    d.insert(d.end(), spec.npml, interior.back());

    const int n = static_cast<int>(d.size());
    auto& x = g.node_[a];
    x.assign(n + 1, 0.0);
    x[spec.npml] = spec.origin[a];
    for (int i = spec.npml; i < n; ++i) x[i + 1] = x[i] + d[i];
    for (int i = spec.npml; i > 0; --i) x[i - 1] = x[i] - d[i - 1];

    auto& dd = g.dual_[a];
    dd.assign(n + 1, 0.0);
    dd[0] = 0.5 * d[0];
    dd[n] = 0.5 * d[n - 1];
    for (int i = 1; i < n; ++i) dd[i] = 0.5 * (d[i - 1] + d[i]);
  }
  return g;
}

namespace {

// Bracketing sample index and fractional offset along one axis.
std::pair<int, double> bracket(const Grid3D& g, Component c, int axis, double p) {
  const int count = is_staggered(c, axis) ? g.cells(axis) : g.cells(axis) + 1;
  int lo = 0;
  int hi = count - 1;
  // Largest l with coord(l) <= p.
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (g.sample_coordinate(c, axis, mid) <= p) lo = mid; else hi = mid;
  }
  if (lo + 1 >= count) lo = count - 2;
  const double x0 = g.sample_coordinate(c, axis, lo);
  const double x1 = g.sample_coordinate(c, axis, lo + 1);
  double t = (p - x0) / (x1 - x0);
  t = std::clamp(t, 0.0, 1.0);
  return {lo, t};
}

}  // namespace

StaggerWeights stagger_weights(const Grid3D& grid, const Vec3& pos, Component c) {
  if (!grid.inside_interior(pos)) {
    throw Error("outside_interior", "position (" + std::to_string(pos[0]) + ", " +
                                        std::to_string(pos[1]) + ", " + std::to_string(pos[2]) +
                                        ") is outside the interior region");
  }
  const auto [i0, tx] = bracket(grid, c, 0, pos[0]);
  const auto [j0, ty] = bracket(grid, c, 1, pos[1]);
  const auto [k0, tz] = bracket(grid, c, 2, pos[2]);
  const Dims nd = grid.node_dims();
  StaggerWeights sw;
  int n = 0;
  for (int dk = 0; dk < 2; ++dk) {
    for (int dj = 0; dj < 2; ++dj) {
      for (int di = 0; di < 2; ++di) {
        sw.index[n] = nd.index(i0 + di, j0 + dj, k0 + dk);
        sw.weight[n] = (di ? tx : 1.0 - tx) * (dj ? ty : 1.0 - ty) * (dk ? tz : 1.0 - tz);
        ++n;
      }
    }
  }
  return sw;
}

}  // namespace fwem
