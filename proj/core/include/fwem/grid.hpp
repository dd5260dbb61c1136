#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "fwem/array3.hpp"

namespace fwem {

using Vec3 = std::array<double, 3>;

enum class Component { Ex, Ey, Ez, Hx, Hy, Hz };
inline constexpr std::array<Component, 3> kEComps{Component::Ex, Component::Ey, Component::Ez};
inline constexpr std::array<Component, 3> kHComps{Component::Hx, Component::Hy, Component::Hz};

[[nodiscard]] std::string_view component_name(Component c);
[[nodiscard]] Component parse_component(std::string_view name);
[[nodiscard]] bool is_electric(Component c);
/// Axis (0, 1, 2) the component points along.
[[nodiscard]] int component_axis(Component c);
/// True when the component sits at cell centers (half-integer index) along `axis`.
[[nodiscard]] bool is_staggered(Component c, int axis);

/// One axis of the grid description. Cell `i` has spacing
/// `spacing * stretch^max(0, i - stretch_start)`.
struct AxisSpec {
  int cells = 0;
  double spacing = 0.0;
  double stretch = 1.0;
  int stretch_start = 0;
};

struct GridSpec {
  std::array<AxisSpec, 3> axes{};
  int npml = 10;
  bool absorbing = true;
  /// Physical coordinate of the first interior node on each axis, in meters.
  Vec3 origin{0.0, 0.0, 0.0};
};

inline constexpr double kMaxStretch = 1.2;
inline constexpr int kMinPmlCells = 8;

/// Trilinear stencil of a point on one component's staggered sub-lattice.
/// Indices address arrays with `Grid3D::node_dims()`.
struct StaggerWeights {
  std::array<std::size_t, 8> index{};
  std::array<double, 8> weight{};
};

/// Staggered Yee lattice with per-axis spacings and PML padding.
///
/// Cells are indexed in the padded frame: interior cells along an axis are
/// `[npml, npml + interior)`. Every field component is stored in an array of
/// `node_dims()` at the index of its lower corner node, e.g. Ex(i+1/2, j, k)
/// lives at `(i, j, k)`.
class Grid3D {
 public:
  Grid3D() = default;

  [[nodiscard]] int cells(int axis) const { return static_cast<int>(spacing_[axis].size()); }
  [[nodiscard]] int interior_cells(int axis) const { return cells(axis) - 2 * npml_; }
  [[nodiscard]] int npml() const { return npml_; }
  [[nodiscard]] bool absorbing() const { return absorbing_; }

  [[nodiscard]] Dims cell_dims() const { return {cells(0), cells(1), cells(2)}; }
  [[nodiscard]] Dims node_dims() const { return {cells(0) + 1, cells(1) + 1, cells(2) + 1}; }
  [[nodiscard]] Dims interior_dims() const {
    return {interior_cells(0), interior_cells(1), interior_cells(2)};
  }

  /// Spacing of padded cell `i` along `axis`.
  [[nodiscard]] double spacing(int axis, int i) const { return spacing_[axis][i]; }
  [[nodiscard]] const std::vector<double>& spacings(int axis) const { return spacing_[axis]; }
  /// Distance between the centers of the two cells sharing node `i`; half a
  /// cell at the outer boundary.
  [[nodiscard]] double dual_spacing(int axis, int i) const { return dual_[axis][i]; }
  [[nodiscard]] double node(int axis, int i) const { return node_[axis][i]; }
  [[nodiscard]] double center(int axis, int i) const {
    return 0.5 * (node_[axis][i] + node_[axis][i + 1]);
  }
  [[nodiscard]] double min_spacing() const;

  [[nodiscard]] double interior_lo(int axis) const { return node_[axis][npml_]; }
  [[nodiscard]] double interior_hi(int axis) const { return node_[axis][npml_ + interior_cells(axis)]; }
  [[nodiscard]] bool inside_interior(const Vec3& pos) const;

  [[nodiscard]] double cell_volume(int i, int j, int k) const {
    return spacing_[0][i] * spacing_[1][j] * spacing_[2][k];
  }
  /// Dual volume attached to a staggered sample of `c` stored at (i, j, k).
  [[nodiscard]] double sample_volume(Component c, int i, int j, int k) const;

  /// Coordinate of sample `i` of a component's sub-lattice along `axis`.
  [[nodiscard]] double sample_coordinate(Component c, int axis, int i) const {
    return is_staggered(c, axis) ? center(axis, i) : node_[axis][i];
  }

  friend Grid3D build_grid(const GridSpec& spec);

 private:
  std::array<std::vector<double>, 3> spacing_;
  std::array<std::vector<double>, 3> node_;
  std::array<std::vector<double>, 3> dual_;
  int npml_ = 0;
  bool absorbing_ = true;
};

/// Builds the padded grid. PML cells repeat the adjacent interior spacing.
/// Throws fwem::Error("bad_grid") on non-positive sizes, stretch outside
/// [1, 1.2], or fewer than 8 PML cells with absorption enabled.
[[nodiscard]] Grid3D build_grid(const GridSpec& spec);

/// Trilinear weights of `pos` on the sub-lattice of `c`. Throws
/// fwem::Error("outside_interior") when `pos` is not in the interior region.
[[nodiscard]] StaggerWeights stagger_weights(const Grid3D& grid, const Vec3& pos, Component c);

}  // namespace fwem
