#pragma once

#include <numbers>
#include <span>
#include <vector>

#include "fwem/array3.hpp"
#include "fwem/grid.hpp"

namespace fwem {

inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;
/// Default reference frequency of the fictitious transform: 2*pi*1 Hz.
inline constexpr double kDefaultOmega0 = 2.0 * std::numbers::pi;

enum class Anisotropy { Isotropic, VTI };

/// Conductivities on the padded cell lattice (S/m). sigma_h acts on Ex and
/// Ey, sigma_v on Ez.
struct Medium {
  Dims dims{};
  std::vector<double> sigma_h;
  std::vector<double> sigma_v;
  double mu = kMu0;
  Anisotropy mode = Anisotropy::Isotropic;

  [[nodiscard]] static Medium homogeneous(const Grid3D& grid, double sigma);
  /// Throws fwem::Error("bad_medium") on non-positive / non-finite values or
  /// an isotropic medium whose two arrays differ.
  void validate() const;
  [[nodiscard]] double min_sigma() const;
};

struct FictitiousPermittivity {
  Dims dims{};
  std::vector<double> eps_h;
  std::vector<double> eps_v;
  double omega0 = kDefaultOmega0;

  [[nodiscard]] double min_eps() const;
};

/// eps = sigma / (2 omega0), element-wise.
[[nodiscard]] FictitiousPermittivity sigma_to_epsilon(const Medium& medium, double omega0);

/// Log-resistivity model, m = ln(rho), on interior cells.
struct ModelParam {
  Dims dims{};
  Anisotropy mode = Anisotropy::Isotropic;
  std::vector<double> m_h;
  std::vector<double> m_v;  // empty when isotropic
  std::vector<double> ref_h;
  std::vector<double> ref_v;
  std::vector<unsigned char> frozen;  // one flag per interior cell; empty = none
  double m_min = -10.0;
  double m_max = 10.0;

  [[nodiscard]] int classes() const { return mode == Anisotropy::VTI ? 2 : 1; }
  [[nodiscard]] std::size_t cells() const { return dims.size(); }
  [[nodiscard]] bool is_frozen(std::size_t cell) const { return !frozen.empty() && frozen[cell]; }

  /// Parameters packed as [m_h, m_v].
  [[nodiscard]] std::vector<double> packed() const;
  void unpack(std::span<const double> values);
  void project();
};

/// Builds a parameter set with m = ln(rho); the reference model defaults to
/// the starting model.
[[nodiscard]] ModelParam make_param(Dims interior, std::span<const double> rho_h,
                                    std::span<const double> rho_v, double m_min, double m_max);

/// sigma = exp(-m) on the interior, after clamping to [m_min, m_max]; PML
/// cells copy the nearest interior cell.
[[nodiscard]] Medium param_to_medium(const ModelParam& p, const Grid3D& grid);

/// Expands interior conductivities onto the padded lattice.
[[nodiscard]] Medium medium_from_interior(const Grid3D& grid, std::span<const double> sigma_h,
                                          std::span<const double> sigma_v, Anisotropy mode);

/// Interior slice of a padded-lattice array.
[[nodiscard]] std::vector<double> interior_values(const Grid3D& grid, std::span<const double> padded);

/// d(phi)/dm = -sigma * d(phi)/d(sigma). Throws on size mismatch.
[[nodiscard]] std::vector<double> chain_rule_to_logparam(std::span<const double> grad_sigma,
                                                         std::span<const double> sigma);

}  // namespace fwem
