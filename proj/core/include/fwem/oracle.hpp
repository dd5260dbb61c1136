#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fwem/fdtd.hpp"
#include "fwem/gradient.hpp"

namespace fwem {

using CVec3 = std::array<cplx, 3>;

/// Frequency-domain E of an electric point dipole in a homogeneous whole
/// space, time dependence exp(-i omega t), k^2 = i omega mu sigma.
/// Throws fwem::Error("coincident_points") when obs == src.pos.
[[nodiscard]] CVec3 analytic_whole_space_dipole(double sigma, double mu, double freq_hz, const Dipole& src,
                                                const Vec3& obs);

/// Skin depth sqrt(2 / (omega mu sigma)).
[[nodiscard]] double skin_depth(double sigma, double mu, double freq_hz);

using MisfitFunction = std::function<double(const ModelParam&)>;

/// Central differences (phi(m + d e_i) - phi(m - d e_i)) / 2d for entries of
/// the packed parameter vector. Frozen cells give 0.
[[nodiscard]] std::vector<double> fd_gradient(const MisfitFunction& misfit, const ModelParam& m,
                                              std::span<const std::size_t> params, double delta = 1.0e-4);

inline constexpr std::size_t kDefaultSnapshotBudget = std::size_t{512} << 20;

/// E on the interior node box after every step: step s holds E^{s+1}.
struct Snapshots {
  Dims dims{};
  int steps = 0;
  std::array<std::vector<double>, 3> e;  // [axis][step * dims.size() + node]

  [[nodiscard]] const double* at(int axis, int step) const {
    return e[axis].data() + static_cast<std::size_t>(step) * dims.size();
  }
};

/// Memory needed by one Snapshots of `steps` steps.
[[nodiscard]] std::size_t snapshot_bytes(const Grid3D& grid, int steps);

/// Runs `sources` for nt steps and stores every E state. Throws
/// fwem::Error("snapshot_budget") when the snapshots would exceed `budget`.
[[nodiscard]] Snapshots record_snapshots(const Grid3D& grid, const Medium& medium, const SimConfig& cfg,
                                         std::vector<TimedInjection> sources, int nt, std::size_t budget);

/// Time-domain cross-correlation gradient with respect to sigma:
///   d(phi)/d(sigma_e) = dV_e / (2 w0 dt) sum_m (E^{m+1} - E^m)_e lambda^{N-m}_e,
/// where `adjoint` comes from the time-reversed adjoint sources, so that
/// lambda^{N-m} is the adjoint field at fictitious time (m + 1/2) dt.
[[nodiscard]] GradientVolume timedomain_gradient(const Grid3D& grid, const Snapshots& forward,
                                                 const Snapshots& adjoint, double dt, double omega0);

/// Time-reversed adjoint injections of one source gather. The residual of
/// each datum is spread over all fictitious times through the transform
/// kernel rather than through basis functions.
[[nodiscard]] std::vector<TimedInjection> reversed_adjoint_sources(const Problem& pb, const Evaluation& ev,
                                                                   std::size_t src);

/// Sum over sources of timedomain_gradient at an evaluated model. Each
/// source stores two snapshot sets, which must fit in `budget` together.
[[nodiscard]] GradientVolume crosscorrelation_gradient(const Problem& pb, const Evaluation& ev,
                                                       std::size_t budget = kDefaultSnapshotBudget);

/// Cosine of the angle between two vectors; 0 when either is zero.
[[nodiscard]] double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace fwem
