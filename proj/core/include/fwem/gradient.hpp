#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <vector>

#include "fwem/adjoint_source.hpp"
#include "fwem/fdtd.hpp"
#include "fwem/medium.hpp"
#include "fwem/survey.hpp"

namespace fwem {

/// Relative-plus-floor data uncertainty.
struct UncertaintyModel {
  double relative = 0.03;
  double floor = 1.0e-15;
  double mute_offset = 0.0;  // data closer than this get zero weight
};

/// w = 1 / (relative |d| + floor); zero inside the mute offset.
void compute_weights(Dataset& data, const Survey& survey, const UncertaintyModel& model);

struct MisfitValue {
  double value = 0.0;
  double normalized = 0.0;
  std::size_t count = 0;  // data with non-zero weight
};

/// 1/2 sum |w (d_obs - d_syn)|^2 over the data; `synthetic` is aligned with
/// `observed`.
[[nodiscard]] MisfitValue misfit_value(const Dataset& observed, std::span<const cplx> synthetic);

/// ||W (d_obs - d_syn)|| over the components and frequencies of one
/// source-receiver pair.
struct PairMisfit {
  std::size_t src = 0;
  std::size_t rcv = 0;
  double value = 0.0;
};
/// One entry per (source, receiver) with data, sorted by source then
/// receiver. Muted pairs report 0.
[[nodiscard]] std::vector<PairMisfit> significant_misfit(const Dataset& observed, std::span<const cplx> synthetic);

/// One simulation injecting all adjoint series at once. Returns the raw
/// accumulated E spectra, i.e. the conjugated adjoint field.
[[nodiscard]] VolumeSpectra run_adjoint(std::span<const AdjointSeries> sources, const Medium& medium,
                                        const Grid3D& grid, const SimConfig& cfg, int nt);

/// d(phi)/d(sigma) on interior cells. `iso` = h + v.
struct GradientVolume {
  std::vector<double> h;  // from Ex and Ey edges
  std::vector<double> v;  // from Ez edges
  [[nodiscard]] std::vector<double> iso() const;
  void add(const GradientVolume& other);
};

/// Sums per-edge derivatives d(phi)/d(sigma_edge) on the interior node box
/// onto the interior cells each edge averages.
[[nodiscard]] GradientVolume fold_edge_gradient(const Grid3D& grid, const std::array<Array3<double>, 3>& edges);

/// -Re sum_k L_k dV conj(E_adj) . E over E edges, averaged onto the adjacent
/// interior cells, where L_k = Omega_d/omega' corrects for the leap-frog
/// frequency. Volumes follow the layout produced by simulate().
[[nodiscard]] GradientVolume assemble_gradient(const Grid3D& grid, const VolumeSpectra& forward,
                                               const VolumeSpectra& adjoint_conj, std::span<const double> freqs,
                                               double omega0, double dt);

/// Regularization weights and value/gradient of
/// 1/2 sum_axes alpha_a^2 |D_a (m - m_ref)|^2 with plain index differences.
[[nodiscard]] std::pair<double, std::vector<double>> tikhonov_value_and_gradient(const ModelParam& p,
                                                                                 const std::array<double, 3>& alpha);

/// Depth weight for z pointing down.
struct DepthPreconditioner {
  double z_seabed = 0.0;
  double z0 = 500.0;
  double power = 1.5;
};

/// Multiplies by ((z - z_seabed + z0) / z0)^p below the seabed and by 1
/// above it, evaluated at cell centers.
/// `values` holds one or more stacked interior volumes.
void depth_precondition(std::vector<double>& values, const Grid3D& grid, const DepthPreconditioner& dp);
/// The same weight, one value per interior z layer.
[[nodiscard]] std::vector<double> depth_weights(const Grid3D& grid, const DepthPreconditioner& dp);

/// Everything fixed during an inversion: grid, survey, data, time stepping
/// and adjoint basis.
struct Problem {
  Grid3D grid;
  Survey survey;
  Dataset observed;
  SimConfig sim;  // dt, nt_max and pml_speed fixed; steady_check off
  BasisSet basis;
  std::vector<Gather> gathers;  // per source
  /// Conductivities used in the PML cells, which are not model parameters.
  /// Empty: PML cells copy the nearest interior cell of each model.
  Medium pml_reference;
  int jobs = 1;
};

struct ProblemOptions {
  double omega0 = kDefaultOmega0;
  double cfl = 0.9;
  double efolds = 12.0;
  double gamma = 1.0e-3;
  double m_max = 10.0;  // fixes dt and PML grading for any model inside the bounds
  int jobs = 1;
  std::filesystem::path basis_cache;  // empty: no cache
};

[[nodiscard]] Problem make_problem(Grid3D grid, Survey survey, Dataset observed, const ProblemOptions& opt);

/// Freezes the PML conductivities at the padded copy of `model`. With a
/// reference in place the gradient is exact for every interior cell.
void set_pml_reference(Problem& pb, const ModelParam& model);

/// Medium of a model with the problem's PML handling applied.
[[nodiscard]] Medium problem_medium(const Problem& pb, const ModelParam& model);

/// Forward runs of every source at one model.
struct Evaluation {
  ModelParam model;
  Medium medium;
  std::vector<cplx> synthetic;  // aligned with observed data
  std::vector<FreqFieldSet> forward;  // per source, with E volumes
  MisfitValue misfit;
};

[[nodiscard]] Evaluation evaluate(const Problem& pb, const ModelParam& model, bool keep_volumes);

/// Adjoint runs and gradient assembly for an evaluation computed with
/// keep_volumes = true. Returned per parameter class with respect to m,
/// stacked like ModelParam::packed(); frozen cells are zero.
[[nodiscard]] std::vector<double> data_gradient(const Problem& pb, const Evaluation& ev);

/// Same as data_gradient but with respect to sigma (h and v classes).
[[nodiscard]] GradientVolume data_gradient_sigma(const Problem& pb, const Evaluation& ev);

/// d(phi)/dm from d(phi)/d(sigma) at an evaluated model: -sigma g per class
/// (h + v for an isotropic model), zero in frozen cells.
[[nodiscard]] std::vector<double> logparam_gradient(const Grid3D& grid, const Evaluation& ev,
                                                    const GradientVolume& gs);

/// Synthetic data for a medium: one forward run per source.
[[nodiscard]] std::vector<cplx> simulate_data(const Problem& pb, const Medium& medium);

struct ForwardData {
  std::vector<cplx> values;  // aligned with the dataset
  std::vector<FreqFieldSet> runs;  // per source; receivers only
};

/// One run_forward per source with data, up to `jobs` at a time.
[[nodiscard]] ForwardData forward_dataset(const Grid3D& grid, const Survey& survey, const Dataset& data,
                                          const Medium& medium, const SimConfig& cfg, int jobs);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace fwem
