#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "fwem/io.hpp"
#include "fwem/oracle.hpp"

namespace fwem::app {

using Logger = std::function<void(const std::string&)>;

[[nodiscard]] Grid3D load_grid(const Config& cfg);
/// Survey with frequencies from `frequencies`, validated against the grid.
[[nodiscard]] Survey load_survey(const Config& cfg, const Grid3D& grid);

/// Resistivity model `<key>` (file) or `<key>_rho` (constant); `<key>_v` or
/// `<key>_v_rho` selects VTI. Boxes `<key>_box1`, `<key>_box2`, ... given as
/// xmin,xmax,ymin,ymax,zmin,zmax,rho[,rho_v] overwrite the cells whose
/// centers they contain. Bounds from rho_min / rho_max; cells whose centers
/// lie above `freeze_above` are frozen.
[[nodiscard]] ModelParam load_model(const Config& cfg, const std::string& key, const Grid3D& grid);

[[nodiscard]] ProblemOptions problem_options(const Config& cfg);
[[nodiscard]] InversionConfig inversion_config(const Config& cfg);
[[nodiscard]] UncertaintyModel uncertainty_model(const Config& cfg);
/// Forward-modelling settings for a medium: dt from the CFL bound, steady
/// state check on.
[[nodiscard]] SimConfig forward_sim_config(const Config& cfg, const Grid3D& grid, const Medium& medium);

/// Synthetic data of every recorded component, with optional noise and
/// uncertainty weights. Honors `reciprocity`.
[[nodiscard]] Dataset forward_data(const Config& cfg, const Grid3D& grid, const Survey& survey, const Medium& medium);

/// Observed data and survey for an inversion: from `data` when present,
/// otherwise synthesized from `true_model`. Weights follow `weights`
/// (uncertainty | file); reciprocity swaps roles afterwards.
[[nodiscard]] std::pair<Survey, Dataset> observed_data(const Config& cfg, const Grid3D& grid);

/// Adjoint, finite-difference and time-domain derivatives of the data
/// misfit at `start_model` on probe cells (`probe_cells`, or the
/// `probe_count` cells with the largest adjoint gradient).
struct GradcheckReport {
  Dims interior{};
  Anisotropy mode = Anisotropy::Isotropic;
  double misfit = 0.0;
  std::vector<std::size_t> params;  // packed parameter indices
  std::vector<double> adjoint, finite_difference, timedomain;
  double cosine_adjoint_fd = 0.0;
  double cosine_timedomain_fd = 0.0;
  double cosine_volume = 0.0;  // time-domain vs adjoint over every parameter
};
[[nodiscard]] GradcheckReport run_gradcheck(const Config& cfg);
void write_gradcheck(std::ostream& os, const GradcheckReport& r);
[[nodiscard]] double relative_error(double x, double ref);

int cmd_forward(const Config& cfg, const Logger& log);
int cmd_invert(const Config& cfg, const Logger& log);
int cmd_basis(const Config& cfg, const Logger& log);
int cmd_gradcheck(const Config& cfg, const Logger& log);

}  // namespace fwem::app
