#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fwem/error.hpp"

namespace fwem::app {

namespace {

struct Resistivity {
  std::vector<double> h;
  std::vector<double> v;  // empty when isotropic
};

std::vector<double> interior_volume(const Config& cfg, const std::string& key, const Grid3D& grid) {
  const Dims in = grid.interior_dims();
  if (cfg.has(key)) {
    VolumeFile vf = read_volume(cfg.get_path(key));
    if (!(vf.dims == in)) {
      throw Error("shape_mismatch", key + " has " + std::to_string(vf.dims.n1) + "x" + std::to_string(vf.dims.n2) +
                                        "x" + std::to_string(vf.dims.n3) + " cells, the grid interior " +
                                        std::to_string(in.n1) + "x" + std::to_string(in.n2) + "x" +
                                        std::to_string(in.n3));
    }
    return vf.values;
  }
  if (cfg.has(key + "_rho")) return std::vector<double>(in.size(), cfg.get_double(key + "_rho"));
  return {};
}

Resistivity load_resistivity(const Config& cfg, const std::string& key, const Grid3D& grid) {
  Resistivity r;
  r.h = interior_volume(cfg, key, grid);
  if (r.h.empty()) throw Error("missing_key", "config needs '" + key + "' or '" + key + "_rho'");
  r.v = interior_volume(cfg, key + "_v", grid);
  if (r.v.empty() && cfg.get("anisotropy", "iso") == "vti") r.v = r.h;
  const Dims in = grid.interior_dims();
  const int np = grid.npml();
  for (int b = 1; cfg.has(key + "_box" + std::to_string(b)); ++b) {
    const std::string name = key + "_box" + std::to_string(b);
    const std::vector<double> v = cfg.get_doubles(name);
    if (v.size() != 7 && v.size() != 8) throw Error("bad_value", name + " needs xmin,xmax,ymin,ymax,zmin,zmax,rho[,rho_v]");
    if (v.size() == 8 && r.v.empty()) throw Error("bad_value", name + " sets rho_v in an isotropic model");
    for (int k = 0; k < in.n3; ++k) {
      for (int j = 0; j < in.n2; ++j) {
        for (int i = 0; i < in.n1; ++i) {
          const double x = grid.center(0, i + np), y = grid.center(1, j + np), z = grid.center(2, k + np);
          if (x < v[0] || x > v[1] || y < v[2] || y > v[3] || z < v[4] || z > v[5]) continue;
          r.h[in.index(i, j, k)] = v[6];
          if (!r.v.empty()) r.v[in.index(i, j, k)] = v.size() == 8 ? v[7] : v[6];
        }
      }
    }
  }
  return r;
}

Medium resistivity_medium(const Resistivity& r, const Grid3D& grid) {
  auto inv = [](const std::vector<double>& rho) {
    std::vector<double> s(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (!(rho[i] > 0.0)) throw Error("bad_medium", "resistivity must be positive");
      s[i] = 1.0 / rho[i];
    }
    return s;
  };
  const std::vector<double> sh = inv(r.h);
  return r.v.empty() ? medium_from_interior(grid, sh, sh, Anisotropy::Isotropic)
                     : medium_from_interior(grid, sh, inv(r.v), Anisotropy::VTI);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("write_failed", "cannot write " + path.string());
  return out;
}

void write_pair_misfit(const std::filesystem::path& path, const Survey& survey, const std::vector<PairMisfit>& rows) {
  std::ofstream out = open_output(path);
  out << "src_id,rcv_id,significant_misfit\n";
  for (const auto& r : rows) {
    out << survey.source_ids[r.src] << ',' << survey.receiver_ids[r.rcv] << ',' << format_double(r.value) << '\n';
  }
}

void write_model(const std::filesystem::path& dir, const Grid3D& grid, const ModelParam& m) {
  auto rho = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    std::transform(v.begin(), v.end(), r.begin(), [](double x) { return std::exp(x); });
    return r;
  };
  write_volume(dir / "model_rho_h.bin", grid.interior_dims(), rho(m.m_h));
  if (m.mode == Anisotropy::VTI) write_volume(dir / "model_rho_v.bin", grid.interior_dims(), rho(m.m_v));
}

// Original-survey value = reciprocal value * moment * orientation.
double reciprocity_scale(const Survey& survey, const Datum& d) {
  const Dipole& s = survey.sources[d.src];
  for (int a = 0; a < 3; ++a) {
    if (s.orientation[a] != 0.0) return s.moment * s.orientation[a];
  }
  return 1.0;
}

std::string describe(const IterationRecord& r) {
  std::ostringstream ss;
  ss << "iteration " << r.iteration << ": phi_d " << r.phi_d << ", phi_m " << r.phi_m << ", beta " << r.beta
     << ", normalized " << r.normalized << ", step " << r.step << (r.restart ? " (restart)" : "") << ", "
     << r.wall_time << " s";
  return ss.str();
}

std::vector<std::size_t> parse_cells(const std::string& text, Dims in) {
  std::vector<std::size_t> out;
  std::istringstream groups(text);
  std::string group;
  while (std::getline(groups, group, ';')) {
    std::replace(group.begin(), group.end(), ',', ' ');
    std::istringstream ss(group);
    int i = 0, j = 0, k = 0;
    if (!(ss >> i >> j >> k)) {
      if (group.find_first_not_of(" \t") == std::string::npos) continue;
      throw Error("bad_value", "probe_cells entries must be 'i,j,k'");
    }
    if (i < 0 || j < 0 || k < 0 || i >= in.n1 || j >= in.n2 || k >= in.n3) {
      throw Error("bad_value", "probe cell outside the interior");
    }
    out.push_back(in.index(i, j, k));
  }
  return out;
}

}  // namespace

Grid3D load_grid(const Config& cfg) { return build_grid(grid_spec_from_config(cfg)); }

Survey load_survey(const Config& cfg, const Grid3D& grid) {
  Survey sv = read_survey(cfg.get_path("sources"), cfg.get_path("receivers"), cfg.get_doubles("frequencies"));
  validate_survey(sv, grid);
  return sv;
}

ModelParam load_model(const Config& cfg, const std::string& key, const Grid3D& grid) {
  const Resistivity r = load_resistivity(cfg, key, grid);
  const double lo = cfg.get_double("rho_min", 0.1);
  const double hi = cfg.get_double("rho_max", 1000.0);
  if (!(lo > 0.0)) throw Error("bad_bounds", "rho_min must be positive");
  ModelParam p = make_param(grid.interior_dims(), r.h, r.v, std::log(lo), std::log(hi));
  if (cfg.has("freeze_above")) {
    const double z = cfg.get_double("freeze_above");
    const Dims in = grid.interior_dims();
    p.frozen.assign(in.size(), 0);
    for (int k = 0; k < in.n3; ++k) {
      if (!(grid.center(2, k + grid.npml()) < z)) continue;
      for (int j = 0; j < in.n2; ++j)
        for (int i = 0; i < in.n1; ++i) p.frozen[in.index(i, j, k)] = 1;
    }
  }
  return p;
}

ProblemOptions problem_options(const Config& cfg) {
  ProblemOptions o;
  o.omega0 = cfg.get_double("omega0", o.omega0);
  o.cfl = cfg.get_double("cfl", o.cfl);
  o.efolds = cfg.get_double("efolds", o.efolds);
  o.gamma = cfg.get_double("gamma", o.gamma);
  o.m_max = std::log(cfg.get_double("rho_max", 1000.0));
  o.jobs = cfg.get_int("jobs", o.jobs);
  if (cfg.has("basis_cache")) o.basis_cache = cfg.get_path("basis_cache");
  return o;
}

InversionConfig inversion_config(const Config& cfg) {
  InversionConfig c;
  c.max_iter = cfg.get_int("max_iter", c.max_iter);
  c.memory = cfg.get_int("lbfgs_memory", c.memory);
  c.beta0 = cfg.get_double("beta0", c.beta0);
  c.cooling = cfg.get_double("cooling", c.cooling);
  c.alpha = {cfg.get_double("alpha_x", c.alpha[0]), cfg.get_double("alpha_y", c.alpha[1]),
             cfg.get_double("alpha_z", c.alpha[2])};
  c.c1 = cfg.get_double("armijo_c1", c.c1);
  c.max_trials = cfg.get_int("max_trials", c.max_trials);
  c.sd_update = cfg.get_double("sd_update", c.sd_update);
  c.max_update = cfg.get_double("max_update", c.max_update);
  c.precondition = cfg.get_bool("precondition", c.precondition);
  c.depth.z_seabed = cfg.get_double("z_seabed", c.depth.z_seabed);
  c.depth.z0 = cfg.get_double("depth_z0", c.depth.z0);
  c.depth.power = cfg.get_double("depth_power", c.depth.power);
  c.validate();
  return c;
}

UncertaintyModel uncertainty_model(const Config& cfg) {
  UncertaintyModel u;
  u.relative = cfg.get_double("relative_error", u.relative);
  u.floor = cfg.get_double("noise_floor", u.floor);
  u.mute_offset = cfg.get_double("mute_offset", u.mute_offset);
  return u;
}

SimConfig forward_sim_config(const Config& cfg, const Grid3D& grid, const Medium& medium) {
  SimConfig sc;
  sc.freqs = cfg.get_doubles("frequencies");
  sc.omega0 = cfg.get_double("omega0", sc.omega0);
  sc.cfl = cfg.get_double("cfl", sc.cfl);
  sc.steady_tol = cfg.get_double("steady_tol", sc.steady_tol);
  sc.check_every = cfg.get_int("check_every", sc.check_every);
  sc.pml.reflection = cfg.get_double("pml_reflection", sc.pml.reflection);
  sc.pml.order = cfg.get_int("pml_order", sc.pml.order);
  sc.wavelet = Wavelet::for_frequencies(sc.freqs, sc.omega0);
  sc.dt = compute_time_step(grid, sigma_to_epsilon(medium, sc.omega0), medium.mu, sc.cfl);
  sc.nt_max = cfg.get_int("nt_max", steps_for_decay(sc.freqs, sc.omega0, sc.dt, cfg.get_double("max_efolds", 30.0)));
  sc.steady_check = true;
  return sc;
}

Dataset forward_data(const Config& cfg, const Grid3D& grid, const Survey& survey, const Medium& medium) {
  Dataset data = survey_dataset(survey);
  const SimConfig sc = forward_sim_config(cfg, grid, medium);
  const int jobs = cfg.get_int("jobs", 1);
  if (cfg.get_bool("reciprocity", false)) {
    auto [rsv, rdata] = apply_reciprocity(survey, data);
    const ForwardData fd = forward_dataset(grid, rsv, rdata, medium, sc, jobs);
    for (std::size_t i = 0; i < data.size(); ++i) data[i].value = fd.values[i] * reciprocity_scale(survey, data[i]);
  } else {
    const ForwardData fd = forward_dataset(grid, survey, data, medium, sc, jobs);
    for (std::size_t i = 0; i < data.size(); ++i) data[i].value = fd.values[i];
  }
  const double eta = cfg.get_double("noise", 0.0);
  if (eta > 0.0) add_noise(data, eta, static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
  compute_weights(data, survey, uncertainty_model(cfg));
  return data;
}

std::pair<Survey, Dataset> observed_data(const Config& cfg, const Grid3D& grid) {
  Survey survey = load_survey(cfg, grid);
  Dataset data;
  if (cfg.has("data")) {
    data = read_data_file(cfg.get_path("data"), survey);
    const std::string mode = cfg.get("weights", "uncertainty");
    if (mode == "uncertainty") {
      compute_weights(data, survey, uncertainty_model(cfg));
    } else if (mode != "file") {
      throw Error("bad_value", "weights must be 'uncertainty' or 'file'");
    }
  } else {
    data = forward_data(cfg, grid, survey, resistivity_medium(load_resistivity(cfg, "model", grid), grid));
  }
  if (cfg.get_bool("reciprocity", false)) return apply_reciprocity(survey, data);
  return {survey, data};
}

int cmd_forward(const Config& cfg, const Logger& log) {
  const Grid3D grid = load_grid(cfg);
  const Survey survey = load_survey(cfg, grid);
  const Medium medium = resistivity_medium(load_resistivity(cfg, "model", grid), grid);
  const SimConfig sc = forward_sim_config(cfg, grid, medium);
  log("dt " + format_double(sc.dt) + " s, at most " + std::to_string(sc.nt_max) + " steps per source");
  const Dataset data = forward_data(cfg, grid, survey, medium);
  const std::filesystem::path out = cfg.has("data") ? cfg.get_path("data") : "data.csv";
  {
    std::ofstream os = open_output(out);
    write_data(os, survey, data);
  }
  log("wrote " + std::to_string(data.size()) + " data to " + out.string());

  if (cfg.has("volumes_dir")) {
    const std::filesystem::path dir = cfg.get_path("volumes_dir");
    std::filesystem::create_directories(dir);
    SimConfig vc = sc;
    vc.store_volumes = true;
    for (std::size_t s = 0; s < survey.sources.size(); ++s) {
      const FreqFieldSet f = run_forward(survey.sources[s], {}, medium, grid, vc);
      for (std::size_t k = 0; k < f.volumes.e.size(); ++k) {
        for (int c = 0; c < 3; ++c) {
          const auto& a = f.volumes.e[k][c];
          std::vector<double> re(a.size()), im(a.size());
          for (std::size_t i = 0; i < a.size(); ++i) {
            re[i] = a[i].real();
            im[i] = a[i].imag();
          }
          const std::string stem = "src" + std::to_string(survey.source_ids[s]) + "_f" + std::to_string(k) + "_" +
                                   std::string(component_name(kEComps[c]));
          write_volume(dir / (stem + "_re.bin"), a.dims(), re);
          write_volume(dir / (stem + "_im.bin"), a.dims(), im);
        }
      }
    }
    log("wrote E-field volumes to " + dir.string());
  }
  return 0;
}

int cmd_invert(const Config& cfg, const Logger& log) {
  const Grid3D grid = load_grid(cfg);
  auto [survey, data] = observed_data(cfg, grid);
  Problem pb = make_problem(grid, survey, data, problem_options(cfg));
  log("dt " + format_double(pb.sim.dt) + " s, " + std::to_string(pb.sim.nt_max) + " steps per simulation, basis " +
      (pb.basis.converged() ? "converged" : "NOT converged") + " in at most " +
      std::to_string(pb.basis.max_iterations()) + " iterations");
  const ModelParam start = load_model(cfg, "start_model", grid);
  set_pml_reference(pb, start);
  const InversionConfig icfg = inversion_config(cfg);
  const std::filesystem::path dir = cfg.has("output_dir") ? cfg.get_path("output_dir") : ".";
  std::filesystem::create_directories(dir);

  const Evaluation ev0 = evaluate(pb, start, cfg.get_bool("dump_gradient", false));
  write_pair_misfit(dir / "misfit_before.csv", pb.survey, significant_misfit(pb.observed, ev0.synthetic));
  if (cfg.get_bool("dump_gradient", false)) {
    const std::vector<double> g = data_gradient(pb, ev0);
    const std::size_t n = start.cells();
    write_volume(dir / "gradient_h.bin", grid.interior_dims(), std::span(g).subspan(0, n));
    if (start.mode == Anisotropy::VTI) write_volume(dir / "gradient_v.bin", grid.interior_dims(), std::span(g).subspan(n));
  }

  const InversionResult res = invert(pb, start, icfg, [&](const IterationRecord& r) { log(describe(r)); });
  {
    std::ofstream os = open_output(dir / "iterations.csv");
    write_iteration_log(os, res.log);
  }
  write_pair_misfit(dir / "misfit_after.csv", pb.survey, significant_misfit(pb.observed, res.final.synthetic));
  write_model(dir, grid, res.model);
  log("stopped: " + res.stop_reason + "; results in " + dir.string());
  return 0;
}

int cmd_basis(const Config& cfg, const Logger& log) {
  BasisParams p;
  p.dt = cfg.get_double("basis_dt", p.dt);
  p.nt = cfg.get_int("basis_nt", p.nt);
  p.freqs = cfg.get_doubles("frequencies");
  p.omega0 = cfg.get_double("omega0", p.omega0);
  p.gamma = cfg.get_double("gamma", p.gamma);
  p.tol = cfg.get_double("basis_tol", p.tol);
  p.max_iter = cfg.get_int("basis_max_iter", p.max_iter);
  const BasisSet b = compute_basis(p);
  {
    std::ofstream os = open_output(cfg.has("basis_output") ? cfg.get_path("basis_output") : "basis.csv");
    os << "step,time";
    for (std::size_t k = 0; k < b.b.size(); ++k) os << ",b" << k;
    os << '\n';
    for (int n = 0; n < p.nt; ++n) {
      os << n << ',' << format_double(n * p.dt);
      for (const auto& col : b.b) os << ',' << format_double(col[n]);
      os << '\n';
    }
  }
  {
    std::ofstream os = open_output(cfg.has("basis_history") ? cfg.get_path("basis_history") : "basis_history.csv");
    os << "column,iteration,relative_residual,converged\n";
    for (std::size_t k = 0; k < b.solves.size(); ++k) {
      const auto& h = b.solves[k].history;
      for (std::size_t i = 0; i < h.size(); ++i) {
        os << k << ',' << i << ',' << format_double(h[i]) << ',' << (b.solves[k].converged ? 1 : 0) << '\n';
      }
    }
  }
  for (std::size_t k = 0; k < b.solves.size(); ++k) {
    if (!b.solves[k].converged) log("warning: basis column " + std::to_string(k) + " did not converge");
  }
  log(std::to_string(b.b.size()) + " basis columns, at most " + std::to_string(b.max_iterations()) + " iterations");
  return 0;
}

GradcheckReport run_gradcheck(const Config& cfg) {
  const Grid3D grid = load_grid(cfg);
  Survey survey = load_survey(cfg, grid);
  Dataset data = cfg.has("data") ? read_data_file(cfg.get_path("data"), survey) : survey_dataset(survey);
  if (cfg.get_bool("reciprocity", false)) std::tie(survey, data) = apply_reciprocity(survey, data);
  Problem pb = make_problem(grid, survey, data, problem_options(cfg));
  const ModelParam start = load_model(cfg, "start_model", grid);
  set_pml_reference(pb, start);
  if (!cfg.has("data")) {
    // Observed data from the same discretization, so a start model equal
    // to the truth has zero residual.
    ModelParam truth = load_model(cfg, "model", grid);
    if (truth.mode != start.mode) throw Error("bad_config", "model and start_model differ in anisotropy");
    const std::vector<cplx> obs = simulate_data(pb, problem_medium(pb, truth));
    for (std::size_t i = 0; i < obs.size(); ++i) pb.observed[i].value = obs[i];
  }
  if (cfg.get("weights", "uncertainty") == "uncertainty") compute_weights(pb.observed, pb.survey, uncertainty_model(cfg));

  const Evaluation ev = evaluate(pb, start, true);
  const std::vector<double> adj = data_gradient(pb, ev);
  const std::size_t budget = static_cast<std::size_t>(cfg.get_double("snapshot_budget_mb", 512.0) * 1048576.0);
  const std::vector<double> td = logparam_gradient(grid, ev, crosscorrelation_gradient(pb, ev, budget));

  GradcheckReport r;
  r.interior = grid.interior_dims();
  r.mode = start.mode;
  r.misfit = ev.misfit.value;
  const std::size_t n = r.interior.size();
  std::vector<std::size_t> cells;
  if (cfg.has("probe_cells")) {
    cells = parse_cells(cfg.get("probe_cells"), r.interior);
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> mag(n, 0.0);
    for (std::size_t i = 0; i < adj.size(); ++i) mag[i % n] += std::abs(adj[i]);
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.get_int("probe_count", 5)), n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                      [&](std::size_t a, std::size_t b) { return mag[a] > mag[b] || (mag[a] == mag[b] && a < b); });
    cells.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  }
  for (int cls = 0; cls < start.classes(); ++cls) {
    for (std::size_t c : cells) r.params.push_back(static_cast<std::size_t>(cls) * n + c);
  }
  const MisfitFunction phi = [&](const ModelParam& m) { return evaluate(pb, m, false).misfit.value; };
  r.finite_difference = fd_gradient(phi, start, r.params, cfg.get_double("fd_delta", 1.0e-4));
  for (std::size_t p : r.params) {
    r.adjoint.push_back(adj[p]);
    r.timedomain.push_back(td[p]);
  }
  r.cosine_adjoint_fd = cosine_similarity(r.adjoint, r.finite_difference);
  r.cosine_timedomain_fd = cosine_similarity(r.timedomain, r.finite_difference);
  r.cosine_volume = cosine_similarity(td, adj);
  return r;
}

double relative_error(double x, double ref) { return ref != 0.0 ? std::abs(x - ref) / std::abs(ref) : std::abs(x); }

void write_gradcheck(std::ostream& os, const GradcheckReport& r) {
  const std::size_t n = r.interior.size();
  const auto n1 = static_cast<std::size_t>(r.interior.n1), n2 = static_cast<std::size_t>(r.interior.n2);
  os << "i,j,k,class,adjoint,finite_difference,timedomain,rel_err_adjoint,rel_err_timedomain,cosine_adjoint_fd,"
        "cosine_timedomain_fd,cosine_timedomain_adjoint\n";
  for (std::size_t q = 0; q < r.params.size(); ++q) {
    const std::size_t cell = r.params[q] % n;
    const char* cls = r.mode == Anisotropy::Isotropic ? "iso" : (r.params[q] < n ? "h" : "v");
    os << cell % n1 << ',' << (cell / n1) % n2 << ',' << cell / (n1 * n2) << ',' << cls << ','
       << format_double(r.adjoint[q]) << ',' << format_double(r.finite_difference[q]) << ','
       << format_double(r.timedomain[q]) << ',' << format_double(relative_error(r.adjoint[q], r.finite_difference[q]))
       << ',' << format_double(relative_error(r.timedomain[q], r.finite_difference[q])) << ','
       << format_double(r.cosine_adjoint_fd) << ',' << format_double(r.cosine_timedomain_fd) << ','
       << format_double(r.cosine_volume) << '\n';
  }
}

int cmd_gradcheck(const Config& cfg, const Logger& log) {
  const GradcheckReport r = run_gradcheck(cfg);
  std::ofstream os = open_output(cfg.has("gradcheck_output") ? cfg.get_path("gradcheck_output") : "gradcheck.csv");
  write_gradcheck(os, r);
  log("misfit " + format_double(r.misfit) + ", cosine adjoint/fd " + format_double(r.cosine_adjoint_fd) +
      ", time-domain/fd " + format_double(r.cosine_timedomain_fd) + ", time-domain/adjoint over the volume " +
      format_double(r.cosine_volume));
  return 0;
}

}  // namespace fwem::app
