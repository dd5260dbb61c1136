#include "fwem/gradient.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "fwem/error.hpp"

namespace fwem {

void compute_weights(Dataset& data, const Survey& survey, const UncertaintyModel& model) {
  if (!(model.floor > 0.0)) throw Error("bad_uncertainty", "noise floor must be positive");
  if (!(model.relative >= 0.0)) throw Error("bad_uncertainty", "relative error must be non-negative");
  for (Datum& d : data) {
    if (!std::isfinite(d.value.real()) || !std::isfinite(d.value.imag())) {
      throw Error("bad_data", "non-finite datum");
    }
    d.weight = datum_offset(survey, d) < model.mute_offset ? 0.0 : 1.0 / (model.relative * std::abs(d.value) + model.floor);
  }
}

MisfitValue misfit_value(const Dataset& observed, std::span<const cplx> synthetic) {
  if (synthetic.size() != observed.size()) throw Error("shape_mismatch", "synthetic data size mismatch");
  MisfitValue m;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double w = observed[i].weight;
    if (w == 0.0) continue;
    m.value += 0.5 * std::norm(w * (observed[i].value - synthetic[i]));
    ++m.count;
  }
  m.normalized = m.count ? m.value / static_cast<double>(m.count) : 0.0;
  return m;
}

std::vector<PairMisfit> significant_misfit(const Dataset& observed, std::span<const cplx> synthetic) {
  if (synthetic.size() != observed.size()) throw Error("shape_mismatch", "synthetic data size mismatch");
  std::map<std::pair<std::size_t, std::size_t>, double> acc;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const Datum& d = observed[i];
    acc[{d.src, d.rcv}] += std::norm(d.weight * (d.value - synthetic[i]));
  }
  std::vector<PairMisfit> out;
  for (const auto& [key, v] : acc) out.push_back({key.first, key.second, std::sqrt(v)});
  return out;
}

VolumeSpectra run_adjoint(std::span<const AdjointSeries> sources, const Medium& medium, const Grid3D& grid,
                          const SimConfig& cfg, int nt) {
  SimulationRequest req;
  for (const auto& s : sources) req.sources.push_back({s.pos, s.comp, s.series});
  req.nt = nt;
  req.steady_check = false;
  req.volumes = true;
  return simulate(grid, medium, cfg, req).volumes;
}

std::vector<double> GradientVolume::iso() const {
  std::vector<double> g(h.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = h[i] + v[i];
  return g;
}

void GradientVolume::add(const GradientVolume& other) {
  if (h.empty()) {
    *this = other;
    return;
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] += other.h[i];
    v[i] += other.v[i];
  }
}

GradientVolume fold_edge_gradient(const Grid3D& grid, const std::array<Array3<double>, 3>& edges) {
  const Dims in = grid.interior_dims();
  const int np = grid.npml();
  const Dims vd{in.n1 + 1, in.n2 + 1, in.n3 + 1};
  for (const auto& a : edges) {
    if (!(a.dims() == vd)) throw Error("shape_mismatch", "edge gradient does not match the grid");
  }
  const Dims cd = grid.cell_dims();
  std::array<std::vector<double>, 3> per;
  for (auto& v : per) v.assign(in.size(), 0.0);
  for (int c = 0; c < 3; ++c) {
    const std::array<int, 3> hi{c == 0 ? in.n1 : vd.n1, c == 1 ? in.n2 : vd.n2, c == 2 ? in.n3 : vd.n3};
    for (int k = 0; k < hi[2]; ++k) {
      for (int j = 0; j < hi[1]; ++j) {
        for (int i = 0; i < hi[0]; ++i) {
          const double ge = edges[c](i, j, k);
          if (ge == 0.0) continue;
          const EdgeStencil st = edge_stencil(grid, kEComps[c], i + np, j + np, k + np);
          for (int m = 0; m < st.count; ++m) {
            // PML conductivities are not model parameters.
            const std::size_t cell = st.cell[m];
            const int ci = static_cast<int>(cell % static_cast<std::size_t>(cd.n1)) - np;
            const int cj = static_cast<int>((cell / static_cast<std::size_t>(cd.n1)) % static_cast<std::size_t>(cd.n2)) - np;
            const int ck = static_cast<int>(cell / (static_cast<std::size_t>(cd.n1) * static_cast<std::size_t>(cd.n2))) - np;
            if (ci < 0 || cj < 0 || ck < 0 || ci >= in.n1 || cj >= in.n2 || ck >= in.n3) continue;
            per[c][in.index(ci, cj, ck)] += st.weight[m] * ge;
          }
        }
      }
    }
  }
  GradientVolume g;
  g.h.resize(in.size());
  g.v = per[2];
  for (std::size_t i = 0; i < in.size(); ++i) g.h[i] = per[0][i] + per[1][i];
  return g;
}

GradientVolume assemble_gradient(const Grid3D& grid, const VolumeSpectra& forward, const VolumeSpectra& adjoint_conj,
                                 std::span<const double> freqs, double omega0, double dt) {
  const std::size_t nf = freqs.size();
  if (forward.e.size() != nf || adjoint_conj.e.size() != nf) {
    throw Error("freq_mismatch", "volume spectra do not match the frequency list");
  }
  const Dims in = grid.interior_dims();
  const int np = grid.npml();
  const Dims vd{in.n1 + 1, in.n2 + 1, in.n3 + 1};
  for (std::size_t k = 0; k < nf; ++k) {
    for (int c = 0; c < 3; ++c) {
      if (!(forward.e[k][c].dims() == vd) || !(adjoint_conj.e[k][c].dims() == vd)) {
        throw Error("shape_mismatch", "volume spectra do not match the grid");
      }
    }
  }
  std::vector<cplx> lf(nf);
  for (std::size_t k = 0; k < nf; ++k) lf[k] = leapfrog_factor(freqs[k], omega0, dt);

  std::array<Array3<double>, 3> edges{Array3<double>(vd), Array3<double>(vd), Array3<double>(vd)};
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < vd.n3; ++k) {
      for (int j = 0; j < vd.n2; ++j) {
        for (int i = 0; i < vd.n1; ++i) {
          const std::size_t li = vd.index(i, j, k);
          cplx acc = 0.0;
          for (std::size_t f = 0; f < nf; ++f) acc += lf[f] * adjoint_conj.e[f][c][li] * forward.e[f][c][li];
          edges[c][li] = -grid.sample_volume(kEComps[c], i + np, j + np, k + np) * acc.real();
        }
      }
    }
  }
  return fold_edge_gradient(grid, edges);
}

std::pair<double, std::vector<double>> tikhonov_value_and_gradient(const ModelParam& p,
                                                                   const std::array<double, 3>& alpha) {
  const Dims d = p.dims;
  const std::size_t n = d.size();
  std::vector<double> grad(n * static_cast<std::size_t>(p.classes()), 0.0);
  double value = 0.0;
  for (int cls = 0; cls < p.classes(); ++cls) {
    const auto& m = cls == 0 ? p.m_h : p.m_v;
    const auto& ref = cls == 0 ? p.ref_h : p.ref_v;
    if (m.size() != n || ref.size() != n) throw Error("shape_mismatch", "model and reference sizes differ");
    double* g = grad.data() + static_cast<std::size_t>(cls) * n;
    const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(d.n1),
                                            static_cast<std::size_t>(d.n1) * static_cast<std::size_t>(d.n2)};
    for (int a = 0; a < 3; ++a) {
      const double w = alpha[a] * alpha[a];
      if (w == 0.0) continue;
      for (int k = 0; k < d.n3; ++k) {
        for (int j = 0; j < d.n2; ++j) {
          for (int i = 0; i < d.n1; ++i) {
            const std::array<int, 3> idx{i, j, k};
            const std::array<int, 3> len{d.n1, d.n2, d.n3};
            if (idx[a] + 1 >= len[a]) continue;
            const std::size_t p0 = d.index(i, j, k);
            const std::size_t p1 = p0 + stride[a];
            const double diff = (m[p1] - ref[p1]) - (m[p0] - ref[p0]);
            value += 0.5 * w * diff * diff;
            g[p1] += w * diff;
            g[p0] -= w * diff;
          }
        }
      }
    }
  }
  return {value, grad};
}

std::vector<double> depth_weights(const Grid3D& grid, const DepthPreconditioner& dp) {
  if (!(dp.z0 > 0.0)) throw Error("bad_precondition", "z0 must be positive");
  const Dims in = grid.interior_dims();
  std::vector<double> w(static_cast<std::size_t>(in.n3));
  for (int k = 0; k < in.n3; ++k) {
    const double z = grid.center(2, k + grid.npml());
    w[k] = z > dp.z_seabed ? std::pow((z - dp.z_seabed + dp.z0) / dp.z0, dp.power) : 1.0;
  }
  return w;
}

void depth_precondition(std::vector<double>& values, const Grid3D& grid, const DepthPreconditioner& dp) {
  const Dims in = grid.interior_dims();
  const std::size_t n = in.size();
  if (n == 0 || values.size() % n != 0) throw Error("shape_mismatch", "gradient does not match the grid");
  const std::vector<double> w = depth_weights(grid, dp);
  const std::size_t layer = static_cast<std::size_t>(in.n1) * static_cast<std::size_t>(in.n2);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= w[(i % n) / layer];
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Problem make_problem(Grid3D grid, Survey survey, Dataset observed, const ProblemOptions& opt) {
  if (survey.freqs.empty()) throw Error("bad_config", "no frequencies");
  if (survey.sources.empty()) throw Error("bad_config", "no sources");
  Problem pb;
  pb.grid = std::move(grid);
  pb.survey = std::move(survey);
  pb.observed = std::move(observed);
  pb.jobs = opt.jobs;
  for (const Datum& d : pb.observed) {
    if (d.src >= pb.survey.sources.size() || d.rcv >= pb.survey.receivers.size() ||
        d.freq >= pb.survey.freqs.size()) {
      throw Error("bad_data", "datum refers to an unknown source, receiver or frequency");
    }
  }
  for (const Dipole& s : pb.survey.sources) {
    if (!pb.grid.inside_interior(s.pos)) throw Error("outside_interior", "source outside the interior region");
  }
  const double sigma_min = std::exp(-opt.m_max);
  const double eps_min = sigma_min / (2.0 * opt.omega0);
  const double c_max = 1.0 / std::sqrt(kMu0 * eps_min);
  SimConfig& cfg = pb.sim;
  cfg.freqs = pb.survey.freqs;
  cfg.omega0 = opt.omega0;
  cfg.cfl = opt.cfl;
  cfg.dt = opt.cfl * pb.grid.min_spacing() / (c_max * std::sqrt(3.0));
  cfg.pml_speed = c_max;
  cfg.steady_check = false;
  cfg.wavelet = Wavelet::for_frequencies(cfg.freqs, opt.omega0);
  cfg.nt_max = steps_for_decay(cfg.freqs, opt.omega0, cfg.dt, opt.efolds);
  BasisParams bp;
  bp.dt = cfg.dt;
  bp.nt = cfg.nt_max;
  bp.freqs = cfg.freqs;
  bp.omega0 = opt.omega0;
  bp.gamma = opt.gamma;
  pb.basis = opt.basis_cache.empty() ? compute_basis(bp) : cached_basis(opt.basis_cache, bp);
  for (std::size_t s = 0; s < pb.survey.sources.size(); ++s) {
    pb.gathers.push_back(gather_for_source(pb.survey, pb.observed, s));
  }
  return pb;
}

namespace {

std::vector<cplx> collect(const Problem& pb, const std::vector<FreqFieldSet>& fwd) {
  std::vector<cplx> out(pb.observed.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Datum& d = pb.observed[i];
    out[i] = fwd[d.src].at(d.freq, pb.gathers[d.src].slot_of(d.rcv, d.comp));
  }
  return out;
}

std::vector<FreqFieldSet> forward_all(const Problem& pb, const Medium& medium, bool volumes) {
  std::vector<FreqFieldSet> fwd(pb.survey.sources.size());
  SimConfig cfg = pb.sim;
  cfg.store_volumes = volumes;
  parallel_for(fwd.size(), pb.jobs, [&](std::size_t s) {
    if (pb.gathers[s].specs.empty() && !volumes) return;
    fwd[s] = run_forward(pb.survey.sources[s], pb.gathers[s].specs, medium, pb.grid, cfg);
  });
  return fwd;
}

}  // namespace

std::vector<cplx> simulate_data(const Problem& pb, const Medium& medium) {
  return collect(pb, forward_all(pb, medium, false));
}

Medium problem_medium(const Problem& pb, const ModelParam& model) {
  Medium m = param_to_medium(model, pb.grid);
  if (pb.pml_reference.dims.size() == 0) return m;
  if (!(pb.pml_reference.dims == m.dims)) throw Error("shape_mismatch", "PML reference does not match the grid");
  const Dims cd = pb.grid.cell_dims();
  const int np = pb.grid.npml();
  const Dims in = pb.grid.interior_dims();
  for (int k = 0; k < cd.n3; ++k) {
    for (int j = 0; j < cd.n2; ++j) {
      for (int i = 0; i < cd.n1; ++i) {
        const bool inside = i >= np && j >= np && k >= np && i < np + in.n1 && j < np + in.n2 && k < np + in.n3;
        if (inside) continue;
        const std::size_t p = cd.index(i, j, k);
        m.sigma_h[p] = pb.pml_reference.sigma_h[p];
        m.sigma_v[p] = pb.pml_reference.sigma_v[p];
      }
    }
  }
  if (m.mode == Anisotropy::Isotropic && m.sigma_h != m.sigma_v) m.mode = Anisotropy::VTI;
  return m;
}

void set_pml_reference(Problem& pb, const ModelParam& model) {
  pb.pml_reference = Medium{};
  pb.pml_reference = param_to_medium(model, pb.grid);
}

Evaluation evaluate(const Problem& pb, const ModelParam& model, bool keep_volumes) {
  Evaluation ev;
  ev.model = model;
  ev.model.project();
  ev.medium = problem_medium(pb, ev.model);
  ev.forward = forward_all(pb, ev.medium, keep_volumes);
  ev.synthetic = collect(pb, ev.forward);
  ev.misfit = misfit_value(pb.observed, ev.synthetic);
  return ev;
}

GradientVolume data_gradient_sigma(const Problem& pb, const Evaluation& ev) {
  const std::size_t ns = pb.survey.sources.size();
  const std::size_t nf = pb.survey.freqs.size();
  std::vector<GradientVolume> per(ns);
  parallel_for(ns, pb.jobs, [&](std::size_t s) {
    const Gather& g = pb.gathers[s];
    std::vector<ResidualSpectrum> res(g.slot_rcv.size());
    for (std::size_t slot = 0; slot < res.size(); ++slot) {
      res[slot].pos = pb.survey.receivers[g.slot_rcv[slot]];
      res[slot].comp = g.slot_comp[slot];
      res[slot].values.assign(nf, 0.0);
    }
    bool any = false;
    for (std::size_t i = 0; i < pb.observed.size(); ++i) {
      const Datum& d = pb.observed[i];
      if (d.src != s || d.weight == 0.0) continue;
      const cplx q = d.weight * d.weight * (d.value - ev.synthetic[i]);
      res[g.slot_of(d.rcv, d.comp)].values[d.freq] += std::conj(q);
      any = any || q != 0.0;
    }
    const Dims in = pb.grid.interior_dims();
    if (!any) {
      per[s].h.assign(in.size(), 0.0);
      per[s].v.assign(in.size(), 0.0);
      return;
    }
    if (ev.forward[s].volumes.e.size() != nf) throw Error("missing_volumes", "forward volumes were not kept");
    const auto series = synthesize_adjoint_sources(res, pb.basis);
    const VolumeSpectra adj = run_adjoint(series, ev.medium, pb.grid, pb.sim, pb.sim.nt_max);
    per[s] = assemble_gradient(pb.grid, ev.forward[s].volumes, adj, pb.survey.freqs, pb.sim.omega0, pb.sim.dt);
  });
  GradientVolume total;
  for (const auto& g : per) total.add(g);
  return total;
}

std::vector<double> logparam_gradient(const Grid3D& grid, const Evaluation& ev, const GradientVolume& gs) {
  const std::vector<double> sh = interior_values(grid, ev.medium.sigma_h);
  const std::vector<double> sv = interior_values(grid, ev.medium.sigma_v);
  const std::size_t n = sh.size();
  const ModelParam& p = ev.model;
  std::vector<double> g;
  if (p.mode == Anisotropy::Isotropic) {
    g = chain_rule_to_logparam(gs.iso(), sh);
  } else {
    g = chain_rule_to_logparam(gs.h, sh);
    const std::vector<double> gv = chain_rule_to_logparam(gs.v, sv);
    g.insert(g.end(), gv.begin(), gv.end());
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p.is_frozen(i % n)) g[i] = 0.0;
  }
  return g;
}

std::vector<double> data_gradient(const Problem& pb, const Evaluation& ev) {
  return logparam_gradient(pb.grid, ev, data_gradient_sigma(pb, ev));
}

ForwardData forward_dataset(const Grid3D& grid, const Survey& survey, const Dataset& data, const Medium& medium,
                            const SimConfig& cfg, int jobs) {
  ForwardData out;
  out.runs.resize(survey.sources.size());
  std::vector<Gather> gathers(survey.sources.size());
  for (std::size_t s = 0; s < gathers.size(); ++s) gathers[s] = gather_for_source(survey, data, s);
  parallel_for(gathers.size(), jobs, [&](std::size_t s) {
    if (gathers[s].specs.empty()) return;
    out.runs[s] = run_forward(survey.sources[s], gathers[s].specs, medium, grid, cfg);
  });
  out.values.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Datum& d = data[i];
    out.values[i] = out.runs[d.src].at(d.freq, gathers[d.src].slot_of(d.rcv, d.comp));
  }
  return out;
}

}  // namespace fwem
