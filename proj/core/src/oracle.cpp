#include "fwem/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fwem/error.hpp"

namespace fwem {

double skin_depth(double sigma, double mu, double freq_hz) {
  return std::sqrt(2.0 / (2.0 * std::numbers::pi * freq_hz * mu * sigma));
}

CVec3 analytic_whole_space_dipole(double sigma, double mu, double freq_hz, const Dipole& src, const Vec3& obs) {
  if (src.kind != SourceKind::Electric) throw Error("bad_source", "analytic solution covers electric dipoles");
  Vec3 rv{};
  double r2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    rv[a] = obs[a] - src.pos[a];
    r2 += rv[a] * rv[a];
  }
  if (r2 == 0.0) throw Error("coincident_points", "observation point coincides with the source");
  const double r = std::sqrt(r2);
  const double omega = 2.0 * std::numbers::pi * freq_hz;
  const cplx k = std::sqrt(cplx(0.0, omega * mu * sigma));
  const cplx ikr = cplx(0.0, 1.0) * k * r;
  const cplx kr2 = k * k * r2;
  const cplx pre = src.moment * std::exp(ikr) / (4.0 * std::numbers::pi * sigma * r2 * r);
  double rd = 0.0;
  for (int a = 0; a < 3; ++a) rd += rv[a] / r * src.orientation[a];
  CVec3 e{};
  for (int a = 0; a < 3; ++a) {
    e[a] = pre * ((kr2 + ikr - 1.0) * src.orientation[a] + (3.0 - 3.0 * ikr - kr2) * (rv[a] / r) * rd);
  }
  return e;
}


std::vector<double> fd_gradient(const MisfitFunction& misfit, const ModelParam& m, std::span<const std::size_t> params,
                                double delta) {
  if (!(delta > 0.0)) throw Error("bad_delta", "finite-difference step must be positive");
  const std::vector<double> base = m.packed();
  const std::size_t n = m.cells();
  std::vector<double> out(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t p = params[i];
    if (p >= base.size()) throw Error("bad_index", "parameter index out of range");
    if (m.is_frozen(p % n)) continue;
    ModelParam plus = m;
    ModelParam minus = m;
    std::vector<double> v = base;
    v[p] = base[p] + delta;
    plus.unpack(v);
    v[p] = base[p] - delta;
    minus.unpack(v);
    out[i] = (misfit(plus) - misfit(minus)) / (2.0 * delta);
  }
  return out;
}

std::size_t snapshot_bytes(const Grid3D& grid, int steps) {
  const Dims in = grid.interior_dims();
  const Dims vd{in.n1 + 1, in.n2 + 1, in.n3 + 1};
  return 3 * vd.size() * static_cast<std::size_t>(std::max(steps, 0)) * sizeof(double);
}

Snapshots record_snapshots(const Grid3D& grid, const Medium& medium, const SimConfig& cfg,
                           std::vector<TimedInjection> sources, int nt, std::size_t budget) {
  if (snapshot_bytes(grid, nt) > budget) {
    throw Error("snapshot_budget", "storing " + std::to_string(nt) + " snapshots needs " +
                                       std::to_string(snapshot_bytes(grid, nt) >> 20) + " MiB, budget is " +
                                       std::to_string(budget >> 20) + " MiB");
  }
  const Dims in = grid.interior_dims();
  const int np = grid.npml();
  Snapshots snap;
  snap.dims = {in.n1 + 1, in.n2 + 1, in.n3 + 1};
  snap.steps = nt;
  for (auto& e : snap.e) e.assign(snap.dims.size() * static_cast<std::size_t>(nt), 0.0);
  const Dims nd = grid.node_dims();
  const Dims vd = snap.dims;

  SimulationRequest req;
  req.sources = std::move(sources);
  req.nt = nt;
  req.steady_check = false;
  req.on_step = [&](int n, const FdtdEngine& engine) {
    const FieldState& st = engine.state();
    const std::array<const Array3<double>*, 3> e{&st.ex, &st.ey, &st.ez};
    for (int c = 0; c < 3; ++c) {
      double* dst = snap.e[c].data() + static_cast<std::size_t>(n) * vd.size();
      for (int k = 0; k < vd.n3; ++k)
        for (int j = 0; j < vd.n2; ++j)
          for (int i = 0; i < vd.n1; ++i) dst[vd.index(i, j, k)] = e[c]->data()[nd.index(i + np, j + np, k + np)];
    }
  };
  (void)simulate(grid, medium, cfg, req);
  return snap;
}

GradientVolume timedomain_gradient(const Grid3D& grid, const Snapshots& forward, const Snapshots& adjoint, double dt,
                                   double omega0) {
  if (!(forward.dims == adjoint.dims) || forward.steps != adjoint.steps) {
    throw Error("shape_mismatch", "forward and adjoint snapshots differ in shape");
  }
  const Dims in = grid.interior_dims();
  const Dims vd{in.n1 + 1, in.n2 + 1, in.n3 + 1};
  if (!(forward.dims == vd)) throw Error("shape_mismatch", "snapshots do not match the grid");
  const int nt = forward.steps;
  const int np = grid.npml();
  std::array<Array3<double>, 3> edges{Array3<double>(vd), Array3<double>(vd), Array3<double>(vd)};
  for (int c = 0; c < 3; ++c) {
    std::vector<double> acc(vd.size(), 0.0);
    for (int m = 0; m < nt; ++m) {
      const double* e1 = forward.at(c, m);
      const double* e0 = m > 0 ? forward.at(c, m - 1) : nullptr;
      const double* lam = adjoint.at(c, nt - m - 1);
      for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += (e1[p] - (e0 ? e0[p] : 0.0)) * lam[p];
    }
    for (int k = 0; k < vd.n3; ++k)
      for (int j = 0; j < vd.n2; ++j)
        for (int i = 0; i < vd.n1; ++i) {
          edges[c](i, j, k) =
              grid.sample_volume(kEComps[c], i + np, j + np, k + np) / (2.0 * omega0 * dt) * acc[vd.index(i, j, k)];
        }
  }
  return fold_edge_gradient(grid, edges);
}

std::vector<TimedInjection> reversed_adjoint_sources(const Problem& pb, const Evaluation& ev, std::size_t src) {
  const Gather& g = pb.gathers[src];
  const std::size_t nf = pb.survey.freqs.size();
  const FreqFieldSet& fwd = ev.forward[src];
  if (fwd.source_spectrum.size() != nf) throw Error("missing_forward", "no forward run for this source");
  const bool electric_src = pb.survey.sources[src].kind == SourceKind::Electric;

  // Scale between raw accumulations and data, as applied by run_forward.
  std::vector<cplx> ce(nf), ch(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    const cplx kappa = wave_factor(pb.survey.freqs[k], pb.sim.omega0);
    const cplx s = fwd.source_spectrum[k];
    ce[k] = electric_src ? kappa / s : 1.0 / s;
    ch[k] = electric_src ? 1.0 / s : 1.0 / (kappa * s);
  }
  std::vector<std::vector<cplx>> lambda(g.slot_rcv.size(), std::vector<cplx>(nf, 0.0));
  bool any = false;
  for (std::size_t i = 0; i < pb.observed.size(); ++i) {
    const Datum& d = pb.observed[i];
    if (d.src != src || d.weight == 0.0) continue;
    const cplx q = d.weight * d.weight * (d.value - ev.synthetic[i]);
    lambda[g.slot_of(d.rcv, d.comp)][d.freq] += std::conj(q);
    any = any || q != 0.0;
  }
  std::vector<TimedInjection> out;
  if (!any) return out;

  const int nt = pb.sim.nt_max;
  const double dt = pb.sim.dt;
  for (std::size_t slot = 0; slot < lambda.size(); ++slot) {
    const Component comp = g.slot_comp[slot];
    const bool electric = is_electric(comp);
    // r(t) = -dt Re sum_k conj(q_k) c_k K_k(t) at the sampling times of the
    // component; E is sampled at (n + 1) dt and H at (n + 1/2) dt.
    auto r = [&](int n) {
      const double t = (n + (electric ? 1.0 : 0.5)) * dt;
      cplx s = 0.0;
      for (std::size_t k = 0; k < nf; ++k) {
        s += lambda[slot][k] * (electric ? ce[k] : ch[k]) * dtft_kernel(pb.survey.freqs[k], pb.sim.omega0, t);
      }
      return -dt * s.real();
    };
    TimedInjection ti;
    ti.pos = pb.survey.receivers[g.slot_rcv[slot]];
    ti.comp = comp;
    ti.series.assign(static_cast<std::size_t>(nt), 0.0);
    for (int j = 0; j < nt; ++j) {
      if (electric) {
        ti.series[j] = r(nt - 1 - j);
      } else if (j > 0) {
        ti.series[j] = r(nt - j);
      }
    }
    out.push_back(std::move(ti));
  }
  return out;
}

GradientVolume crosscorrelation_gradient(const Problem& pb, const Evaluation& ev, std::size_t budget) {
  const Dims in = pb.grid.interior_dims();
  const int nt = pb.sim.nt_max;
  if (2 * snapshot_bytes(pb.grid, nt) > budget) {
    throw Error("snapshot_budget", "forward and adjoint snapshots need " +
                                       std::to_string((2 * snapshot_bytes(pb.grid, nt)) >> 20) +
                                       " MiB, budget is " + std::to_string(budget >> 20) + " MiB");
  }
  GradientVolume total;
  total.h.assign(in.size(), 0.0);
  total.v.assign(in.size(), 0.0);
  for (std::size_t s = 0; s < pb.survey.sources.size(); ++s) {
    std::vector<TimedInjection> adj = reversed_adjoint_sources(pb, ev, s);
    if (adj.empty()) continue;
    const Snapshots fwd = record_snapshots(pb.grid, ev.medium, pb.sim, dipole_source(pb.survey.sources[s], pb.sim),
                                           nt, budget / 2);
    const Snapshots lam = record_snapshots(pb.grid, ev.medium, pb.sim, std::move(adj), nt, budget / 2);
    total.add(timedomain_gradient(pb.grid, fwd, lam, pb.sim.dt, pb.sim.omega0));
  }
  return total;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("shape_mismatch", "vectors differ in length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace fwem
