#include "fwem/fdtd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fwem/error.hpp"

namespace fwem {

double kernel_rate(double freq_hz, double omega0) {
  return std::sqrt(2.0 * std::numbers::pi * freq_hz * omega0);
}

cplx dtft_kernel(double freq_hz, double omega0, double t) {
  const double a = kernel_rate(freq_hz, omega0);
  return std::exp(cplx(-a * t, a * t));
}

cplx fictitious_omega(double freq_hz, double omega0) {
  const double a = kernel_rate(freq_hz, omega0);
  return {a, a};
}

cplx wave_factor(double freq_hz, double omega0) {
  const double omega = 2.0 * std::numbers::pi * freq_hz;
  return std::sqrt(cplx(0.0, -omega / (2.0 * omega0)));
}

cplx leapfrog_factor(double freq_hz, double omega0, double dt) {
  const cplx w = fictitious_omega(freq_hz, omega0);
  return 2.0 * std::sin(0.5 * w * dt) / (w * dt);
}

double Wavelet::operator()(double t) const {
  const double u = (t - t0) / tau;
  return -u * std::exp(-0.5 * u * u);
}

Wavelet Wavelet::for_frequencies(std::span<const double> freqs_hz, double omega0) {
  if (freqs_hz.empty()) throw Error("bad_config", "no frequencies given");
  double a_max = 0.0;
  for (double f : freqs_hz) {
    if (!(f > 0.0)) throw Error("bad_config", "frequencies must be positive");
    a_max = std::max(a_max, kernel_rate(f, omega0));
  }
  Wavelet w;
  w.tau = 1.0 / (2.0 * a_max);
  w.t0 = 4.0 * w.tau;
  return w;
}

double compute_time_step(const Grid3D& grid, const FictitiousPermittivity& eps, double mu, double cfl) {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw Error("bad_cfl", "cfl must lie in (0, 1]");
  const double e = eps.min_eps();
  if (!(e > 0.0) || !(mu > 0.0)) throw Error("bad_medium", "degenerate medium: eps_min <= 0");
  const double c_max = 1.0 / std::sqrt(mu * e);
  return cfl * grid.min_spacing() / (c_max * std::sqrt(3.0));
}

int steps_for_decay(std::span<const double> freqs_hz, double omega0, double dt, double efolds) {
  if (freqs_hz.empty() || !(dt > 0.0)) throw Error("bad_config", "need frequencies and dt > 0");
  double a_min = kernel_rate(freqs_hz.front(), omega0);
  for (double f : freqs_hz) a_min = std::min(a_min, kernel_rate(f, omega0));
  return static_cast<int>(std::ceil(efolds / (a_min * dt)));
}

double max_wave_speed(const Medium& medium, double omega0) {
  return 1.0 / std::sqrt(medium.mu * medium.min_sigma() / (2.0 * omega0));
}

EdgeStencil edge_stencil(const Grid3D& grid, Component c, int i, int j, int k) {
  if (!is_electric(c)) throw Error("bad_component", "edge stencils exist for E components only");
  const int axis = component_axis(c);
  const std::array<int, 3> idx{i, j, k};
  std::array<std::array<int, 2>, 3> cand{};
  std::array<int, 3> count{};
  for (int a = 0; a < 3; ++a) {
    const int n = grid.cells(a);
    if (a == axis) {
      cand[a] = {idx[a], idx[a]};
      count[a] = 1;
      continue;
    }
    const int lo = std::max(idx[a] - 1, 0);
    const int hi = std::min(idx[a], n - 1);
    cand[a] = {lo, hi};
    count[a] = hi > lo ? 2 : 1;
  }
  const Dims cd = grid.cell_dims();
  EdgeStencil st;
  double total = 0.0;
  for (int c3 = 0; c3 < count[2]; ++c3) {
    for (int c2 = 0; c2 < count[1]; ++c2) {
      for (int c1 = 0; c1 < count[0]; ++c1) {
        const std::array<int, 3> cell{cand[0][c1], cand[1][c2], cand[2][c3]};
        double w = 1.0;
        for (int a = 0; a < 3; ++a) {
          if (a != axis) w *= grid.spacing(a, cell[a]);
        }
        st.cell[st.count] = cd.index(cell[0], cell[1], cell[2]);
        st.weight[st.count] = w;
        total += w;
        ++st.count;
      }
    }
  }
  for (int n = 0; n < st.count; ++n) st.weight[n] /= total;
  return st;
}

Array3<double>& FieldState::field(Component c) {
  switch (c) {
    case Component::Ex: return ex;
    case Component::Ey: return ey;
    case Component::Ez: return ez;
    case Component::Hx: return hx;
    case Component::Hy: return hy;
    case Component::Hz: return hz;
  }
  return ex;
}

const Array3<double>& FieldState::field(Component c) const {
  return const_cast<FieldState*>(this)->field(c);
}

bool FieldState::all_finite() const {
  for (const auto* f : {&ex, &ey, &ez, &hx, &hy, &hz}) {
    for (double v : f->flat()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace {

struct Box {
  std::array<int, 3> lo;
  std::array<int, 3> hi;  // exclusive
};

// Applies one CPML convolution term on the PML part of `box`:
//   psi = b psi + a * D,   f += sign * coef * psi,
// where D = (src[p + op] - src[p + om]) * inv[l] and l is the index along
// `Axis`. `coef` is a per-sample array when kVar, else the scalar `cs`.
template <int Axis, bool kVar>
void pml_slab(double* f, const double* coef, double cs, double* psi, const double* src, std::ptrdiff_t op,
              std::ptrdiff_t om, const Box& sub, const double* inv, const double* b, const double* a,
              double sign, const Dims& nd) {
  for (int k = sub.lo[2]; k < sub.hi[2]; ++k) {
    for (int j = sub.lo[1]; j < sub.hi[1]; ++j) {
      const std::size_t base = nd.index(0, j, k);
      if constexpr (Axis == 0) {
        for (int i = sub.lo[0]; i < sub.hi[0]; ++i) {
          const std::size_t p = base + static_cast<std::size_t>(i);
          psi[p] = b[i] * psi[p] + a[i] * ((src[p + op] - src[p + om]) * inv[i]);
          f[p] += sign * (kVar ? coef[p] : cs) * psi[p];
        }
      } else {
        const int l = Axis == 1 ? j : k;
        const double bl = b[l], al = a[l] * inv[l];
        for (int i = sub.lo[0]; i < sub.hi[0]; ++i) {
          const std::size_t p = base + static_cast<std::size_t>(i);
          psi[p] = bl * psi[p] + al * (src[p + op] - src[p + om]);
          f[p] += sign * (kVar ? coef[p] : cs) * psi[p];
        }
      }
    }
  }
}

template <bool kVar>
void pml_term(double* f, const double* coef, double cs, double* psi, const double* src,
              std::ptrdiff_t op, std::ptrdiff_t om, int axis, const Box& box, int ext_lo, int ext_hi,
              const std::vector<double>& inv, const std::vector<double>& b, const std::vector<double>& a,
              double sign, const Dims& nd) {
  const std::array<std::pair<int, int>, 2> parts{
      std::pair{box.lo[axis], std::min(box.hi[axis], ext_lo)},
      std::pair{std::max(box.lo[axis], ext_hi), box.hi[axis]}};
  for (const auto& [plo, phi] : parts) {
    if (plo >= phi) continue;
    Box sub = box;
    sub.lo[axis] = plo;
    sub.hi[axis] = phi;
    switch (axis) {
      case 0: pml_slab<0, kVar>(f, coef, cs, psi, src, op, om, sub, inv.data(), b.data(), a.data(), sign, nd); break;
      case 1: pml_slab<1, kVar>(f, coef, cs, psi, src, op, om, sub, inv.data(), b.data(), a.data(), sign, nd); break;
      default: pml_slab<2, kVar>(f, coef, cs, psi, src, op, om, sub, inv.data(), b.data(), a.data(), sign, nd); break;
    }
  }
}

}  // namespace

FdtdEngine::FdtdEngine(const Grid3D& grid, const Medium& medium, const SimConfig& cfg)
    : grid_(&grid), nd_(grid.node_dims()) {
  medium.validate();
  if (!(medium.dims == grid.cell_dims())) throw Error("shape_mismatch", "medium does not match grid");
  if (!(cfg.omega0 > 0.0)) throw Error("bad_omega0", "omega0 must be positive");
  const FictitiousPermittivity eps = sigma_to_epsilon(medium, cfg.omega0);
  const double dt_max = compute_time_step(grid, eps, medium.mu, 1.0);
  dt_ = cfg.dt > 0.0 ? cfg.dt : compute_time_step(grid, eps, medium.mu, cfg.cfl);
  if (dt_ > dt_max * (1.0 + 1e-12)) {
    throw Error("unstable_dt", "dt " + std::to_string(dt_) + " exceeds the stability bound " +
                                   std::to_string(dt_max));
  }
  mu_ = medium.mu;
  ch_ = dt_ / medium.mu;

  state_.ex = state_.ey = state_.ez = Array3<double>(nd_);
  state_.hx = state_.hy = state_.hz = Array3<double>(nd_);

  const std::array<int, 3> n{grid.cells(0), grid.cells(1), grid.cells(2)};
  cex_ = cey_ = cez_ = Array3<double>(nd_);
  for (int c = 0; c < 3; ++c) {
    Array3<double>& ce = c == 0 ? cex_ : (c == 1 ? cey_ : cez_);
    const std::vector<double>& sig = c == 2 ? medium.sigma_v : medium.sigma_h;
    for (int k = 0; k <= n[2]; ++k) {
      for (int j = 0; j <= n[1]; ++j) {
        for (int i = 0; i <= n[0]; ++i) {
          const std::array<int, 3> idx{i, j, k};
          bool inside = idx[c] < n[c];
          for (int a = 0; a < 3; ++a) {
            if (a != c && (idx[a] == 0 || idx[a] == n[a])) inside = false;
          }
          if (!inside) continue;
          const EdgeStencil st = edge_stencil(grid, kEComps[c], i, j, k);
          double s = 0.0;
          for (int m = 0; m < st.count; ++m) s += st.weight[m] * sig[st.cell[m]];
          ce(i, j, k) = dt_ / (s / (2.0 * cfg.omega0));
        }
      }
    }
  }

  pml_ = grid.absorbing() && grid.npml() > 0;
  const double speed = cfg.pml_speed > 0.0 ? cfg.pml_speed : max_wave_speed(medium, cfg.omega0);
  for (int a = 0; a < 3; ++a) {
    Axis& ax = axis_[a];
    const int na = n[a];
    ax.inv_d.resize(na);
    ax.inv_dd.resize(na + 1);
    for (int i = 0; i < na; ++i) ax.inv_d[i] = 1.0 / grid.spacing(a, i);
    for (int i = 0; i <= na; ++i) ax.inv_dd[i] = 1.0 / grid.dual_spacing(a, i);
    ax.b_node.assign(na + 1, 1.0);
    ax.a_node.assign(na + 1, 0.0);
    ax.b_cell.assign(na, 1.0);
    ax.a_cell.assign(na, 0.0);
    const int np = grid.npml();
    const int ni = grid.interior_cells(a);
    ax.lo_node = ax.lo_cell = 0;
    ax.hi_node = na + 1;
    ax.hi_cell = na;
    if (!pml_) continue;
    ax.lo_node = np;
    ax.hi_node = np + ni + 1;
    ax.lo_cell = np;
    ax.hi_cell = np + ni;
    const double x_lo = grid.node(a, np);
    const double x_hi = grid.node(a, np + ni);
    const double len_lo = x_lo - grid.node(a, 0);
    const double len_hi = grid.node(a, na) - x_hi;
    const PmlSettings& ps = cfg.pml;
    auto coeffs = [&](double x, double& b, double& acoef) {
      double dist = 0.0;
      double len = 1.0;
      if (x < x_lo) {
        dist = x_lo - x;
        len = len_lo;
      } else if (x > x_hi) {
        dist = x - x_hi;
        len = len_hi;
      } else {
        return;
      }
      const double r = std::clamp(dist / len, 0.0, 1.0);
      const double d0 = -(ps.order + 1) * speed * std::log(ps.reflection) / (2.0 * len);
      const double d = d0 * std::pow(r, ps.order);
      const double alpha = ps.alpha_max * (1.0 - r);
      b = std::exp(-(d + alpha) * dt_);
      acoef = d + alpha > 0.0 ? d / (d + alpha) * (b - 1.0) : 0.0;
    };
    for (int i = 0; i <= na; ++i) coeffs(grid.node(a, i), ax.b_node[i], ax.a_node[i]);
    for (int i = 0; i < na; ++i) coeffs(grid.center(a, i), ax.b_cell[i], ax.a_cell[i]);
  }
  if (pml_) {
    for (auto& comp : state_.psi) {
      for (auto& p : comp) p = Array3<double>(nd_);
    }
  }
}

const Array3<double>& FdtdEngine::edge_coefficient(Component c) const {
  switch (c) {
    case Component::Ex: return cex_;
    case Component::Ey: return cey_;
    case Component::Ez: return cez_;
    default: throw Error("bad_component", "edge coefficients exist for E components only");
  }
}

PointInjection FdtdEngine::make_injection(const Vec3& pos, Component c) const {
  const StaggerWeights sw = stagger_weights(*grid_, pos, c);
  PointInjection inj;
  inj.comp = c;
  const Array3<double>* ce = is_electric(c) ? &edge_coefficient(c) : nullptr;
  for (int m = 0; m < 8; ++m) {
    const std::size_t p = sw.index[m];
    const int i = static_cast<int>(p % static_cast<std::size_t>(nd_.n1));
    const int j = static_cast<int>((p / static_cast<std::size_t>(nd_.n1)) % static_cast<std::size_t>(nd_.n2));
    const int k = static_cast<int>(p / (static_cast<std::size_t>(nd_.n1) * static_cast<std::size_t>(nd_.n2)));
    const double dv = grid_->sample_volume(c, i, j, k);
    inj.index[m] = p;
    inj.coef[m] = sw.weight[m] / dv * (ce ? (*ce)[p] : ch_);
  }
  return inj;
}

void FdtdEngine::inject(const PointInjection& inj, double amplitude) {
  Array3<double>& f = state_.field(inj.comp);
  const double sign = is_electric(inj.comp) ? -1.0 : 1.0;
  for (int m = 0; m < 8; ++m) f[inj.index[m]] += sign * inj.coef[m] * amplitude;
}

void FdtdEngine::update_h() {
  const int n1 = grid_->cells(0), n2 = grid_->cells(1), n3 = grid_->cells(2);
  const std::ptrdiff_t s2 = nd_.n1;
  const std::ptrdiff_t s3 = static_cast<std::ptrdiff_t>(nd_.n1) * nd_.n2;
  double* hx = state_.hx.data();
  double* hy = state_.hy.data();
  double* hz = state_.hz.data();
  const double* ex = state_.ex.data();
  const double* ey = state_.ey.data();
  const double* ez = state_.ez.data();
  const auto& ix = axis_[0].inv_d;
  const auto& iy = axis_[1].inv_d;
  const auto& iz = axis_[2].inv_d;
  const double ch = ch_;

  for (int k = 0; k < n3; ++k) {
    for (int j = 0; j < n2; ++j) {
      const std::size_t base = nd_.index(0, j, k);
      const double idy = iy[j], idz = iz[k];
      for (int i = 0; i <= n1; ++i) {
        const std::size_t p = base + i;
        hx[p] -= ch * ((ez[p + s2] - ez[p]) * idy - (ey[p + s3] - ey[p]) * idz);
      }
    }
  }
  for (int k = 0; k < n3; ++k) {
    for (int j = 0; j <= n2; ++j) {
      const std::size_t base = nd_.index(0, j, k);
      const double idz = iz[k];
      for (int i = 0; i < n1; ++i) {
        const std::size_t p = base + i;
        hy[p] -= ch * ((ex[p + s3] - ex[p]) * idz - (ez[p + 1] - ez[p]) * ix[i]);
      }
    }
  }
  for (int k = 0; k <= n3; ++k) {
    for (int j = 0; j < n2; ++j) {
      const std::size_t base = nd_.index(0, j, k);
      const double idy = iy[j];
      for (int i = 0; i < n1; ++i) {
        const std::size_t p = base + i;
        hz[p] -= ch * ((ey[p + 1] - ey[p]) * ix[i] - (ex[p + s2] - ex[p]) * idy);
      }
    }
  }
  if (!pml_) return;

  auto term = [&](double* f, int comp, int axis, const double* src, std::ptrdiff_t stride, const Box& box,
                  double sign) {
    const Axis& ax = axis_[axis];
    pml_term<false>(f, nullptr, ch, state_.psi[comp][axis].data(), src, stride, 0, axis, box, ax.lo_cell,
             ax.hi_cell, ax.inv_d, ax.b_cell, ax.a_cell, sign, nd_);
  };
  const Box bx{{0, 0, 0}, {n1 + 1, n2, n3}};
  const Box by{{0, 0, 0}, {n1, n2 + 1, n3}};
  const Box bz{{0, 0, 0}, {n1, n2, n3 + 1}};
  term(hx, 3, 1, ez, s2, bx, -1.0);
  term(hx, 3, 2, ey, s3, bx, +1.0);
  term(hy, 4, 2, ex, s3, by, -1.0);
  term(hy, 4, 0, ez, 1, by, +1.0);
  term(hz, 5, 0, ey, 1, bz, -1.0);
  term(hz, 5, 1, ex, s2, bz, +1.0);
}

void FdtdEngine::update_e() {
  const int n1 = grid_->cells(0), n2 = grid_->cells(1), n3 = grid_->cells(2);
  const std::ptrdiff_t s2 = nd_.n1;
  const std::ptrdiff_t s3 = static_cast<std::ptrdiff_t>(nd_.n1) * nd_.n2;
  double* ex = state_.ex.data();
  double* ey = state_.ey.data();
  double* ez = state_.ez.data();
  const double* hx = state_.hx.data();
  const double* hy = state_.hy.data();
  const double* hz = state_.hz.data();
  const double* cx = cex_.data();
  const double* cy = cey_.data();
  const double* cz = cez_.data();
  const auto& ix = axis_[0].inv_dd;
  const auto& iy = axis_[1].inv_dd;
  const auto& iz = axis_[2].inv_dd;

  for (int k = 1; k < n3; ++k) {
    for (int j = 1; j < n2; ++j) {
      const std::size_t base = nd_.index(0, j, k);
      const double idy = iy[j], idz = iz[k];
      for (int i = 0; i < n1; ++i) {
        const std::size_t p = base + i;
        ex[p] += cx[p] * ((hz[p] - hz[p - s2]) * idy - (hy[p] - hy[p - s3]) * idz);
      }
    }
  }
  for (int k = 1; k < n3; ++k) {
    for (int j = 0; j < n2; ++j) {
      const std::size_t base = nd_.index(0, j, k);
      const double idz = iz[k];
      for (int i = 1; i < n1; ++i) {
        const std::size_t p = base + i;
        ey[p] += cy[p] * ((hx[p] - hx[p - s3]) * idz - (hz[p] - hz[p - 1]) * ix[i]);
      }
    }
  }
  for (int k = 0; k < n3; ++k) {
    for (int j = 1; j < n2; ++j) {
      const std::size_t base = nd_.index(0, j, k);
      const double idy = iy[j];
      for (int i = 1; i < n1; ++i) {
        const std::size_t p = base + i;
        ez[p] += cz[p] * ((hy[p] - hy[p - 1]) * ix[i] - (hx[p] - hx[p - s2]) * idy);
      }
    }
  }
  if (!pml_) return;

  auto term = [&](double* f, const double* coef, int comp, int axis, const double* src,
                  std::ptrdiff_t stride, const Box& box, double sign) {
    const Axis& ax = axis_[axis];
    pml_term<true>(f, coef, 0.0, state_.psi[comp][axis].data(), src, 0, -stride, axis, box, ax.lo_node,
             ax.hi_node, ax.inv_dd, ax.b_node, ax.a_node, sign, nd_);
  };
  const Box bx{{0, 1, 1}, {n1, n2, n3}};
  const Box by{{1, 0, 1}, {n1, n2, n3}};
  const Box bz{{1, 1, 0}, {n1, n2, n3}};
  term(ex, cx, 0, 1, hz, s2, bx, +1.0);
  term(ex, cx, 0, 2, hy, s3, bx, -1.0);
  term(ey, cy, 1, 2, hx, s3, by, +1.0);
  term(ey, cy, 1, 0, hz, 1, by, -1.0);
  term(ez, cz, 2, 0, hy, 1, bz, +1.0);
  term(ez, cz, 2, 1, hx, s2, bz, -1.0);
}

void FdtdEngine::set_sources(std::vector<TimedInjection> sources) {
  points_.clear();
  for (const auto& s : sources) points_.push_back(make_injection(s.pos, s.comp));
  sources_ = std::move(sources);
}

void FdtdEngine::inject_magnetic(int n) {
  for (std::size_t m = 0; m < sources_.size(); ++m) {
    const auto& s = sources_[m];
    if (!is_electric(s.comp) && n < static_cast<int>(s.series.size())) inject(points_[m], s.series[n]);
  }
}

void FdtdEngine::inject_electric(int n) {
  for (std::size_t m = 0; m < sources_.size(); ++m) {
    const auto& s = sources_[m];
    if (is_electric(s.comp) && n < static_cast<int>(s.series.size())) inject(points_[m], s.series[n]);
  }
}

void FdtdEngine::step(int n) {
  update_h();
  inject_magnetic(n);
  update_e();
  inject_electric(n);
}

double FdtdEngine::sample(const StaggerWeights& sw, Component c) const {
  const Array3<double>& f = state_.field(c);
  double v = 0.0;
  for (int m = 0; m < 8; ++m) v += sw.weight[m] * f[sw.index[m]];
  return v;
}

double FdtdEngine::energy() const {
  double e = 0.0;
  for (int k = 0; k < nd_.n3; ++k) {
    for (int j = 0; j < nd_.n2; ++j) {
      for (int i = 0; i < nd_.n1; ++i) {
        const std::size_t p = nd_.index(i, j, k);
        for (int c = 0; c < 3; ++c) {
          const Array3<double>& ce = c == 0 ? cex_ : (c == 1 ? cey_ : cez_);
          if (ce[p] > 0.0) {
            const double v = state_.field(kEComps[c])[p];
            e += 0.5 * (dt_ / ce[p]) * v * v * grid_->sample_volume(kEComps[c], i, j, k);
          }
        }
        const std::array<int, 3> idx{i, j, k};
        for (int c = 0; c < 3; ++c) {
          bool valid = true;
          for (int a = 0; a < 3; ++a) {
            if (a != c && idx[a] >= grid_->cells(a)) valid = false;
          }
          if (!valid) continue;
          const double v = state_.field(kHComps[c])[p];
          e += 0.5 * mu_ * v * v * grid_->sample_volume(kHComps[c], i, j, k);
        }
      }
    }
  }
  return e;
}

void inject_dipole(FdtdEngine& engine, const Dipole& src, double wavelet_value) {
  for (int a = 0; a < 3; ++a) {
    if (src.orientation[a] == 0.0) continue;
    const Component c = src.kind == SourceKind::Electric ? kEComps[a] : kHComps[a];
    engine.inject(engine.make_injection(src.pos, c), src.moment * src.orientation[a] * wavelet_value);
  }
}

DtftAccumulator::DtftAccumulator(std::vector<double> freqs_hz, double omega0, std::size_t samples)
    : freqs_(std::move(freqs_hz)), omega0_(omega0), samples_(samples), acc_(freqs_.size() * samples) {}

void DtftAccumulator::accumulate(std::span<const double> values, double t, double dt) {
  if (values.size() != samples_) throw Error("shape_mismatch", "accumulator sample count mismatch");
  for (std::size_t k = 0; k < freqs_.size(); ++k) {
    const cplx w = dt * dtft_kernel(freqs_[k], omega0_, t);
    cplx* row = acc_.data() + k * samples_;
    for (std::size_t s = 0; s < samples_; ++s) row[s] += values[s] * w;
  }
}

bool check_steady_state(std::span<const cplx> previous, std::span<const cplx> current, double tol) {
  if (previous.size() != current.size() || current.empty()) return false;
  double peak = 0.0;
  for (const cplx& v : current) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) return false;
  // Samples far below the strongest one (e.g. nulls of the radiation pattern)
  // are judged against a small floor instead of their own magnitude.
  const double floor = 1e-6 * peak;
  for (std::size_t s = 0; s < current.size(); ++s) {
    const double ref = std::max(std::abs(current[s]), floor);
    if (std::abs(current[s] - previous[s]) >= tol * ref) return false;
  }
  return true;
}

SimulationOutput simulate(const Grid3D& grid, const Medium& medium, const SimConfig& cfg,
                          const SimulationRequest& req) {
  if (cfg.freqs.empty()) throw Error("bad_config", "no frequencies given");
  if (req.nt <= 0) throw Error("bad_config", "number of time steps must be positive");
  if (!(cfg.steady_tol > 0.0)) throw Error("bad_config", "steady_tol must be positive");
  FdtdEngine engine(grid, medium, cfg);
  engine.set_sources(req.sources);
  const double dt = engine.dt();

  struct Probe {
    StaggerWeights sw;
    Component comp;
    std::size_t slot;
  };
  std::vector<Probe> e_probes, h_probes;
  std::size_t slots = 0;
  for (const auto& r : req.receivers) {
    for (Component c : r.comps) {
      Probe pr{stagger_weights(grid, r.pos, c), c, slots++};
      (is_electric(c) ? e_probes : h_probes).push_back(pr);
    }
  }
  DtftAccumulator acc_e(cfg.freqs, cfg.omega0, e_probes.size());
  DtftAccumulator acc_h(cfg.freqs, cfg.omega0, h_probes.size());
  std::vector<double> ve(e_probes.size()), vh(h_probes.size());

  SimulationOutput out;
  out.slots = slots;
  const std::size_t nf = cfg.freqs.size();
  if (req.traces) out.traces.assign(slots, {});

  const int np = grid.npml();
  const Dims in = grid.interior_dims();
  const Dims vd{in.n1 + 1, in.n2 + 1, in.n3 + 1};
  if (req.volumes) {
    out.volumes.e.resize(nf);
    for (auto& f : out.volumes.e) {
      for (auto& a : f) a = Array3<cplx>(vd);
    }
  }
  const Dims nd = grid.node_dims();
  const std::array<const Array3<double>*, 3> efield{&engine.state().ex, &engine.state().ey,
                                                    &engine.state().ez};

  auto gather = [&](const std::vector<Probe>& probes, std::vector<double>& v) {
    for (std::size_t s = 0; s < probes.size(); ++s) v[s] = engine.sample(probes[s].sw, probes[s].comp);
  };
  auto merged = [&]() {
    std::vector<cplx> all(nf * slots);
    for (std::size_t k = 0; k < nf; ++k) {
      for (std::size_t s = 0; s < e_probes.size(); ++s) all[k * slots + e_probes[s].slot] = acc_e.value(k, s);
      for (std::size_t s = 0; s < h_probes.size(); ++s) all[k * slots + h_probes[s].slot] = acc_h.value(k, s);
    }
    return all;
  };

  std::vector<cplx> previous;
  int n = 0;
  for (; n < req.nt; ++n) {
    engine.update_h();
    engine.inject_magnetic(n);
    if (!h_probes.empty()) {
      gather(h_probes, vh);
      acc_h.accumulate(vh, (n + 0.5) * dt, dt);
    }
    engine.update_e();
    engine.inject_electric(n);
    const double te = (n + 1) * dt;
    if (!e_probes.empty()) {
      gather(e_probes, ve);
      acc_e.accumulate(ve, te, dt);
    }
    if (req.traces) {
      for (std::size_t s = 0; s < e_probes.size(); ++s) out.traces[e_probes[s].slot].push_back(ve[s]);
      for (std::size_t s = 0; s < h_probes.size(); ++s) out.traces[h_probes[s].slot].push_back(vh[s]);
    }
    if (req.volumes) {
      for (std::size_t f = 0; f < nf; ++f) {
        const cplx w = dt * dtft_kernel(cfg.freqs[f], cfg.omega0, te);
        for (int c = 0; c < 3; ++c) {
          const double* src = efield[c]->data();
          cplx* dst = out.volumes.e[f][c].data();
          for (int k = 0; k < vd.n3; ++k) {
            for (int j = 0; j < vd.n2; ++j) {
              const double* s = src + nd.index(np, j + np, k + np);
              cplx* d = dst + vd.index(0, j, k);
              for (int i = 0; i < vd.n1; ++i) d[i] += s[i] * w;
            }
          }
        }
      }
    }
    if (cfg.check_finite && !engine.state().all_finite()) {
      throw Error("non_finite", "non-finite field value at step " + std::to_string(n));
    }
    if (req.on_step) req.on_step(n, engine);
    if (req.steady_check && (n + 1) % cfg.check_every == 0 && n + 1 >= req.min_steps) {
      std::vector<cplx> current = merged();
      if (!previous.empty() && check_steady_state(previous, current, cfg.steady_tol)) {
        out.converged = true;
        ++n;
        break;
      }
      previous = std::move(current);
    }
  }
  out.steps = n;
  out.receiver = merged();
  return out;
}

namespace {

std::vector<double> wavelet_series(const Wavelet& wl, double dt, bool electric) {
  const int nw = static_cast<int>(std::ceil(wl.duration() / dt)) + 1;
  std::vector<double> wave(nw);
  for (int n = 0; n < nw; ++n) wave[n] = wl((n + (electric ? 0.5 : 0.0)) * dt);
  return wave;
}

std::vector<TimedInjection> dipole_injections(const Dipole& src, const std::vector<double>& wave) {
  std::vector<TimedInjection> out;
  for (int a = 0; a < 3; ++a) {
    if (src.orientation[a] == 0.0) continue;
    TimedInjection ti;
    ti.pos = src.pos;
    ti.comp = src.kind == SourceKind::Electric ? kEComps[a] : kHComps[a];
    ti.series.resize(wave.size());
    const double scale = src.moment * src.orientation[a];
    for (std::size_t n = 0; n < wave.size(); ++n) ti.series[n] = scale * wave[n];
    out.push_back(std::move(ti));
  }
  return out;
}

}  // namespace

std::vector<TimedInjection> dipole_source(const Dipole& src, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw Error("bad_config", "time step not set");
  return dipole_injections(src, wavelet_series(cfg.wavelet, cfg.dt, src.kind == SourceKind::Electric));
}

FreqFieldSet run_forward(const Dipole& src, const std::vector<ReceiverSpec>& receivers, const Medium& medium,
                         const Grid3D& grid, const SimConfig& cfg_in) {
  if (!grid.inside_interior(src.pos)) throw Error("outside_interior", "source is outside the interior region");
  if (cfg_in.nt_max <= 0) throw Error("bad_config", "nt_max must be positive");
  SimConfig cfg = cfg_in;
  if (!(cfg.dt > 0.0)) {
    cfg.dt = compute_time_step(grid, sigma_to_epsilon(medium, cfg.omega0), medium.mu, cfg.cfl);
  }
  const double dt = cfg.dt;
  const bool electric = src.kind == SourceKind::Electric;
  const std::vector<double> wave = wavelet_series(cfg.wavelet, dt, electric);
  const int nw = static_cast<int>(wave.size());

  SimulationRequest req;
  req.sources = dipole_injections(src, wave);
  req.receivers = receivers;
  req.nt = cfg.nt_max;
  req.min_steps = nw;
  req.steady_check = cfg.steady_check;
  req.volumes = cfg.store_volumes;
  req.traces = cfg.record_traces;
  SimulationOutput raw = simulate(grid, medium, cfg, req);

  FreqFieldSet out;
  out.freqs = cfg.freqs;
  out.slots = raw.slots;
  out.steps = raw.steps;
  out.converged = raw.converged;
  out.traces = std::move(raw.traces);
  const std::size_t nf = cfg.freqs.size();
  out.source_spectrum.resize(nf);
  std::vector<cplx> e_scale(nf), h_scale(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    cplx s = 0.0;
    for (int n = 0; n < nw; ++n) {
      s += wave[n] * (dt * dtft_kernel(cfg.freqs[k], cfg.omega0, (n + (electric ? 0.5 : 0.0)) * dt));
    }
    out.source_spectrum[k] = s;
    const cplx kappa = wave_factor(cfg.freqs[k], cfg.omega0);
    e_scale[k] = electric ? kappa / s : 1.0 / s;
    h_scale[k] = electric ? 1.0 / s : 1.0 / (kappa * s);
  }
  std::vector<bool> slot_electric;
  for (const auto& r : receivers) {
    for (Component c : r.comps) slot_electric.push_back(is_electric(c));
  }
  out.receiver = std::move(raw.receiver);
  for (std::size_t k = 0; k < nf; ++k) {
    for (std::size_t s = 0; s < out.slots; ++s) {
      out.receiver[k * out.slots + s] *= slot_electric[s] ? e_scale[k] : h_scale[k];
    }
  }
  out.volumes = std::move(raw.volumes);
  for (std::size_t k = 0; k < out.volumes.e.size(); ++k) {
    for (auto& a : out.volumes.e[k]) {
      for (cplx& v : a.flat()) v *= e_scale[k];
    }
  }
  return out;
}

}  // namespace fwem
