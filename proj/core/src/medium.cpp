#include "fwem/medium.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fwem/error.hpp"

namespace fwem {

Medium Medium::homogeneous(const Grid3D& grid, double sigma) {
  Medium m;
  m.dims = grid.cell_dims();
  m.sigma_h.assign(m.dims.size(), sigma);
  m.sigma_v = m.sigma_h;
  m.validate();
  return m;
}

void Medium::validate() const {
  if (sigma_h.size() != dims.size() || sigma_v.size() != dims.size()) {
    throw Error("bad_medium", "conductivity arrays do not match the grid");
  }
  auto bad = [](double s) { return !(s > 0.0) || !std::isfinite(s); };
  if (std::any_of(sigma_h.begin(), sigma_h.end(), bad) ||
      std::any_of(sigma_v.begin(), sigma_v.end(), bad)) {
    throw Error("bad_medium", "conductivity must be positive and finite");
  }
  if (mode == Anisotropy::Isotropic && sigma_h != sigma_v) {
    throw Error("bad_medium", "isotropic medium with distinct horizontal/vertical conductivity");
  }
  if (!(mu > 0.0)) throw Error("bad_medium", "permeability must be positive");
}

double Medium::min_sigma() const {
  return std::min(*std::min_element(sigma_h.begin(), sigma_h.end()),
                  *std::min_element(sigma_v.begin(), sigma_v.end()));
}

double FictitiousPermittivity::min_eps() const {
  return std::min(*std::min_element(eps_h.begin(), eps_h.end()),
                  *std::min_element(eps_v.begin(), eps_v.end()));
}

FictitiousPermittivity sigma_to_epsilon(const Medium& medium, double omega0) {
  if (!(omega0 > 0.0)) throw Error("bad_omega0", "omega0 must be positive");
  FictitiousPermittivity eps;
  eps.dims = medium.dims;
  eps.omega0 = omega0;
  const double scale = 1.0 / (2.0 * omega0);
  eps.eps_h.resize(medium.sigma_h.size());
  eps.eps_v.resize(medium.sigma_v.size());
  std::transform(medium.sigma_h.begin(), medium.sigma_h.end(), eps.eps_h.begin(),
                 [scale](double s) { return s * scale; });
  std::transform(medium.sigma_v.begin(), medium.sigma_v.end(), eps.eps_v.begin(),
                 [scale](double s) { return s * scale; });
  return eps;
}

std::vector<double> ModelParam::packed() const {
  std::vector<double> v = m_h;
  v.insert(v.end(), m_v.begin(), m_v.end());
  return v;
}

void ModelParam::unpack(std::span<const double> values) {
  const std::size_t n = cells();
  if (values.size() != n * classes()) throw Error("shape_mismatch", "parameter vector size mismatch");
  m_h.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n));
  if (mode == Anisotropy::VTI) m_v.assign(values.begin() + static_cast<std::ptrdiff_t>(n), values.end());
}

void ModelParam::project() {
  auto clamp = [this](double& m) { m = std::clamp(m, m_min, m_max); };
  std::for_each(m_h.begin(), m_h.end(), clamp);
  std::for_each(m_v.begin(), m_v.end(), clamp);
}

ModelParam make_param(Dims interior, std::span<const double> rho_h, std::span<const double> rho_v,
                      double m_min, double m_max) {
  if (rho_h.size() != interior.size()) throw Error("shape_mismatch", "model size does not match grid");
  if (!(m_min < m_max)) throw Error("bad_bounds", "m_min must be below m_max");
  ModelParam p;
  p.dims = interior;
  p.m_min = m_min;
  p.m_max = m_max;
  p.mode = rho_v.empty() ? Anisotropy::Isotropic : Anisotropy::VTI;
  auto to_log = [](std::span<const double> rho) {
    std::vector<double> m(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (!(rho[i] > 0.0)) throw Error("bad_medium", "resistivity must be positive");
      m[i] = std::log(rho[i]);
    }
    return m;
  };
  p.m_h = to_log(rho_h);
  if (p.mode == Anisotropy::VTI) {
    if (rho_v.size() != interior.size()) throw Error("shape_mismatch", "model size does not match grid");
    p.m_v = to_log(rho_v);
  }
  p.project();
  p.ref_h = p.m_h;
  p.ref_v = p.m_v;
  return p;
}

Medium medium_from_interior(const Grid3D& grid, std::span<const double> sigma_h,
                            std::span<const double> sigma_v, Anisotropy mode) {
  const Dims in = grid.interior_dims();
  if (sigma_h.size() != in.size() || sigma_v.size() != in.size()) {
    throw Error("shape_mismatch", "interior model size does not match grid");
  }
  Medium m;
  m.dims = grid.cell_dims();
  m.mode = mode;
  m.sigma_h.resize(m.dims.size());
  m.sigma_v.resize(m.dims.size());
  const int np = grid.npml();
  for (int k = 0; k < m.dims.n3; ++k) {
    const int kk = std::clamp(k - np, 0, in.n3 - 1);
    for (int j = 0; j < m.dims.n2; ++j) {
      const int jj = std::clamp(j - np, 0, in.n2 - 1);
      for (int i = 0; i < m.dims.n1; ++i) {
        const int ii = std::clamp(i - np, 0, in.n1 - 1);
        const std::size_t src = in.index(ii, jj, kk);
        const std::size_t dst = m.dims.index(i, j, k);
        m.sigma_h[dst] = sigma_h[src];
        m.sigma_v[dst] = sigma_v[src];
      }
    }
  }
  m.validate();
  return m;
}

Medium param_to_medium(const ModelParam& p, const Grid3D& grid) {
  ModelParam q = p;
  q.project();
  std::vector<double> sh(q.m_h.size());
  std::transform(q.m_h.begin(), q.m_h.end(), sh.begin(), [](double m) { return std::exp(-m); });
  std::vector<double> sv = sh;
  if (q.mode == Anisotropy::VTI) {
    std::transform(q.m_v.begin(), q.m_v.end(), sv.begin(), [](double m) { return std::exp(-m); });
  }
  return medium_from_interior(grid, sh, sv, q.mode);
}

std::vector<double> interior_values(const Grid3D& grid, std::span<const double> padded) {
  const Dims cd = grid.cell_dims();
  const Dims in = grid.interior_dims();
  if (padded.size() != cd.size()) throw Error("shape_mismatch", "padded array does not match grid");
  const int np = grid.npml();
  std::vector<double> out(in.size());
  for (int k = 0; k < in.n3; ++k)
    for (int j = 0; j < in.n2; ++j)
      for (int i = 0; i < in.n1; ++i) out[in.index(i, j, k)] = padded[cd.index(i + np, j + np, k + np)];
  return out;
}

std::vector<double> chain_rule_to_logparam(std::span<const double> grad_sigma,
                                           std::span<const double> sigma) {
  if (grad_sigma.size() != sigma.size()) {
    throw Error("shape_mismatch", "gradient and conductivity sizes differ (" +
                                      std::to_string(grad_sigma.size()) + " vs " +
                                      std::to_string(sigma.size()) + ")");
  }
  std::vector<double> g(sigma.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -sigma[i] * grad_sigma[i];
  return g;
}

}  // namespace fwem
