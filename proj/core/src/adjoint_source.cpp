#include "fwem/adjoint_source.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fwem/error.hpp"
#include "fwem/fdtd.hpp"

namespace fwem {

void BasisParams::validate() const {
  if (!(dt > 0.0)) throw Error("bad_basis", "dt must be positive");
  if (nt <= 0) throw Error("bad_basis", "N_t must be positive");
  if (freqs.empty()) throw Error("bad_basis", "no frequencies");
  for (double f : freqs) {
    if (!(f > 0.0)) throw Error("bad_basis", "frequencies must be positive");
  }
  if (!(omega0 > 0.0)) throw Error("bad_omega0", "omega0 must be positive");
  if (!(gamma >= 0.0)) throw Error("bad_basis", "gamma must be non-negative");
}

namespace {

// Kernel rows: out[k][n] = exp(-a t_n) cos(a t_n), out[N + k][n] = exp(-a t_n) sin(a t_n).
std::vector<std::vector<double>> kernel_rows(const BasisParams& p) {
  const std::size_t nf = p.freqs.size();
  std::vector<std::vector<double>> rows(2 * nf, std::vector<double>(p.nt));
  for (std::size_t k = 0; k < nf; ++k) {
    const double a = kernel_rate(p.freqs[k], p.omega0);
    for (int n = 0; n < p.nt; ++n) {
      const double t = n * p.dt;
      const double e = std::exp(-a * t);
      rows[k][n] = e * std::cos(a * t);
      rows[nf + k][n] = e * std::sin(a * t);
    }
  }
  return rows;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> apply_rows(const std::vector<std::vector<double>>& rows, std::span<const double> s) {
  std::vector<double> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) y[r] = dot(rows[r], s);
  return y;
}

std::vector<double> apply_rows_t(const std::vector<std::vector<double>>& rows, std::size_t nt,
                                 std::span<const double> y) {
  std::vector<double> s(nt, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double c = y[r];
    if (c == 0.0) continue;
    for (std::size_t n = 0; n < nt; ++n) s[n] += c * rows[r][n];
  }
  return s;
}

std::vector<double> apply_normal(const std::vector<std::vector<double>>& rows, std::size_t nt, double gamma,
                                 std::span<const double> v) {
  std::vector<double> out = apply_rows_t(rows, nt, apply_rows(rows, v));
  for (std::size_t n = 0; n < nt; ++n) out[n] += gamma * v[n];
  return out;
}

// Conjugate-residual iteration on (B^T B + gamma I) x = B^T y. It spans the
// same Krylov space as CGNR but minimizes the normal-equation residual at
// every step, so the convergence history is monotone.
CgnrResult cgnr(const std::vector<std::vector<double>>& rows, std::size_t nt, std::span<const double> y,
                double gamma, double tol, int max_iter) {
  CgnrResult res;
  res.x.assign(nt, 0.0);
  std::vector<double> r = apply_rows_t(rows, nt, y);
  const double norm0 = std::sqrt(dot(r, r));
  if (norm0 == 0.0) {
    res.history.push_back(0.0);
    res.converged = true;
    return res;
  }
  res.history.push_back(1.0);
  std::vector<double> ar = apply_normal(rows, nt, gamma, r);
  std::vector<double> p = r;
  std::vector<double> ap = ar;
  double rar = dot(r, ar);
  for (int it = 1; it <= max_iter; ++it) {
    const double apap = dot(ap, ap);
    if (!(apap > 0.0) || !(rar > 0.0)) break;
    const double alpha = rar / apap;
    for (std::size_t n = 0; n < nt; ++n) {
      res.x[n] += alpha * p[n];
      r[n] -= alpha * ap[n];
    }
    res.iterations = it;
    res.history.push_back(std::sqrt(dot(r, r)) / norm0);
    if (res.history.back() <= tol) {
      res.converged = true;
      break;
    }
    ar = apply_normal(rows, nt, gamma, r);
    const double rar_new = dot(r, ar);
    const double beta = rar_new / rar;
    rar = rar_new;
    for (std::size_t n = 0; n < nt; ++n) {
      p[n] = r[n] + beta * p[n];
      ap[n] = ar[n] + beta * ap[n];
    }
  }
  return res;
}

}  // namespace

std::vector<double> apply_B(const BasisParams& p, std::span<const double> s) {
  p.validate();
  if (s.size() != static_cast<std::size_t>(p.nt)) throw Error("shape_mismatch", "series length differs from N_t");
  return apply_rows(kernel_rows(p), s);
}

std::vector<double> apply_B_transpose(const BasisParams& p, std::span<const double> y) {
  p.validate();
  if (y.size() != p.rows()) throw Error("shape_mismatch", "spectrum length differs from 2 N_w");
  return apply_rows_t(kernel_rows(p), static_cast<std::size_t>(p.nt), y);
}

CgnrResult solve_damped_cgnr(const BasisParams& p, std::span<const double> y, double gamma, double tol,
                             int max_iter) {
  p.validate();
  if (y.size() != p.rows()) throw Error("shape_mismatch", "spectrum length differs from 2 N_w");
  if (!(gamma >= 0.0)) throw Error("bad_basis", "gamma must be non-negative");
  if (!(tol > 0.0)) throw Error("bad_basis", "tolerance must be positive");
  return cgnr(kernel_rows(p), static_cast<std::size_t>(p.nt), y, gamma, tol, max_iter);
}

bool BasisSet::converged() const {
  for (const auto& s : solves) {
    if (!s.converged) return false;
  }
  return true;
}

int BasisSet::max_iterations() const {
  int m = 0;
  for (const auto& s : solves) m = std::max(m, s.iterations);
  return m;
}

BasisSet compute_basis(const BasisParams& p) {
  p.validate();
  const auto rows = kernel_rows(p);
  BasisSet set;
  set.params = p;
  for (std::size_t k = 0; k < p.rows(); ++k) {
    std::vector<double> e(p.rows(), 0.0);
    e[k] = 1.0;
    CgnrResult r = cgnr(rows, static_cast<std::size_t>(p.nt), e, p.gamma, p.tol, p.max_iter);
    set.b.push_back(std::move(r.x));
    r.x.clear();
    set.solves.push_back(std::move(r));
  }
  return set;
}

std::vector<double> synthesize(const BasisSet& basis, std::span<const cplx> spectrum) {
  const std::size_t nf = basis.params.freqs.size();
  if (spectrum.size() != nf) throw Error("freq_mismatch", "spectrum does not match the basis frequencies");
  std::vector<double> s(static_cast<std::size_t>(basis.params.nt), 0.0);
  for (std::size_t k = 0; k < nf; ++k) {
    const double re = spectrum[k].real();
    const double im = spectrum[k].imag();
    const auto& br = basis.b[k];
    const auto& bi = basis.b[nf + k];
    for (std::size_t n = 0; n < s.size(); ++n) s[n] += re * br[n] + im * bi[n];
  }
  return s;
}

std::vector<AdjointSeries> synthesize_adjoint_sources(std::span<const ResidualSpectrum> residuals,
                                                      const BasisSet& basis) {
  const BasisParams& p = basis.params;
  const std::size_t nf = p.freqs.size();
  std::vector<AdjointSeries> out;
  out.reserve(residuals.size());
  std::vector<cplx> target(nf);
  for (const auto& r : residuals) {
    if (r.values.size() != nf) throw Error("freq_mismatch", "residual frequencies do not match the basis");
    for (std::size_t k = 0; k < nf; ++k) {
      if (is_electric(r.comp)) {
        const double a = kernel_rate(p.freqs[k], p.omega0);
        const cplx half_step = std::exp(cplx(-a, a) * (0.5 * p.dt));
        target[k] = wave_factor(p.freqs[k], p.omega0) * r.values[k] / (p.dt * half_step);
      } else {
        target[k] = r.values[k] / p.dt;
      }
    }
    out.push_back({r.pos, r.comp, synthesize(basis, target)});
  }
  return out;
}

std::uint64_t basis_hash(const BasisParams& p) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&p.dt, sizeof p.dt);
  const std::int64_t nt = p.nt;
  mix(&nt, sizeof nt);
  for (double f : p.freqs) mix(&f, sizeof f);
  mix(&p.omega0, sizeof p.omega0);
  mix(&p.gamma, sizeof p.gamma);
  return h;
}

namespace {

constexpr char kMagic[8] = {'F', 'W', 'E', 'M', 'B', 'A', 'S', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof v));
}

}  // namespace

void save_basis(const std::filesystem::path& path, const BasisSet& basis) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("io_error", "cannot write basis cache " + path.string());
  os.write(kMagic, sizeof kMagic);
  put(os, basis_hash(basis.params));
  put(os, static_cast<std::int32_t>(basis.b.size()));
  put(os, static_cast<std::int32_t>(basis.params.nt));
  for (std::size_t k = 0; k < basis.b.size(); ++k) {
    const CgnrResult& s = basis.solves[k];
    put(os, static_cast<std::int32_t>(s.iterations));
    put(os, static_cast<std::uint8_t>(s.converged));
    put(os, static_cast<std::int32_t>(s.history.size()));
    os.write(reinterpret_cast<const char*>(s.history.data()),
             static_cast<std::streamsize>(s.history.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(basis.b[k].data()),
             static_cast<std::streamsize>(basis.b[k].size() * sizeof(double)));
  }
  if (!os) throw Error("io_error", "failed writing basis cache " + path.string());
}

bool load_basis(const std::filesystem::path& path, const BasisParams& p, BasisSet& out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) return false;
  std::uint64_t hash = 0;
  std::int32_t cols = 0, nt = 0;
  if (!get(is, hash) || !get(is, cols) || !get(is, nt)) return false;
  if (hash != basis_hash(p) || cols != static_cast<std::int32_t>(p.rows()) || nt != p.nt) return false;
  BasisSet set;
  set.params = p;
  for (std::int32_t k = 0; k < cols; ++k) {
    CgnrResult s;
    std::int32_t iters = 0, hlen = 0;
    std::uint8_t conv = 0;
    if (!get(is, iters) || !get(is, conv) || !get(is, hlen) || hlen < 0) return false;
    s.iterations = iters;
    s.converged = conv != 0;
    s.history.resize(static_cast<std::size_t>(hlen));
    std::vector<double> b(static_cast<std::size_t>(nt));
    if (!is.read(reinterpret_cast<char*>(s.history.data()), static_cast<std::streamsize>(hlen * sizeof(double))) ||
        !is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)))) {
      return false;
    }
    set.b.push_back(std::move(b));
    set.solves.push_back(std::move(s));
  }
  out = std::move(set);
  return true;
}

BasisSet cached_basis(const std::filesystem::path& cache_dir, const BasisParams& p) {
  std::ostringstream name;
  name << "basis_" << std::hex << basis_hash(p) << ".bin";
  const std::filesystem::path file = cache_dir / name.str();
  BasisSet set;
  if (load_basis(file, p, set)) return set;
  set = compute_basis(p);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  save_basis(file, set);
  return set;
}

}  // namespace fwem
