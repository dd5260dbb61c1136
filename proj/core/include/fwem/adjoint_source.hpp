#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fwem/grid.hpp"
#include "fwem/medium.hpp"

namespace fwem {

using cplx = std::complex<double>;

/// Defines the map B from a real series s(t_n), t_n = n dt, to its stacked
/// spectrum [Re S(w_1..w_N), Im S(w_1..w_N)], S(w_k) = sum_n s_n K_k(t_n),
/// K_k(t) = exp(-a_k t) exp(i a_k t), a_k = sqrt(w_k w0).
struct BasisParams {
  double dt = 0.004;
  int nt = 1000;
  std::vector<double> freqs;
  double omega0 = kDefaultOmega0;
  double gamma = 1.0e-3;
  double tol = 1.0e-10;
  int max_iter = 200;

  [[nodiscard]] std::size_t rows() const { return 2 * freqs.size(); }
  void validate() const;
};

[[nodiscard]] std::vector<double> apply_B(const BasisParams& p, std::span<const double> s);
[[nodiscard]] std::vector<double> apply_B_transpose(const BasisParams& p, std::span<const double> y);

struct CgnrResult {
  std::vector<double> x;
  /// Relative normal-equation residual ||B^T(y - Bx) - gamma x|| / ||B^T y||,
  /// starting with the initial guess (iteration 0).
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
};

/// Minimizes ||y - B s||^2 + gamma ||s||^2 with conjugate gradients on the
/// damped normal equations, never forming B.
[[nodiscard]] CgnrResult solve_damped_cgnr(const BasisParams& p, std::span<const double> y, double gamma,
                                           double tol, int max_iter);

/// Columns of the damped pseudo-inverse: b_k solves the problem for the
/// unit spectrum e_k, k = 0 .. 2N-1.
struct BasisSet {
  BasisParams params;
  std::vector<std::vector<double>> b;
  std::vector<CgnrResult> solves;  // x left empty; b holds the solutions

  [[nodiscard]] bool converged() const;
  [[nodiscard]] int max_iterations() const;
};

[[nodiscard]] BasisSet compute_basis(const BasisParams& p);

/// sum_k Re(S_k) b_k + Im(S_k) b_{k+N}.
[[nodiscard]] std::vector<double> synthesize(const BasisSet& basis, std::span<const cplx> spectrum);

/// Series for one adjoint point source.
struct AdjointSeries {
  Vec3 pos{};
  Component comp = Component::Ex;
  std::vector<double> series;
};

/// One conjugated weighted residual conj(W^2 (d_obs - d_syn)) per frequency
/// at one receiver component.
struct ResidualSpectrum {
  Vec3 pos{};
  Component comp = Component::Ex;
  std::vector<cplx> values;
};

/// Builds the per-step current series whose transforms sum_n dt s_n K(t_n)
/// equal
///   J_acc = sqrt(-i w / 2 w0) * r   for electric components, sampled at
///                                   t_n = (n + 1/2) dt, and
///   M_acc = r                       for magnetic components, t_n = n dt,
/// as linear combinations of the basis columns.
[[nodiscard]] std::vector<AdjointSeries> synthesize_adjoint_sources(std::span<const ResidualSpectrum> residuals,
                                                                    const BasisSet& basis);

/// FNV-1a hash of the parameters the basis depends on.
[[nodiscard]] std::uint64_t basis_hash(const BasisParams& p);
void save_basis(const std::filesystem::path& path, const BasisSet& basis);
/// Returns false when the file is missing, unreadable or keyed to other
/// parameters.
[[nodiscard]] bool load_basis(const std::filesystem::path& path, const BasisParams& p, BasisSet& out);
/// Loads from `cache_dir` when possible, otherwise computes and stores.
[[nodiscard]] BasisSet cached_basis(const std::filesystem::path& cache_dir, const BasisParams& p);

}  // namespace fwem
