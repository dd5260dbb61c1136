#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "fwem/array3.hpp"
#include "fwem/grid.hpp"
#include "fwem/medium.hpp"

namespace fwem {

using cplx = std::complex<double>;

/// sqrt(omega * omega0) for a frequency in Hz: decay rate and angular
/// frequency of the fictitious-time transform kernel.
[[nodiscard]] double kernel_rate(double freq_hz, double omega0);

/// exp(-a t) exp(i a t) with a = sqrt(omega omega0).
[[nodiscard]] cplx dtft_kernel(double freq_hz, double omega0, double t);

/// Complex fictitious frequency (1 + i) sqrt(omega omega0).
[[nodiscard]] cplx fictitious_omega(double freq_hz, double omega0);

/// sqrt(-i omega / (2 omega0)), the scaling between diffusive and fictitious
/// magnetic fields and electric sources.
[[nodiscard]] cplx wave_factor(double freq_hz, double omega0);

/// Omega_d / omega', where Omega_d = 2 sin(omega' dt / 2) / dt is the
/// frequency the leap-frog recursion actually realizes at the sampled kernel.
[[nodiscard]] cplx leapfrog_factor(double freq_hz, double omega0, double dt);

/// First derivative of a Gaussian, centered at t0 with width tau.
struct Wavelet {
  double tau = 0.1;
  double t0 = 0.4;

  [[nodiscard]] double operator()(double t) const;
  [[nodiscard]] double duration() const { return 2.0 * t0; }
  /// Pulse whose spectrum covers the fictitious frequencies of `freqs_hz`.
  [[nodiscard]] static Wavelet for_frequencies(std::span<const double> freqs_hz, double omega0);
};

struct PmlSettings {
  double reflection = 1.0e-5;
  int order = 3;
  double alpha_max = 0.0;
};

struct SimConfig {
  double dt = 0.0;
  int nt_max = 0;
  double cfl = 0.9;
  std::vector<double> freqs;
  double omega0 = kDefaultOmega0;
  double steady_tol = 1.0e-5;
  int check_every = 200;
  /// When false the run always takes nt_max steps.
  bool steady_check = true;
  Wavelet wavelet{};
  /// Wave speed used to grade the PML damping; <= 0 selects the fastest
  /// speed of the medium being simulated.
  double pml_speed = 0.0;
  PmlSettings pml{};
  bool store_volumes = false;
  bool record_traces = false;
  bool check_finite = false;
};

/// dt = cfl * h_min / (c_max sqrt(3)), c_max = 1 / sqrt(mu eps_min).
[[nodiscard]] double compute_time_step(const Grid3D& grid, const FictitiousPermittivity& eps, double mu,
                                       double cfl);

/// Steps needed for the slowest kernel exp(-sqrt(omega_min omega0) t) to
/// decay by `efolds`.
[[nodiscard]] int steps_for_decay(std::span<const double> freqs_hz, double omega0, double dt,
                                  double efolds);

/// Wave speed 1/sqrt(mu eps_min) of a medium.
[[nodiscard]] double max_wave_speed(const Medium& medium, double omega0);

enum class SourceKind { Electric, Magnetic };

struct Dipole {
  Vec3 pos{};
  Vec3 orientation{1.0, 0.0, 0.0};
  double moment = 1.0;
  SourceKind kind = SourceKind::Electric;
};

struct ReceiverSpec {
  Vec3 pos{};
  std::vector<Component> comps;
};

/// Cells contributing to the conductivity of one E-edge, with averaging
/// weights (cross-section areas, normalized).
struct EdgeStencil {
  std::array<std::size_t, 4> cell{};
  std::array<double, 4> weight{};
  int count = 0;
};
[[nodiscard]] EdgeStencil edge_stencil(const Grid3D& grid, Component c, int i, int j, int k);

struct FieldState {
  Array3<double> ex, ey, ez, hx, hy, hz;
  /// CPML memory: psi[c][a] convolves the derivative along axis a in the
  /// update of component c (c in Ex..Hz order).
  std::array<std::array<Array3<double>, 3>, 6> psi;

  [[nodiscard]] Array3<double>& field(Component c);
  [[nodiscard]] const Array3<double>& field(Component c) const;
  [[nodiscard]] bool all_finite() const;
};

/// Point injection prepared for one component: E -= coef * J or H += coef * M.
struct PointInjection {
  Component comp = Component::Ex;
  std::array<std::size_t, 8> index{};
  std::array<double, 8> coef{};
};

/// Point current with one amplitude per step. Electric amplitudes of step n
/// act at t = (n + 1/2) dt, magnetic ones at t = n dt. Steps past the end
/// are zero.
struct TimedInjection {
  Vec3 pos{};
  Component comp = Component::Ex;
  std::vector<double> series;
};

/// Leap-frog integrator of the fictitious wave system
///   eps dE/dt = curl H - J,   mu dH/dt = -curl E + M
/// with CPML absorbing layers and PEC outer walls.
class FdtdEngine {
 public:
  FdtdEngine(const Grid3D& grid, const Medium& medium, const SimConfig& cfg);

  [[nodiscard]] const Grid3D& grid() const { return *grid_; }
  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] FieldState& state() { return state_; }
  [[nodiscard]] const FieldState& state() const { return state_; }

  /// Injection stencil for a unit point current (electric components) or
  /// unit magnetic current (H components) at `pos`.
  [[nodiscard]] PointInjection make_injection(const Vec3& pos, Component c) const;
  void inject(const PointInjection& inj, double amplitude);

  /// H^{n-1/2} -> H^{n+1/2}.
  void update_h();
  /// E^{n} -> E^{n+1}.
  void update_e();

  /// Installs the sources driven by step().
  void set_sources(std::vector<TimedInjection> sources);
  /// One full leap-frog step: H update, magnetic sources, E update, electric
  /// sources (step index n selects the source amplitudes).
  void step(int n);
  void inject_magnetic(int n);
  void inject_electric(int n);

  [[nodiscard]] double sample(const StaggerWeights& sw, Component c) const;
  /// 1/2 sum of (eps E^2 + mu H^2) dV over the whole lattice.
  [[nodiscard]] double energy() const;
  /// dt / eps on the edges of one electric component; zero on PEC walls.
  [[nodiscard]] const Array3<double>& edge_coefficient(Component c) const;

 private:
  const Grid3D* grid_;
  double dt_;
  double ch_;
  double mu_;
  Dims nd_;
  FieldState state_;
  Array3<double> cex_, cey_, cez_;
  struct Axis {
    std::vector<double> inv_d, inv_dd;
    std::vector<double> b_node, a_node, b_cell, a_cell;
    int lo_node = 0, hi_node = 0, lo_cell = 0, hi_cell = 0;  // PML extents
  };
  std::array<Axis, 3> axis_;
  bool pml_ = false;
  std::vector<TimedInjection> sources_;
  std::vector<PointInjection> points_;
};

/// Adds a point dipole's current for one step to the live fields.
void inject_dipole(FdtdEngine& engine, const Dipole& src, double wavelet_value);

/// On-the-fly transform of a set of samples: acc_k += dt * v * kernel_k(t).
class DtftAccumulator {
 public:
  DtftAccumulator(std::vector<double> freqs_hz, double omega0, std::size_t samples);

  void accumulate(std::span<const double> values, double t, double dt);
  [[nodiscard]] cplx value(std::size_t freq, std::size_t sample) const {
    return acc_[freq * samples_ + sample];
  }
  [[nodiscard]] std::span<const cplx> values() const { return acc_; }
  [[nodiscard]] std::size_t samples() const { return samples_; }
  [[nodiscard]] const std::vector<double>& freqs() const { return freqs_; }

 private:
  std::vector<double> freqs_;
  double omega0_;
  std::size_t samples_;
  std::vector<cplx> acc_;
};

/// True when every sample changed by less than tol relative to its current
/// magnitude. All-zero accumulators never count as converged.
[[nodiscard]] bool check_steady_state(std::span<const cplx> previous, std::span<const cplx> current,
                                      double tol);

/// E-field spectra on the interior nodes, one triple per frequency. Local
/// index (0, 0, 0) is lattice node (npml, npml, npml).
struct VolumeSpectra {
  std::vector<std::array<Array3<cplx>, 3>> e;  // [freq][axis]
};

struct SimulationRequest {
  std::vector<TimedInjection> sources;
  std::vector<ReceiverSpec> receivers;
  int nt = 0;
  int min_steps = 0;
  bool steady_check = true;
  bool volumes = false;
  bool traces = false;
  std::function<void(int, const FdtdEngine&)> on_step;
};

/// Raw fictitious-domain accumulations; receiver slots enumerate
/// (receiver, component) pairs in order.
struct SimulationOutput {
  std::vector<cplx> receiver;  // [freq * slots + slot]
  std::size_t slots = 0;
  VolumeSpectra volumes;
  std::vector<std::vector<double>> traces;  // [slot][step]
  int steps = 0;
  bool converged = false;
};

[[nodiscard]] SimulationOutput simulate(const Grid3D& grid, const Medium& medium, const SimConfig& cfg,
                                        const SimulationRequest& request);

/// Injection series of a dipole driven by the configured wavelet, sampled at
/// the times its current kind acts. cfg.dt must be set.
[[nodiscard]] std::vector<TimedInjection> dipole_source(const Dipole& src, const SimConfig& cfg);

/// Diffusive-domain frequency samples of one source.
struct FreqFieldSet {
  std::vector<double> freqs;
  std::vector<cplx> receiver;  // [freq * slots + slot]
  std::size_t slots = 0;
  VolumeSpectra volumes;       // E, empty unless requested
  std::vector<cplx> source_spectrum;
  std::vector<std::vector<double>> traces;
  int steps = 0;
  bool converged = false;

  [[nodiscard]] cplx at(std::size_t freq, std::size_t slot) const { return receiver[freq * slots + slot]; }
};

/// Runs one source to steady state (or nt_max) and returns impulse-response
/// normalized spectra: E = E_acc * sqrt(-i w/2w0) / S(w) for an electric
/// dipole, E = E_acc / S(w) for a magnetic one; H carries an extra
/// sqrt(2w0/(-i w)).
[[nodiscard]] FreqFieldSet run_forward(const Dipole& src, const std::vector<ReceiverSpec>& receivers,
                                       const Medium& medium, const Grid3D& grid, const SimConfig& cfg);

}  // namespace fwem
