#pragma once

#include <array>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fwem/gradient.hpp"

namespace fwem {

/// Stored pairs (s_i, y_i) of model and gradient differences, newest last.
class LbfgsMemory {
 public:
  explicit LbfgsMemory(int capacity = 5);

  /// Stores the pair unless s.y <= 0; drops the oldest pair when full.
  bool push(std::vector<double> s, std::vector<double> y);
  void clear() { pairs_.clear(); }
  [[nodiscard]] std::size_t size() const { return pairs_.size(); }
  [[nodiscard]] bool empty() const { return pairs_.empty(); }
  [[nodiscard]] int capacity() const { return capacity_; }

  struct Pair {
    std::vector<double> s, y;
    double rho = 0.0;  // 1 / s.y
  };
  [[nodiscard]] const std::deque<Pair>& pairs() const { return pairs_; }

 private:
  int capacity_;
  std::deque<Pair> pairs_;
};

/// Two-loop recursion with H0 = (s.y / y.P y) diag(P) from the newest pair,
/// or -P g with an empty memory. `precond` empty means P = I. Falls back to
/// -P g whenever the result is not a descent direction.
[[nodiscard]] std::vector<double> lbfgs_direction(std::span<const double> grad, const LbfgsMemory& mem,
                                                  std::span<const double> precond);

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  int trials = 0;
  std::vector<double> x;  // accepted (projected) point
  double value = 0.0;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Backtracking from alpha0 with halving until
///   f(P(x + a d)) < f(x) and f(P(x + a d)) <= f(x) + c1 g.(P(x + a d) - x),
/// where P clamps to [lo, hi]. Fails immediately on an ascent direction and
/// after `max_trials` rejected trials.
[[nodiscard]] LineSearchResult line_search(std::span<const double> x, double fx, std::span<const double> grad,
                                           std::span<const double> dir, const Objective& f, double alpha0,
                                           double lo, double hi, double c1 = 1.0e-4, int max_trials = 8);

struct InversionConfig {
  int max_iter = 30;
  int memory = 5;
  double beta0 = 0.01;
  double cooling = 0.85;
  std::array<double, 3> alpha{1.0, 1.0, 0.1};
  double c1 = 1.0e-4;
  int max_trials = 8;
  /// Largest parameter change of a steepest-descent trial step (ln units).
  double sd_update = 0.1;
  /// Cap on the largest parameter change of an l-BFGS trial step.
  double max_update = 1.0;
  bool precondition = true;
  DepthPreconditioner depth{};

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double phi_d = 0.0;
  double phi_m = 0.0;
  double beta = 0.0;
  double normalized = 0.0;
  double step = 0.0;  // accepted alpha; 0 for the starting model
  bool restart = false;
  int trials = 0;
  double wall_time = 0.0;  // seconds since the start, not part of the CSV log

  [[nodiscard]] double total() const { return phi_d + beta * phi_m; }
};

struct InversionResult {
  ModelParam model;
  Evaluation final;  // without volumes
  std::vector<IterationRecord> log;
  std::string stop_reason;
};

/// Minimizes phi_d + beta phi_m over the log-resistivity model. Freezes the
/// PML conductivities at the starting model when the problem has no PML
/// reference yet.
[[nodiscard]] InversionResult invert(Problem& pb, const ModelParam& start, const InversionConfig& cfg,
                                     const std::function<void(const IterationRecord&)>& on_iteration = {});

}  // namespace fwem
