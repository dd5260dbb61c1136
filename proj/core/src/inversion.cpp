#include "fwem/inversion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "fwem/error.hpp"

namespace fwem {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> scaled_negative(std::span<const double> g, std::span<const double> p) {
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = -(p.empty() ? 1.0 : p[i]) * g[i];
  return d;
}

}  // namespace

LbfgsMemory::LbfgsMemory(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw Error("bad_config", "l-BFGS memory must hold at least one pair");
}

bool LbfgsMemory::push(std::vector<double> s, std::vector<double> y) {
  if (s.size() != y.size()) throw Error("shape_mismatch", "l-BFGS pair sizes differ");
  const double sy = dot(s, y);
  if (!(sy > 0.0) || !std::isfinite(sy)) return false;
  if (static_cast<int>(pairs_.size()) == capacity_) pairs_.pop_front();
  pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
  return true;
}

std::vector<double> lbfgs_direction(std::span<const double> grad, const LbfgsMemory& mem,
                                    std::span<const double> precond) {
  if (!precond.empty() && precond.size() != grad.size()) {
    throw Error("shape_mismatch", "preconditioner does not match the gradient");
  }
  const std::vector<double> fallback = scaled_negative(grad, precond);
  if (mem.empty()) return fallback;
  const auto& pairs = mem.pairs();
  std::vector<double> q(grad.begin(), grad.end());
  std::vector<double> a(pairs.size());
  for (std::size_t i = pairs.size(); i-- > 0;) {
    const auto& p = pairs[i];
    if (p.s.size() != q.size()) throw Error("shape_mismatch", "l-BFGS pair does not match the gradient");
    a[i] = p.rho * dot(p.s, q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] -= a[i] * p.y[j];
  }
  const auto& last = pairs.back();
  double ypy = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) ypy += last.y[j] * (precond.empty() ? 1.0 : precond[j]) * last.y[j];
  const double gamma = ypy > 0.0 ? 1.0 / (last.rho * ypy) : 1.0;
  for (std::size_t j = 0; j < q.size(); ++j) q[j] *= gamma * (precond.empty() ? 1.0 : precond[j]);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const double b = p.rho * dot(p.y, q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += (a[i] - b) * p.s[j];
  }
  for (double& v : q) v = -v;
  const double gd = dot(grad, q);
  if (!(gd < 0.0) || !std::isfinite(gd)) return fallback;
  return q;
}

LineSearchResult line_search(std::span<const double> x, double fx, std::span<const double> grad,
                             std::span<const double> dir, const Objective& f, double alpha0, double lo, double hi,
                             double c1, int max_trials) {
  if (x.size() != dir.size() || x.size() != grad.size()) throw Error("shape_mismatch", "line search sizes differ");
  LineSearchResult res;
  if (!(dot(grad, dir) < 0.0) || !(alpha0 > 0.0)) return res;
  double alpha = alpha0;
  std::vector<double> trial(x.size());
  for (int t = 0; t < max_trials; ++t) {
    double decrease = 0.0;
    bool moved = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      trial[i] = std::clamp(x[i] + alpha * dir[i], lo, hi);
      decrease += grad[i] * (trial[i] - x[i]);
      moved = moved || trial[i] != x[i];
    }
    ++res.trials;
    if (moved) {
      const double ft = f(trial);
      if (std::isfinite(ft) && ft < fx && ft <= fx + c1 * decrease) {
        res.ok = true;
        res.alpha = alpha;
        res.x = trial;
        res.value = ft;
        return res;
      }
    }
    alpha *= 0.5;
  }
  return res;
}

void InversionConfig::validate() const {
  if (max_iter < 0) throw Error("bad_config", "max_iter must be non-negative");
  if (memory < 1) throw Error("bad_config", "l-BFGS memory must be at least 1");
  if (!(beta0 >= 0.0)) throw Error("bad_config", "beta0 must be non-negative");
  if (!(cooling > 0.0 && cooling <= 1.0)) throw Error("bad_config", "cooling factor must lie in (0, 1]");
  if (!(c1 > 0.0 && c1 < 1.0)) throw Error("bad_config", "Armijo constant must lie in (0, 1)");
  if (max_trials < 1) throw Error("bad_config", "line search needs at least one trial");
  if (!(sd_update > 0.0) || !(max_update > 0.0)) throw Error("bad_config", "step caps must be positive");
}

InversionResult invert(Problem& pb, const ModelParam& start, const InversionConfig& cfg,
                       const std::function<void(const IterationRecord&)>& on_iteration) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  if (pb.pml_reference.dims.size() == 0) set_pml_reference(pb, start);

  ModelParam model = start;
  model.project();
  const std::size_t n = model.cells();
  std::vector<double> precond;
  if (cfg.precondition) {
    const std::vector<double> w = depth_weights(pb.grid, cfg.depth);
    const Dims in = pb.grid.interior_dims();
    const std::size_t layer = static_cast<std::size_t>(in.n1) * static_cast<std::size_t>(in.n2);
    precond.resize(n * static_cast<std::size_t>(model.classes()));
    for (std::size_t i = 0; i < precond.size(); ++i) precond[i] = w[(i % n) / layer];
  }

  struct State {
    Evaluation ev;
    std::vector<double> gd;
    double phi_m = 0.0;
    std::vector<double> gm;
  };
  auto regularization = [&](State& s) {
    auto [v, g] = tikhonov_value_and_gradient(s.ev.model, cfg.alpha);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (s.ev.model.is_frozen(i % n)) g[i] = 0.0;
    }
    s.phi_m = v;
    s.gm = std::move(g);
  };

  State cur;
  cur.ev = evaluate(pb, model, cfg.max_iter > 0);
  if (cfg.max_iter > 0) cur.gd = data_gradient(pb, cur.ev);
  regularization(cur);

  double beta = cfg.beta0;
  InversionResult result;
  IterationRecord rec0;
  rec0.phi_d = cur.ev.misfit.value;
  rec0.phi_m = cur.phi_m;
  rec0.beta = beta;
  rec0.normalized = cur.ev.misfit.normalized;
  rec0.wall_time = elapsed();
  result.log.push_back(rec0);
  if (on_iteration) on_iteration(rec0);

  LbfgsMemory mem(cfg.memory);
  result.stop_reason = "max_iter";
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const std::vector<double> x = cur.ev.model.packed();
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = cur.gd[i] + beta * cur.gm[i];
    const double fx = cur.ev.misfit.value + beta * cur.phi_m;

    Evaluation last;
    const Objective objective = [&](const std::vector<double>& trial) {
      ModelParam m = cur.ev.model;
      m.unpack(trial);
      last = evaluate(pb, m, true);
      auto [phi_m, unused] = tikhonov_value_and_gradient(last.model, cfg.alpha);
      (void)unused;
      return last.misfit.value + beta * phi_m;
    };
    auto search = [&](const std::vector<double>& dir, bool steepest) {
      const double dmax = max_abs(dir);
      if (!(dmax > 0.0)) return LineSearchResult{};
      const double alpha0 = steepest ? cfg.sd_update / dmax : std::min(1.0, cfg.max_update / dmax);
      return line_search(x, fx, g, dir, objective, alpha0, model.m_min, model.m_max, cfg.c1, cfg.max_trials);
    };

    bool restart = false;
    bool steepest = mem.empty();
    LineSearchResult ls = search(lbfgs_direction(g, mem, precond), steepest);
    if (!ls.ok && !steepest) {
      mem.clear();
      restart = true;
      steepest = true;
      ls = search(scaled_negative(g, precond), true);
    }
    if (!ls.ok) {
      result.stop_reason = max_abs(g) > 0.0 ? "line_search_failed" : "zero_gradient";
      break;
    }

    State next;
    next.ev = std::move(last);
    next.gd = data_gradient(pb, next.ev);
    regularization(next);
    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      s[i] = ls.x[i] - x[i];
      y[i] = (next.gd[i] + beta * next.gm[i]) - g[i];
    }
    (void)mem.push(std::move(s), std::move(y));

    IterationRecord rec;
    rec.iteration = it;
    rec.phi_d = next.ev.misfit.value;
    rec.phi_m = next.phi_m;
    rec.beta = beta;
    rec.normalized = next.ev.misfit.normalized;
    rec.step = ls.alpha;
    rec.restart = restart;
    rec.trials = ls.trials;
    rec.wall_time = elapsed();
    result.log.push_back(rec);
    if (on_iteration) on_iteration(rec);

    cur = std::move(next);
    beta *= cfg.cooling;
  }
  result.model = cur.ev.model;
  result.final = std::move(cur.ev);
  for (auto& f : result.final.forward) f.volumes = {};
  return result;
}

}  // namespace fwem
