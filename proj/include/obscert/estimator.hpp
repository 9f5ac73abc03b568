#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "obscert/deadzone.hpp"
#include "obscert/model.hpp"
#include "obscert/profile.hpp"
#include "obscert/rng.hpp"

namespace obscert {

/// One moving-horizon estimation window over the dead-zone cost.
struct MheProblem {
  Profile y_meas;  // measured outputs, n_y x N
  Profile u_past;  // applied inputs, n_u x N
  DeadZoneSpec spec;
  Box state_box;  // search box for xi
  Box param_box;  // search box for p
  int multistart_count = 16;
  int max_evals = 400;  // cost-evaluation budget per start
  /// Search parameter components in log10 space when their box is positive
  /// (conditions widely-scaled parameters such as the CSTR's p1 ~ 1e4).
  bool log_param = true;
  /// Extra deterministic starts (xi, p), tried before the random ones.
  std::vector<std::pair<Vec, Vec>> extra_starts;
  std::uint64_t seed = 0;
};

struct MheSolution {
  Vec xi;
  Vec p;
  double cost = std::numeric_limits<double>::infinity();
  std::int64_t evals = 0;
  bool budget_exhausted = false;
};

namespace detail {

/// Search-space encoding: states linear in their box, parameters optionally
/// in log10; degenerate box components stay fixed.
struct MheSpace {
  const MheProblem* prob;
  std::size_t n_x, n_p;
  std::vector<bool> log_dim;

  MheSpace(const MheProblem& pb)
      : prob(&pb), n_x(pb.state_box.size()), n_p(pb.param_box.size()),
        log_dim(n_x + n_p, false) {
    if (pb.log_param)
      for (std::size_t i = 0; i < n_p; ++i)
        log_dim[n_x + i] = pb.param_box.lo[i] > 0.0;
  }

  std::size_t dims() const { return n_x + n_p; }

  double lo(std::size_t d) const {
    const double v = d < n_x ? prob->state_box.lo[d] : prob->param_box.lo[d - n_x];
    return log_dim[d] ? std::log10(v) : v;
  }
  double hi(std::size_t d) const {
    const double v = d < n_x ? prob->state_box.hi[d] : prob->param_box.hi[d - n_x];
    return log_dim[d] ? std::log10(v) : v;
  }

  void decode(const Vec& v, Vec& xi, Vec& p) const {
    xi.resize(n_x);
    p.resize(n_p);
    for (std::size_t d = 0; d < n_x; ++d) xi[d] = v[d];
    for (std::size_t d = 0; d < n_p; ++d)
      p[d] = log_dim[n_x + d] ? std::pow(10.0, v[n_x + d]) : v[n_x + d];
  }

  Vec encode(const Vec& xi, const Vec& p) const {
    Vec v(dims());
    for (std::size_t d = 0; d < n_x; ++d) v[d] = xi[d];
    for (std::size_t d = 0; d < n_p; ++d)
      v[n_x + d] = log_dim[n_x + d] ? std::log10(p[d]) : p[d];
    return v;
  }
};

}  // namespace detail

/// Window cost J(xi, p | y-, zeta): dead-zone penalty of the prediction error
/// against the measured window. Divergent candidates cost +infinity.
inline double mhe_cost(const SystemModel& model, const MheProblem& prob, const Vec& xi,
                       const Vec& p) {
  const std::size_t horizon = prob.u_past.length();
  try {
    auto [states, y_pred] = simulate_flow(model, xi, prob.u_past, p, horizon);
    Profile e = prob.y_meas;
    for (std::size_t i = 0; i < e.rows(); ++i)
      for (std::size_t k = 0; k < horizon; ++k) e.at(i, k) -= y_pred.at(i, k);
    return total_cost(e, prob.spec);
  } catch (const NonFiniteState&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Approximately minimizes J(xi, p | y-, zeta) by multistart compass search
/// within the box (derivative-free; the dead-zone cost is non-smooth at the
/// clip boundaries). Accepts strict improvements only, so the returned cost
/// never exceeds the cost of any start.
inline MheSolution mhe_solve(const SystemModel& model, const MheProblem& prob) {
  detail::MheSpace space(prob);
  const std::size_t dims = space.dims();

  MheSolution best;
  std::int64_t total_evals = 0;
  bool any_budget_hit = false;

  std::vector<Vec> starts;
  for (const auto& [xi0, p0] : prob.extra_starts) starts.push_back(space.encode(xi0, p0));
  {
    Vec center(dims);
    for (std::size_t d = 0; d < dims; ++d) center[d] = 0.5 * (space.lo(d) + space.hi(d));
    starts.push_back(center);
  }
  for (int k = static_cast<int>(starts.size()); k < prob.multistart_count; ++k) {
    SubStream s(prob.seed, static_cast<std::uint64_t>(k), StreamRole::MheStart);
    Vec v(dims);
    for (std::size_t d = 0; d < dims; ++d) v[d] = s.uniform(space.lo(d), space.hi(d));
    starts.push_back(std::move(v));
  }

  Vec xi, p;
  for (const Vec& start : starts) {
    Vec v = start;
    for (std::size_t d = 0; d < dims; ++d)
      v[d] = std::min(std::max(v[d], space.lo(d)), space.hi(d));
    space.decode(v, xi, p);
    double cost = detail::mhe_cost(model, prob, xi, p);
    int evals = 1;

    Vec step(dims);
    for (std::size_t d = 0; d < dims; ++d) step[d] = 0.25 * (space.hi(d) - space.lo(d));

    while (evals < prob.max_evals && cost > 0.0) {
      bool improved = false;
      for (std::size_t d = 0; d < dims && evals < prob.max_evals; ++d) {
        if (step[d] <= 0.0) continue;
        for (const double sign : {+1.0, -1.0}) {
          const double orig = v[d];
          const double trial = std::min(std::max(orig + sign * step[d], space.lo(d)),
                                        space.hi(d));
          if (trial == orig) continue;
          v[d] = trial;
          space.decode(v, xi, p);
          const double c = detail::mhe_cost(model, prob, xi, p);
          ++evals;
          if (c < cost) {
            cost = c;
            improved = true;
            break;  // keep the move
          }
          v[d] = orig;
          if (evals >= prob.max_evals) break;
        }
      }
      if (!improved) {
        double max_step = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
          step[d] *= 0.5;
          max_step = std::max(max_step, step[d]);
        }
        if (max_step < 1e-10) break;
      }
    }
    if (evals >= prob.max_evals) any_budget_hit = true;
    total_evals += evals;

    if (cost < best.cost) {
      space.decode(v, best.xi, best.p);
      best.cost = cost;
    }
    if (best.cost == 0.0) break;  // global minimum of a nonnegative cost
  }
  best.evals = total_evals;
  best.budget_exhausted = any_budget_hit;
  return best;
}

/// Target reconstruction from a solver output: propagate xi* forward N steps
/// under the applied inputs, then apply the target map.
inline Vec reconstruct_target(const SystemModel& model, const Vec& xi, const Vec& p,
                              const Profile& u_past, std::size_t target_index) {
  auto [states, outputs] = simulate_flow(model, xi, u_past, p, u_past.length());
  return eval_target(model, target_index, states.column(u_past.length()), p);
}

struct MheTraceRow {
  std::size_t step = 0;
  Vec z_true;
  Vec z_hat;
  double j_star = 0.0;
};

struct MheTraceConfig {
  Vec x0;
  Vec true_p;
  Profile inputs;       // n_u x steps
  Profile noise;        // n_y x steps
  std::size_t horizon;  // N
  std::size_t steps;
  std::size_t target_index = 0;
  DeadZoneSpec spec;
  Box param_box;
  int multistart_count = 16;
  int max_evals = 400;
  std::uint64_t seed = 0;
  /// Diagnostic mode: add the true (window start, parameters) as a start.
  bool start_at_truth = false;
};

/// Sliding-window estimation loop: simulates the true system, solves the MHE
/// window ending at each step k = N..steps and records true vs reconstructed
/// targets. Trace length is steps - N + 1.
inline std::vector<MheTraceRow> run_mhe_trace(const SystemModel& model,
                                              const MheTraceConfig& cfg) {
  if (cfg.steps < cfg.horizon) throw std::invalid_argument("steps must be >= horizon");
  auto [states, outputs] = simulate_flow(model, cfg.x0, cfg.inputs, cfg.true_p, cfg.steps);
  Profile y_meas = outputs;
  for (std::size_t i = 0; i < y_meas.rows(); ++i)
    for (std::size_t k = 0; k < cfg.steps; ++k) y_meas.at(i, k) += cfg.noise.at(i, k);

  std::vector<MheTraceRow> trace;
  trace.reserve(cfg.steps - cfg.horizon + 1);
  for (std::size_t k = cfg.horizon; k <= cfg.steps; ++k) {
    MheProblem prob;
    prob.y_meas = Profile(model.n_y, cfg.horizon);
    prob.u_past = Profile(model.n_u, cfg.horizon);
    for (std::size_t i = 0; i < model.n_y; ++i)
      for (std::size_t j = 0; j < cfg.horizon; ++j)
        prob.y_meas.at(i, j) = y_meas.at(i, k - cfg.horizon + j);
    for (std::size_t i = 0; i < model.n_u; ++i)
      for (std::size_t j = 0; j < cfg.horizon; ++j)
        prob.u_past.at(i, j) = cfg.inputs.at(i, k - cfg.horizon + j);
    prob.spec = cfg.spec;
    prob.state_box = model.state_box;
    prob.param_box = cfg.param_box;
    prob.multistart_count = cfg.multistart_count;
    prob.max_evals = cfg.max_evals;
    prob.seed = cfg.seed + k;
    if (cfg.start_at_truth)
      prob.extra_starts.push_back({states.column(k - cfg.horizon), cfg.true_p});

    const MheSolution sol = mhe_solve(model, prob);
    MheTraceRow row;
    row.step = k;
    row.z_true = eval_target(model, cfg.target_index, states.column(k), cfg.true_p);
    row.z_hat = reconstruct_target(model, sol.xi, sol.p, prob.u_past, cfg.target_index);
    row.j_star = sol.cost;
    trace.push_back(std::move(row));
  }
  return trace;
}

}  // namespace obscert
