#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "obscert/model.hpp"
#include "obscert/profile.hpp"
#include "obscert/sampling.hpp"

namespace obscert {

/// Reading of the bracketed factor [N/k] in the dead-zone threshold.
enum class BracketSemantics { RealDivision, FloorDivision };

/// Dead-zone cost shape: per-output sizes are zeta * scale_i.
struct DeadZoneSpec {
  double zeta = 0.0;
  Vec scale;  // per-output multipliers, all-ones reproduces the scalar case
  int r = 1;
  BracketSemantics bracket = BracketSemantics::RealDivision;
};

/// Per-scenario sufficient statistics: certification constraints reduce to
/// threshold comparisons against these, with no resimulation.
struct ScenarioStats {
  std::uint64_t id = 0;
  Vec a;   // per-output consistency thresholds, a_i = s(q_nu^[i])
  Vec b;   // per-output detectability thresholds, b_i = s(e2^[i])
  Vec dz;  // per-target distances ||T(xi,p) - T(q_x,q_p)||
};

namespace detail {

inline double bracket_factor(std::size_t horizon, std::size_t k, BracketSemantics bracket) {
  return bracket == BracketSemantics::RealDivision
             ? static_cast<double>(horizon) / static_cast<double>(k)
             : static_cast<double>(horizon / k);
}

inline double int_pow(double x, int r) {
  double out = x;
  for (int i = 1; i < r; ++i) out *= x;
  return out;
}

}  // namespace detail

/// m_k = |(1/k) sum_{j<=k} e_j| for k = 1..N.
inline Vec cum_mean(std::span<const double> e_row) {
  Vec m(e_row.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < e_row.size(); ++k) {
    acc += e_row[k];
    m[k] = std::abs(acc / static_cast<double>(k + 1));
  }
  return m;
}

/// Dead-zone distance-to-zero of one output error row:
/// sum_k max(0, m_k - [N/k] * zeta_i)^r.
inline double deadzone_distance(std::span<const double> e_row, double zeta_i, int r,
                                BracketSemantics bracket = BracketSemantics::RealDivision) {
  if (r < 1) throw std::invalid_argument("dead-zone exponent r must be >= 1");
  const Vec m = cum_mean(e_row);
  const std::size_t horizon = e_row.size();
  double total = 0.0;
  for (std::size_t k = 1; k <= horizon; ++k) {
    const double excess = m[k - 1] - detail::bracket_factor(horizon, k, bracket) * zeta_i;
    if (excess > 0.0) total += detail::int_pow(excess, r);
  }
  return total;
}

/// Smallest dead-zone size that clips the row to zero cost:
/// deadzone_distance(e_row, z, r) = 0  iff  z >= consistency_stat(e_row),
/// for every exponent r >= 1.
inline double consistency_stat(std::span<const double> e_row,
                               BracketSemantics bracket = BracketSemantics::RealDivision) {
  const Vec m = cum_mean(e_row);
  const std::size_t horizon = e_row.size();
  double s = 0.0;
  for (std::size_t k = 1; k <= horizon; ++k)
    s = std::max(s, m[k - 1] / detail::bracket_factor(horizon, k, bracket));
  return s;
}

/// Overall output prediction penalty: sum over output components of the
/// per-row dead-zone distance with zeta_i = zeta * scale_i.
inline double total_cost(const Profile& error, const DeadZoneSpec& spec) {
  if (spec.scale.size() != error.rows())
    throw std::invalid_argument("dead-zone scale size does not match output count");
  double total = 0.0;
  for (std::size_t i = 0; i < error.rows(); ++i)
    total += deadzone_distance(error.row(i), spec.zeta * spec.scale[i], spec.r, spec.bracket);
  return total;
}

/// Output prediction error profile of a scenario.
///
/// measured = Y(q_x, q_u, q_p) + q_nu; predicted is the candidate trajectory
/// Y(xi, q_u, p) when use_candidate, else the true one. Computed as
/// q_nu + (Y_true - Y_pred) so identical pairs cancel to exactly q_nu.
inline Profile prediction_error(const Scenario& sc, const SystemModel& model,
                                bool use_candidate) {
  const std::size_t horizon = sc.q_u.length();
  auto [states_t, y_true] = simulate_flow(model, sc.q_x, sc.q_u, sc.q_p, horizon);
  Profile e = sc.q_nu;
  if (!use_candidate) return e;
  auto [states_c, y_cand] = simulate_flow(model, sc.xi, sc.q_u, sc.p, horizon);
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t k = 0; k < horizon; ++k)
      e.at(i, k) += y_true.at(i, k) - y_cand.at(i, k);
  return e;
}

/// Simulates both tuples of a scenario and reduces them to ScenarioStats.
/// Propagates NonFiniteState; the caller flags the scenario invalid and
/// resamples it under a fresh attempt.
inline ScenarioStats scenario_stats(const Scenario& sc, const SystemModel& model,
                                    NormChoice norm = NormChoice::Euclidean,
                                    BracketSemantics bracket = BracketSemantics::RealDivision) {
  const std::size_t horizon = sc.q_u.length();
  auto [states_t, y_true] = simulate_flow(model, sc.q_x, sc.q_u, sc.q_p, horizon);
  auto [states_c, y_cand] = simulate_flow(model, sc.xi, sc.q_u, sc.p, horizon);

  ScenarioStats st;
  st.id = sc.id;
  st.a.resize(model.n_y);
  st.b.resize(model.n_y);
  Vec e2_row(horizon);
  for (std::size_t i = 0; i < model.n_y; ++i) {
    st.a[i] = consistency_stat(sc.q_nu.row(i), bracket);
    for (std::size_t k = 0; k < horizon; ++k)
      e2_row[k] = sc.q_nu.at(i, k) + (y_true.at(i, k) - y_cand.at(i, k));
    st.b[i] = consistency_stat(e2_row, bracket);
  }
  st.dz.resize(model.targets.size());
  for (std::size_t t = 0; t < model.targets.size(); ++t) {
    const Vec z_true = eval_target(model, t, sc.q_x, sc.q_p);
    const Vec z_cand = eval_target(model, t, sc.xi, sc.p);
    st.dz[t] = distance(z_cand, z_true, norm);
  }
  return st;
}

}  // namespace obscert
