#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "obscert/deadzone.hpp"
#include "obscert/errors.hpp"
#include "obscert/parallel.hpp"
#include "obscert/profile.hpp"

namespace obscert {

/// Randomized-certification triple (precision, confidence, failure budget).
struct CertParams {
  double eta = 0.01;
  double delta = 0.001;
  int max_failures = 10;  // m
};

inline void validate(const CertParams& p) {
  if (!(p.eta > 0.0 && p.eta < 1.0)) throw InvalidParams("eta must lie in (0,1)");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw InvalidParams("delta must lie in (0,1)");
  if (p.max_failures < 0) throw InvalidParams("m must be a nonnegative integer");
}

/// Smallest integer N_s with
///   N_s >= (1/eta) * [ m + ln(n_theta/delta) + sqrt(2 m ln(n_theta/delta)) ].
inline std::int64_t sample_count(const CertParams& p, std::int64_t n_theta) {
  validate(p);
  if (n_theta < 1) throw InvalidParams("design set cardinality must be >= 1");
  const double log_term = std::log(static_cast<double>(n_theta) / p.delta);
  const double m = static_cast<double>(p.max_failures);
  const double bound = (m + log_term + std::sqrt(2.0 * m * log_term)) / p.eta;
  return static_cast<std::int64_t>(std::ceil(bound));
}

/// n logarithmically uniformly spaced values 10^sigma over [lo, hi] exponents.
inline Vec logspace(double exp_lo, double exp_hi, int n) {
  if (n < 1) throw InvalidParams("logspace needs n >= 1");
  Vec out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = std::pow(10.0, exp_lo);
    return out;
  }
  for (int i = 0; i < n; ++i)
    out[i] = std::pow(10.0, exp_lo + (exp_hi - exp_lo) * i / static_cast<double>(n - 1));
  return out;
}

/// Discrete design set Theta of (eps, zeta) pairs, scanned lexicographically
/// (eps ascending, then zeta ascending).
struct DesignGrid {
  Vec eps_values;
  Vec zeta_values;

  std::size_t size() const { return eps_values.size() * zeta_values.size(); }

  std::pair<double, double> point(std::size_t j) const {
    return {eps_values[j / zeta_values.size()], zeta_values[j % zeta_values.size()]};
  }
};

inline DesignGrid build_design_grid(double eps_exp_lo, double eps_exp_hi, int n_eps,
                                    double zeta_exp_lo, double zeta_exp_hi, int n_zeta) {
  if (eps_exp_lo > eps_exp_hi || zeta_exp_lo > zeta_exp_hi)
    throw InvalidParams("grid exponent lower bound exceeds upper bound");
  return DesignGrid{logspace(eps_exp_lo, eps_exp_hi, n_eps),
                    logspace(zeta_exp_lo, zeta_exp_hi, n_zeta)};
}

/// Certification constraint g(w, theta) evaluated from sufficient statistics.
///
/// J1 = 0        iff zeta*scale_i >= a_i for all i;
/// w in Wbar(eps) iff dz[target] > eps (strict);
/// J2 != 0       iff zeta*scale_i < b_i for some i.
/// Returns 0 iff J1 = 0 and (dz <= eps or J2 != 0); else 1.
inline int constraint_g(const ScenarioStats& st, double eps, double zeta,
                        std::size_t target_index, const Vec& scale) {
  for (std::size_t i = 0; i < st.a.size(); ++i)
    if (zeta * scale[i] < st.a[i]) return 1;  // J1 != 0: dead zone not consistent
  if (st.dz[target_index] <= eps) return 0;   // outside Wbar(eps)
  for (std::size_t i = 0; i < st.b.size(); ++i)
    if (zeta * scale[i] < st.b[i]) return 0;  // J2 != 0: candidate detectable
  return 1;
}

/// Certification result for one observation target.
struct TargetResult {
  std::string target_name;
  bool success = false;
  double eps_star = 0.0;
  double zeta_star = 0.0;
  std::int64_t failure_count = 0;  // at theta*, or the minimum observed on failure
  std::size_t scanned_count = 0;   // grid points examined
  std::vector<std::uint64_t> failure_ids;  // scenario ids violating g at theta*
};

namespace detail {

inline std::int64_t count_failures(std::span<const ScenarioStats> stats, double eps,
                                   double zeta, std::size_t target_index, const Vec& scale,
                                   int threads) {
  std::atomic<std::int64_t> failures{0};
  parallel_for_chunks(stats.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::int64_t local = 0;
    for (std::size_t i = begin; i < end; ++i)
      local += constraint_g(stats[i], eps, zeta, target_index, scale);
    failures.fetch_add(local, std::memory_order_relaxed);
  });
  return failures.load();
}

}  // namespace detail

/// Algorithm: scan Theta in lexicographic order and return the first point
/// whose failure count over the first N_s stats records is <= m.
///
/// Uses exactly N_s = sample_count(params, |Theta|) records; throws
/// InsufficientScenarios when fewer are supplied. On success theta* is the
/// first feasible grid point; otherwise the minimal observed failure count is
/// reported with success = false.
inline TargetResult certify_target(std::span<const ScenarioStats> stats, const DesignGrid& grid,
                                   const CertParams& params, std::size_t target_index,
                                   const Vec& scale, int threads = 1,
                                   const std::string& target_name = {}) {
  const std::int64_t needed = sample_count(params, static_cast<std::int64_t>(grid.size()));
  if (static_cast<std::int64_t>(stats.size()) < needed)
    throw InsufficientScenarios("have " + std::to_string(stats.size()) +
                                " scenario records, certification needs " +
                                std::to_string(needed));
  const std::span<const ScenarioStats> used = stats.subspan(0, static_cast<std::size_t>(needed));

  TargetResult result;
  result.target_name = target_name;
  std::int64_t best_failures = -1;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto [eps, zeta] = grid.point(j);
    const std::int64_t failures =
        detail::count_failures(used, eps, zeta, target_index, scale, threads);
    result.scanned_count = j + 1;
    if (best_failures < 0 || failures < best_failures) best_failures = failures;
    if (failures <= params.max_failures) {
      result.success = true;
      result.eps_star = eps;
      result.zeta_star = zeta;
      result.failure_count = failures;
      for (const ScenarioStats& st : used)
        if (constraint_g(st, eps, zeta, target_index, scale) != 0)
          result.failure_ids.push_back(st.id);
      return result;
    }
  }
  result.failure_count = best_failures;
  return result;
}

}  // namespace obscert
