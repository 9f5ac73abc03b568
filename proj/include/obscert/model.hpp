#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "obscert/errors.hpp"
#include "obscert/profile.hpp"

namespace obscert {

using RhsFn = std::function<void(const Vec& x, const Vec& u, const Vec& p, Vec& dx)>;
using OutputFn = std::function<void(const Vec& x, const Vec& u, const Vec& p, Vec& y)>;
using TargetFn = std::function<void(const Vec& x, const Vec& p, Vec& z)>;
using GuardFn = std::function<bool(const Vec& x)>;

/// A named observation target z = T(x, p).
struct TargetMap {
  std::string name;
  std::size_t dim = 0;
  TargetFn fn;
};

/// Continuous-time system with sampled-data semantics: `rhs` is integrated
/// with fixed-step RK4 over one sampling period per discrete step.
struct SystemModel {
  std::string name;
  std::size_t n_x = 0;
  std::size_t n_u = 0;
  std::size_t n_y = 0;
  std::size_t n_p = 0;

  Box state_box;  // X, shapes sampling only; states are never clamped to it
  Box input_box;  // U
  Vec param_nominal;

  double sampling_period = 0.05;
  int substeps = 5;

  RhsFn rhs;
  OutputFn output_map;
  std::vector<TargetMap> targets;

  /// Optional admissibility guard checked on every substep result
  /// (and on sampled initial states). Returns true when admissible.
  GuardFn state_guard;

  std::size_t target_index(const std::string& target_name) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (targets[i].name == target_name) return i;
    throw std::out_of_range("unknown target '" + target_name + "' for model " + name);
  }
};

namespace detail {

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// One discrete step x_{k+1} = f(x_k, u_k, p): RK4 over one sampling period.
///
/// Throws NonFiniteState (step_index = 0) if any stage or substep result is
/// non-finite or violates the model's state guard; the caller is expected to
/// reject the scenario and resample.
inline Vec step(const SystemModel& model, const Vec& x, const Vec& u, const Vec& p) {
  const double h = model.sampling_period / model.substeps;
  const std::size_t n = model.n_x;
  Vec y = x, k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int s = 0; s < model.substeps; ++s) {
    model.rhs(y, u, p, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    model.rhs(tmp, u, p, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    model.rhs(tmp, u, p, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    model.rhs(tmp, u, p, k4);
    for (std::size_t i = 0; i < n; ++i)
      y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!detail::all_finite(y)) throw NonFiniteState(0, "non-finite state in RK4 substep");
    if (model.state_guard && !model.state_guard(y))
      throw NonFiniteState(0, "state guard violated in RK4 substep");
  }
  return y;
}

/// Simulates N steps from x0 under `u_profile` (length >= N).
///
/// Returns the state profile X_0..X_N (n_x x (N+1)) and the noise-free output
/// profile Y_0..Y_{N-1} (n_y x N) with Y_i = h(X_i, u_i, p).
/// NonFiniteState failures are rethrown with the offending step index.
inline std::pair<Profile, Profile> simulate_flow(const SystemModel& model, const Vec& x0,
                                                 const Profile& u_profile, const Vec& p,
                                                 std::size_t horizon) {
  if (u_profile.length() < horizon)
    throw std::invalid_argument("input profile shorter than horizon");
  Profile states(model.n_x, horizon + 1);
  Profile outputs(model.n_y, horizon);
  Vec x = x0;
  Vec u(model.n_u), y(model.n_y);
  for (std::size_t i = 0; i <= horizon; ++i) {
    for (std::size_t c = 0; c < model.n_x; ++c) states.at(c, i) = x[c];
    if (i == horizon) break;
    u = u_profile.column(i);
    model.output_map(x, u, p, y);
    for (std::size_t c = 0; c < model.n_y; ++c) outputs.at(c, i) = y[c];
    try {
      x = step(model, x, u, p);
    } catch (const NonFiniteState& e) {
      throw NonFiniteState(i, e.what());
    }
  }
  return {std::move(states), std::move(outputs)};
}

/// Evaluates a registered observation target.
inline Vec eval_target(const SystemModel& model, std::size_t target_index, const Vec& x,
                       const Vec& p) {
  const TargetMap& t = model.targets.at(target_index);
  Vec z(t.dim);
  t.fn(x, p, z);
  return z;
}

/// Continuous stirred-tank reactor with parallel reaction, dimensionless form.
/// Measured output is x2; u is measured separately and carried in the scenario.
inline SystemModel cstr_model() {
  SystemModel m;
  m.name = "cstr";
  m.n_x = 3;
  m.n_u = 1;
  m.n_y = 1;
  m.n_p = 3;
  m.state_box = Box{{0.0, 0.0, 0.05}, {0.6, 0.3, 0.2}};
  m.input_box = Box{{0.049}, {0.449}};
  m.param_nominal = {1.0e4, 4.0e2, 0.55};
  m.sampling_period = 0.05;
  m.substeps = 5;
  // x3 >= 1e-6 keeps exp(-1/x3) well defined
  m.state_guard = [](const Vec& x) { return x[2] >= 1e-6; };
  m.rhs = [](const Vec& x, const Vec& u, const Vec& p, Vec& dx) {
    const double e1 = std::exp(-1.0 / x[2]);
    const double e2 = std::exp(-p[2] / x[2]);
    const double reaction = p[0] * x[0] * x[0] * e1;
    dx[0] = 1.0 - reaction - p[1] * e2 - x[0];
    dx[1] = reaction - x[1];
    dx[2] = u[0] - x[2];
  };
  m.output_map = [](const Vec& x, const Vec& /*u*/, const Vec& /*p*/, Vec& y) {
    y[0] = x[1];
  };
  m.targets = {
      {"z1", 3, [](const Vec& x, const Vec&, Vec& z) { z.assign(x.begin(), x.end()); }},
      {"z2", 1, [](const Vec& x, const Vec&, Vec& z) { z[0] = x[0]; }},
      {"z3", 1, [](const Vec& x, const Vec&, Vec& z) { z[0] = x[2]; }},
  };
  return m;
}

namespace detail {

inline std::map<std::string, SystemModel>& model_registry() {
  static std::map<std::string, SystemModel> registry{{"cstr", cstr_model()}};
  return registry;
}

inline std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Registers a custom model for lookup by name (e.g. from the CLI config).
inline void register_model(SystemModel model) {
  std::lock_guard<std::mutex> lock(detail::registry_mutex());
  detail::model_registry()[model.name] = std::move(model);
}

inline SystemModel get_model(const std::string& name) {
  std::lock_guard<std::mutex> lock(detail::registry_mutex());
  auto& reg = detail::model_registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw std::out_of_range("unknown model '" + name + "'");
  return it->second;
}

}  // namespace obscert
