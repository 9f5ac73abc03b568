#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "obscert/errors.hpp"
#include "obscert/model.hpp"
#include "obscert/profile.hpp"
#include "obscert/rng.hpp"

namespace obscert {

enum class ParamMode { Uniform, Gaussian };
enum class InputMode { Uniform, Fourier };
enum class NoiseMode { Uniform, Gaussian };

/// Distribution choices and constants defining the sampling law W.
struct SamplingConfig {
  ParamMode param_mode = ParamMode::Uniform;
  double rho = 0.05;    // uniform box relative half-width
  double std_p = 0.2;   // gaussian relative std-dev

  InputMode input_mode = InputMode::Fourier;
  int n_f = 10;
  double beta_bar = 0.2;
  /// Constant added to the Fourier sum before clamping to U.
  /// nullopt selects the U-box midpoint; 0 is the paper-literal series.
  std::optional<double> input_offset = 0.0;

  NoiseMode noise_mode = NoiseMode::Uniform;
  double noise_level = 0.001;  // half-range nu_bar (uniform) or std-dev sigma (gaussian)

  std::size_t horizon = 20;  // N
  std::uint64_t master_seed = 123456789ULL;

  /// Per-id attempt budget covering both draw-level guard rejections and
  /// upstream simulation-failure resampling.
  int max_redraws = 100;
};

/// One sampled certification scenario w = (q, xi, p), q = (q_x, q_p, q_u, q_nu).
/// The true tuple (q_x, q_p) and candidate tuple (xi, p) share q_u and q_nu,
/// making them comparable by construction.
struct Scenario {
  std::uint64_t id = 0;
  Vec q_x;         // true initial state
  Vec q_p;         // true parameter vector
  Profile q_u;     // input profile, n_u x N
  Profile q_nu;    // measurement noise profile, n_y x N
  Vec xi;          // candidate initial state
  Vec p;           // candidate parameter vector
  std::uint32_t attempt = 0;   // accepted draw attempt for this id
  std::uint32_t param_redraws = 0;  // gaussian draws rejected for sign flips
};

inline Vec sample_state(const Box& box, SubStream& s) {
  Vec x(box.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s.uniform(box.lo[i], box.hi[i]);
  return x;
}

inline Vec sample_param_uniform(const Vec& p_nom, double rho, SubStream& s) {
  Vec p(p_nom.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = s.uniform((1.0 - rho) * p_nom[i], (1.0 + rho) * p_nom[i]);
  return p;
}

/// p_i = (1 + std_p * nu) * p_nom_i with nu standard normal. Draws that flip
/// the sign of a component (possible for huge std_p) are redrawn per component
/// and counted in *rejects.
inline Vec sample_param_gaussian(const Vec& p_nom, double std_p, SubStream& s,
                                 std::uint32_t* rejects = nullptr) {
  Vec p(p_nom.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double factor = 1.0 + std_p * s.normal();
    int guard = 0;
    while (factor <= 0.0) {
      if (rejects) ++*rejects;
      if (++guard > 100000)
        throw std::runtime_error("gaussian parameter sampling cannot produce a positive draw");
      factor = 1.0 + std_p * s.normal();
    }
    p[i] = factor * p_nom[i];
  }
  return p;
}

inline Profile sample_input_uniform(const Box& input_box, std::size_t horizon, SubStream& s) {
  Profile u(input_box.size(), horizon);
  for (std::size_t k = 0; k < horizon; ++k)
    for (std::size_t c = 0; c < input_box.size(); ++c)
      u.at(c, k) = s.uniform(input_box.lo[c], input_box.hi[c]);
  return u;
}

/// Truncated Fourier series with random amplitudes and phases, clamped to U:
/// u_i = Sat_U[offset + sum_j beta_j sin(2 j pi i / N + phi_j)], i = 1..N,
/// beta_j ~ U[0, beta_bar] per component, phi_j ~ U[0, 2 pi] shared.
inline Profile sample_input_fourier(const Box& input_box, std::size_t horizon, int n_f,
                                    double beta_bar, double offset, SubStream& s) {
  const std::size_t n_u = input_box.size();
  std::vector<Vec> beta(static_cast<std::size_t>(n_f), Vec(n_u));
  Vec phi(static_cast<std::size_t>(n_f));
  for (int j = 0; j < n_f; ++j) {
    for (std::size_t c = 0; c < n_u; ++c) beta[j][c] = s.uniform(0.0, beta_bar);
    phi[j] = s.uniform(0.0, 2.0 * std::numbers::pi);
  }
  Profile u(n_u, horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    const double i = static_cast<double>(k + 1);
    for (std::size_t c = 0; c < n_u; ++c) {
      double v = offset;
      for (int j = 0; j < n_f; ++j)
        v += beta[j][c] *
             std::sin(2.0 * (j + 1) * std::numbers::pi * i / static_cast<double>(horizon) +
                      phi[j]);
      u.at(c, k) = input_box.clamp(c, v);
    }
  }
  return u;
}

inline Profile sample_noise(std::size_t n_y, std::size_t horizon, NoiseMode mode, double level,
                            SubStream& s) {
  Profile nu(n_y, horizon);
  for (std::size_t i = 0; i < n_y; ++i)
    for (std::size_t k = 0; k < horizon; ++k)
      nu.at(i, k) = mode == NoiseMode::Uniform ? s.uniform(-level, level) : level * s.normal();
  return nu;
}

namespace detail {

inline Vec draw_param(const SystemModel& model, const SamplingConfig& cfg, SubStream& s,
                      std::uint32_t* rejects) {
  return cfg.param_mode == ParamMode::Uniform
             ? sample_param_uniform(model.param_nominal, cfg.rho, s)
             : sample_param_gaussian(model.param_nominal, cfg.std_p, s, rejects);
}

}  // namespace detail

/// Draws the scenario for (cfg.master_seed, id), starting at `start_attempt`.
///
/// A deterministic function of (seed, id, attempt): every attempt uses fresh
/// substreams, so redraws never perturb other scenarios. Draw-level guard
/// rejections (model state guard on q_x or xi) advance the attempt counter;
/// the same counter is advanced by the caller when simulation fails, and
/// ResampleExhausted is raised once cfg.max_redraws attempts are spent.
inline Scenario draw_scenario(const SystemModel& model, const SamplingConfig& cfg,
                              std::uint64_t id, std::uint32_t start_attempt = 0) {
  const double offset =
      cfg.input_offset ? *cfg.input_offset : model.input_box.midpoint(0);
  for (std::uint32_t attempt = start_attempt;
       attempt < static_cast<std::uint32_t>(cfg.max_redraws); ++attempt) {
    Scenario sc;
    sc.id = id;
    sc.attempt = attempt;

    SubStream s_state(cfg.master_seed, id, StreamRole::TrueState, attempt);
    SubStream s_param(cfg.master_seed, id, StreamRole::TrueParam, attempt);
    SubStream s_input(cfg.master_seed, id, StreamRole::InputProfile, attempt);
    SubStream s_noise(cfg.master_seed, id, StreamRole::NoiseProfile, attempt);
    SubStream s_cstate(cfg.master_seed, id, StreamRole::CandState, attempt);
    SubStream s_cparam(cfg.master_seed, id, StreamRole::CandParam, attempt);

    sc.q_x = sample_state(model.state_box, s_state);
    sc.q_p = detail::draw_param(model, cfg, s_param, &sc.param_redraws);
    sc.q_u = cfg.input_mode == InputMode::Uniform
                 ? sample_input_uniform(model.input_box, cfg.horizon, s_input)
                 : sample_input_fourier(model.input_box, cfg.horizon, cfg.n_f, cfg.beta_bar,
                                        offset, s_input);
    sc.q_nu = sample_noise(model.n_y, cfg.horizon, cfg.noise_mode, cfg.noise_level, s_noise);
    sc.xi = sample_state(model.state_box, s_cstate);
    sc.p = detail::draw_param(model, cfg, s_cparam, &sc.param_redraws);

    if (model.state_guard && (!model.state_guard(sc.q_x) || !model.state_guard(sc.xi)))
      continue;
    return sc;
  }
  throw ResampleExhausted(id, "scenario " + std::to_string(id) + " rejected " +
                                  std::to_string(cfg.max_redraws) + " consecutive redraws");
}

}  // namespace obscert
