#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "obscert/certify.hpp"
#include "obscert/deadzone.hpp"
#include "obscert/errors.hpp"
#include "obscert/model.hpp"
#include "obscert/sampling.hpp"

namespace obscert {

using json = nlohmann::json;

struct GridSpec {
  double eps_exp_lo = -4.0;
  double eps_exp_hi = 0.0;
  int n_eps = 20;
  double zeta_exp_lo = -4.0;
  double zeta_exp_hi = -1.0;
  int n_zeta = 10;

  DesignGrid build() const {
    return build_design_grid(eps_exp_lo, eps_exp_hi, n_eps, zeta_exp_lo, zeta_exp_hi, n_zeta);
  }
};

struct MheDemoConfig {
  std::size_t steps = 40;
  int multistarts = 16;
  int max_evals = 400;
  double zeta = 0.0;
  std::string target = "z1";
  std::optional<Vec> x0;      // default: state-box midpoint
  std::optional<Vec> true_p;  // default: nominal parameters
};

/// One fully-resolved experiment (a single row of the sweep product).
struct ExperimentRow {
  std::string model = "cstr";
  double tau = 0.05;
  int substeps = 5;
  SamplingConfig sampling;
  CertParams cert;
  GridSpec grid;
  int dz_exponent = 1;  // r
  Vec dz_scale;         // empty = all-ones at model resolution
  BracketSemantics bracket = BracketSemantics::RealDivision;
  NormChoice norm = NormChoice::Euclidean;
  std::vector<std::string> targets;  // names to certify; empty = all registered
  int threads = 0;
  std::string out_dir = "out";
  bool timings = true;
  MheDemoConfig mhe;
};

/// Parsed experiment file: a prototype row plus sweep lists whose cross
/// product (in the declared field order) defines the experiment rows.
struct ExperimentConfig {
  ExperimentRow base;
  std::vector<std::size_t> horizon_sweep;
  std::vector<double> noise_sweep;
  std::vector<ParamMode> param_mode_sweep;
  std::vector<double> rho_sweep;
  std::vector<double> std_p_sweep;
  std::vector<InputMode> input_mode_sweep;
  std::vector<double> eta_sweep;

  std::vector<ExperimentRow> rows() const {
    std::vector<ExperimentRow> out;
    for (std::size_t n : horizon_sweep)
      for (double noise : noise_sweep)
        for (ParamMode pm : param_mode_sweep)
          for (double rho : rho_sweep)
            for (double std_p : std_p_sweep)
              for (InputMode im : input_mode_sweep)
                for (double eta : eta_sweep) {
                  ExperimentRow r = base;
                  r.sampling.horizon = n;
                  r.sampling.noise_level = noise;
                  r.sampling.param_mode = pm;
                  r.sampling.rho = rho;
                  r.sampling.std_p = std_p;
                  r.sampling.input_mode = im;
                  r.cert.eta = eta;
                  out.push_back(std::move(r));
                }
    return out;
  }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
}

template <typename T>
inline T get_scalar(const json& obj, const std::string& path, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + key, e.what());
  }
}

/// Scalar-or-array field: always returns a non-empty list.
inline std::vector<double> get_sweep(const json& obj, const std::string& path,
                                     const std::string& key, double fallback) {
  if (!obj.contains(key)) return {fallback};
  const json& v = obj.at(key);
  try {
    if (v.is_array()) {
      auto out = v.get<std::vector<double>>();
      if (out.empty()) throw ConfigError(path + key, "sweep list must be non-empty");
      return out;
    }
    return {v.get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError(path + key, e.what());
  }
}

inline std::vector<std::string> get_string_sweep(const json& obj, const std::string& path,
                                                 const std::string& key,
                                                 const std::string& fallback) {
  if (!obj.contains(key)) return {fallback};
  const json& v = obj.at(key);
  try {
    if (v.is_array()) {
      auto out = v.get<std::vector<std::string>>();
      if (out.empty()) throw ConfigError(path + key, "sweep list must be non-empty");
      return out;
    }
    return {v.get<std::string>()};
  } catch (const json::exception& e) {
    throw ConfigError(path + key, e.what());
  }
}

inline ParamMode parse_param_mode(const std::string& s, const std::string& path) {
  if (s == "uniform") return ParamMode::Uniform;
  if (s == "gaussian") return ParamMode::Gaussian;
  throw ConfigError(path, "p_mode must be 'uniform' or 'gaussian', got '" + s + "'");
}

inline InputMode parse_input_mode(const std::string& s, const std::string& path) {
  if (s == "rand") return InputMode::Uniform;
  if (s == "fourier") return InputMode::Fourier;
  throw ConfigError(path, "u_mode must be 'rand' or 'fourier', got '" + s + "'");
}

inline NoiseMode parse_noise_mode(const std::string& s, const std::string& path) {
  if (s == "uniform") return NoiseMode::Uniform;
  if (s == "gaussian") return NoiseMode::Gaussian;
  throw ConfigError(path, "noise mode must be 'uniform' or 'gaussian', got '" + s + "'");
}

}  // namespace detail

/// Parses and validates an experiment config. Unknown keys are hard errors.
inline ExperimentConfig parse_config_json(const json& root) {
  using detail::get_scalar;
  if (!root.is_object()) throw ConfigError("", "config root must be a JSON object");
  detail::reject_unknown_keys(
      root, "",
      {"model", "seed", "threads", "out_dir", "horizon", "tau", "substeps", "max_redraws",
       "timings", "noise", "param", "input", "cert", "grid", "deadzone", "norm", "targets",
       "mhe"});

  ExperimentConfig cfg;
  ExperimentRow& row = cfg.base;

  row.model = get_scalar<std::string>(root, "", "model", "cstr");
  row.sampling.master_seed = get_scalar<std::uint64_t>(root, "", "seed", 123456789ULL);
  row.threads = get_scalar<int>(root, "", "threads", 0);
  row.out_dir = get_scalar<std::string>(root, "", "out_dir", "out");
  row.tau = get_scalar<double>(root, "", "tau", 0.05);
  row.substeps = get_scalar<int>(root, "", "substeps", 5);
  row.sampling.max_redraws = get_scalar<int>(root, "", "max_redraws", 100);
  row.timings = get_scalar<bool>(root, "", "timings", true);
  if (row.tau <= 0.0) throw ConfigError("tau", "sampling period must be > 0");
  if (row.substeps < 1) throw ConfigError("substeps", "substeps must be >= 1");
  if (row.sampling.max_redraws < 1) throw ConfigError("max_redraws", "must be >= 1");

  {
    auto horizons = detail::get_sweep(root, "", "horizon", 20.0);
    for (double n : horizons) {
      if (n < 1 || n != static_cast<double>(static_cast<std::size_t>(n)))
        throw ConfigError("horizon", "must be a positive integer");
      cfg.horizon_sweep.push_back(static_cast<std::size_t>(n));
    }
  }

  {
    const json noise = root.contains("noise") ? root.at("noise") : json::object();
    detail::reject_unknown_keys(noise, "noise", {"mode", "level"});
    row.sampling.noise_mode =
        detail::parse_noise_mode(get_scalar<std::string>(noise, "noise.", "mode", "uniform"),
                                 "noise.mode");
    cfg.noise_sweep = detail::get_sweep(noise, "noise.", "level", 0.001);
    for (double v : cfg.noise_sweep)
      if (v < 0.0) throw ConfigError("noise.level", "must be >= 0");
  }

  {
    const json param = root.contains("param") ? root.at("param") : json::object();
    detail::reject_unknown_keys(param, "param", {"mode", "rho", "std"});
    for (const std::string& s :
         detail::get_string_sweep(param, "param.", "mode", "uniform"))
      cfg.param_mode_sweep.push_back(detail::parse_param_mode(s, "param.mode"));
    cfg.rho_sweep = detail::get_sweep(param, "param.", "rho", 0.05);
    cfg.std_p_sweep = detail::get_sweep(param, "param.", "std", 0.2);
    for (double v : cfg.rho_sweep)
      if (v < 0.0 || v >= 1.0) throw ConfigError("param.rho", "must lie in [0,1)");
    for (double v : cfg.std_p_sweep)
      if (v < 0.0) throw ConfigError("param.std", "must be >= 0");
  }

  {
    const json input = root.contains("input") ? root.at("input") : json::object();
    detail::reject_unknown_keys(input, "input", {"mode", "n_f", "beta_bar", "offset"});
    for (const std::string& s :
         detail::get_string_sweep(input, "input.", "mode", "fourier"))
      cfg.input_mode_sweep.push_back(detail::parse_input_mode(s, "input.mode"));
    row.sampling.n_f = get_scalar<int>(input, "input.", "n_f", 10);
    row.sampling.beta_bar = get_scalar<double>(input, "input.", "beta_bar", 0.2);
    if (row.sampling.n_f < 1) throw ConfigError("input.n_f", "must be >= 1");
    if (row.sampling.beta_bar < 0.0) throw ConfigError("input.beta_bar", "must be >= 0");
    if (input.contains("offset")) {
      const json& off = input.at("offset");
      if (off.is_string()) {
        if (off.get<std::string>() != "midpoint")
          throw ConfigError("input.offset", "must be a number or 'midpoint'");
        row.sampling.input_offset = std::nullopt;  // resolved to U midpoint per model
      } else if (off.is_number()) {
        row.sampling.input_offset = off.get<double>();
      } else {
        throw ConfigError("input.offset", "must be a number or 'midpoint'");
      }
    }
  }

  {
    const json cert = root.contains("cert") ? root.at("cert") : json::object();
    detail::reject_unknown_keys(cert, "cert", {"eta", "delta", "m"});
    cfg.eta_sweep = detail::get_sweep(cert, "cert.", "eta", 0.01);
    row.cert.delta = get_scalar<double>(cert, "cert.", "delta", 0.001);
    row.cert.max_failures = get_scalar<int>(cert, "cert.", "m", 10);
    for (double eta : cfg.eta_sweep)
      if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("cert.eta", "must lie in (0,1)");
    if (!(row.cert.delta > 0.0 && row.cert.delta < 1.0))
      throw ConfigError("cert.delta", "must lie in (0,1)");
    if (row.cert.max_failures < 0) throw ConfigError("cert.m", "must be >= 0");
  }

  {
    const json grid = root.contains("grid") ? root.at("grid") : json::object();
    detail::reject_unknown_keys(grid, "grid", {"eps_exp", "n_eps", "zeta_exp", "n_zeta"});
    if (grid.contains("eps_exp")) {
      auto e = grid.at("eps_exp").get<std::vector<double>>();
      if (e.size() != 2) throw ConfigError("grid.eps_exp", "must be [low, high]");
      row.grid.eps_exp_lo = e[0];
      row.grid.eps_exp_hi = e[1];
    }
    if (grid.contains("zeta_exp")) {
      auto z = grid.at("zeta_exp").get<std::vector<double>>();
      if (z.size() != 2) throw ConfigError("grid.zeta_exp", "must be [low, high]");
      row.grid.zeta_exp_lo = z[0];
      row.grid.zeta_exp_hi = z[1];
    }
    row.grid.n_eps = get_scalar<int>(grid, "grid.", "n_eps", 20);
    row.grid.n_zeta = get_scalar<int>(grid, "grid.", "n_zeta", 10);
    if (row.grid.n_eps < 1 || row.grid.n_zeta < 1)
      throw ConfigError("grid", "n_eps and n_zeta must be >= 1");
    if (row.grid.eps_exp_lo > row.grid.eps_exp_hi ||
        row.grid.zeta_exp_lo > row.grid.zeta_exp_hi)
      throw ConfigError("grid", "exponent low bound exceeds high bound");
  }

  {
    const json dz = root.contains("deadzone") ? root.at("deadzone") : json::object();
    detail::reject_unknown_keys(dz, "deadzone", {"r", "scale", "bracket"});
    row.dz_exponent = get_scalar<int>(dz, "deadzone.", "r", 1);
    if (row.dz_exponent < 1) throw ConfigError("deadzone.r", "must be >= 1");
    if (dz.contains("scale")) {
      row.dz_scale = dz.at("scale").get<Vec>();
      bool any_positive = false;
      for (double s : row.dz_scale) {
        if (s < 0.0) throw ConfigError("deadzone.scale", "entries must be >= 0");
        any_positive = any_positive || s > 0.0;
      }
      if (!any_positive) throw ConfigError("deadzone.scale", "needs a positive entry");
    }
    const std::string b = get_scalar<std::string>(dz, "deadzone.", "bracket", "real");
    if (b == "real")
      row.bracket = BracketSemantics::RealDivision;
    else if (b == "floor")
      row.bracket = BracketSemantics::FloorDivision;
    else
      throw ConfigError("deadzone.bracket", "must be 'real' or 'floor'");
  }

  {
    const std::string n = get_scalar<std::string>(root, "", "norm", "euclidean");
    if (n == "euclidean")
      row.norm = NormChoice::Euclidean;
    else if (n == "max")
      row.norm = NormChoice::Max;
    else
      throw ConfigError("norm", "must be 'euclidean' or 'max'");
  }

  if (root.contains("targets")) {
    row.targets = root.at("targets").get<std::vector<std::string>>();
    if (row.targets.empty()) throw ConfigError("targets", "must be non-empty when given");
  }

  {
    const json mhe = root.contains("mhe") ? root.at("mhe") : json::object();
    detail::reject_unknown_keys(
        mhe, "mhe", {"steps", "multistarts", "max_evals", "zeta", "target", "x0", "true_p"});
    row.mhe.steps = get_scalar<std::size_t>(mhe, "mhe.", "steps", 40);
    row.mhe.multistarts = get_scalar<int>(mhe, "mhe.", "multistarts", 16);
    row.mhe.max_evals = get_scalar<int>(mhe, "mhe.", "max_evals", 400);
    row.mhe.zeta = get_scalar<double>(mhe, "mhe.", "zeta", 0.0);
    row.mhe.target = get_scalar<std::string>(mhe, "mhe.", "target", "z1");
    if (mhe.contains("x0")) row.mhe.x0 = mhe.at("x0").get<Vec>();
    if (mhe.contains("true_p")) row.mhe.true_p = mhe.at("true_p").get<Vec>();
    if (row.mhe.multistarts < 1) throw ConfigError("mhe.multistarts", "must be >= 1");
    if (row.mhe.max_evals < 1) throw ConfigError("mhe.max_evals", "must be >= 1");
    if (row.mhe.zeta < 0.0) throw ConfigError("mhe.zeta", "must be >= 0");
  }

  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  return parse_config_json(root);
}

namespace detail {

inline void hash_append(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;  // FNV-1a 64
  }
  h ^= '|';
  h *= 0x100000001B3ULL;
}

inline std::string num_repr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Hash of every field that influences scenario statistics (model, timing,
/// horizon, distributions, seed, bracket, norm) but not certification-only
/// fields (eta, delta, m, grid, scale, r) - one stats cache serves any
/// certification setting over the same scenario law.
inline std::uint64_t stats_config_hash(const ExperimentRow& row, const SystemModel& model) {
  using detail::hash_append;
  using detail::num_repr;
  std::uint64_t h = 0xCBF29CE484222325ULL;
  hash_append(h, "v1");
  hash_append(h, model.name);
  for (double v : model.param_nominal) hash_append(h, num_repr(v));
  for (double v : model.state_box.lo) hash_append(h, num_repr(v));
  for (double v : model.state_box.hi) hash_append(h, num_repr(v));
  for (double v : model.input_box.lo) hash_append(h, num_repr(v));
  for (double v : model.input_box.hi) hash_append(h, num_repr(v));
  for (const TargetMap& t : model.targets) hash_append(h, t.name);
  hash_append(h, num_repr(row.tau));
  hash_append(h, std::to_string(row.substeps));
  hash_append(h, std::to_string(row.sampling.horizon));
  hash_append(h, std::to_string(row.sampling.master_seed));
  hash_append(h, row.sampling.noise_mode == NoiseMode::Uniform ? "nu" : "ng");
  hash_append(h, num_repr(row.sampling.noise_level));
  hash_append(h, row.sampling.param_mode == ParamMode::Uniform ? "pu" : "pg");
  hash_append(h, num_repr(row.sampling.param_mode == ParamMode::Uniform ? row.sampling.rho
                                                                        : row.sampling.std_p));
  hash_append(h, row.sampling.input_mode == InputMode::Uniform ? "ur" : "uf");
  if (row.sampling.input_mode == InputMode::Fourier) {
    hash_append(h, std::to_string(row.sampling.n_f));
    hash_append(h, num_repr(row.sampling.beta_bar));
    hash_append(h, row.sampling.input_offset ? num_repr(*row.sampling.input_offset) : "mid");
  }
  hash_append(h, row.bracket == BracketSemantics::RealDivision ? "real" : "floor");
  hash_append(h, row.norm == NormChoice::Euclidean ? "l2" : "max");
  return h;
}

}  // namespace obscert
