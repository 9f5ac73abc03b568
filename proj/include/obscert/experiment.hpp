#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "obscert/certify.hpp"
#include "obscert/config.hpp"
#include "obscert/deadzone.hpp"
#include "obscert/model.hpp"
#include "obscert/parallel.hpp"
#include "obscert/sampling.hpp"
#include "obscert/stats_cache.hpp"

namespace obscert {

/// Outcome of one experiment row: per-target certification results plus the
/// phase timings and sampling diagnostics.
struct RowOutcome {
  ExperimentRow row;
  std::int64_t n_scenarios = 0;  // N_s actually used
  std::size_t n_theta = 0;
  std::vector<TargetResult> targets;
  double dt1 = 0.0;  // scenario generation + stats, seconds
  double dt2 = 0.0;  // design-grid search, seconds
  std::uint64_t sim_rejections = 0;   // simulations that diverged and were resampled
  std::uint64_t draw_rejections = 0;  // draws rejected by the state guard
  std::uint64_t param_redraws = 0;    // gaussian parameter sign-flip redraws
  bool cache_hit = false;

  bool all_success() const {
    for (const TargetResult& t : targets)
      if (!t.success) return false;
    return !targets.empty();
  }
};

/// Model instance for a row: registry lookup plus the row's integrator fields.
inline SystemModel resolve_model(const ExperimentRow& row) {
  SystemModel model = get_model(row.model);
  model.sampling_period = row.tau;
  model.substeps = row.substeps;
  return model;
}

inline Vec resolve_scale(const ExperimentRow& row, const SystemModel& model) {
  if (row.dz_scale.empty()) return Vec(model.n_y, 1.0);
  if (row.dz_scale.size() != model.n_y)
    throw ConfigError("deadzone.scale", "size must equal the model output count");
  return row.dz_scale;
}

inline std::vector<std::string> resolve_targets(const ExperimentRow& row,
                                                const SystemModel& model) {
  if (!row.targets.empty()) return row.targets;
  std::vector<std::string> names;
  for (const TargetMap& t : model.targets) names.push_back(t.name);
  return names;
}

namespace detail {

struct SampleCounters {
  std::atomic<std::uint64_t> sim_rejections{0};
  std::atomic<std::uint64_t> draw_rejections{0};
  std::atomic<std::uint64_t> param_redraws{0};
};

/// Draws scenario `id` and reduces it to stats, resampling deterministically
/// (fresh attempt substreams) when the simulation diverges.
inline ScenarioStats stats_with_resample(const SystemModel& model, const ExperimentRow& row,
                                         std::uint64_t id, SampleCounters* counters) {
  std::uint32_t attempt = 0;
  std::uint32_t sim_failures = 0;
  while (true) {
    const Scenario sc = draw_scenario(model, row.sampling, id, attempt);
    try {
      const ScenarioStats st = scenario_stats(sc, model, row.norm, row.bracket);
      if (counters) {
        // attempts [0, sc.attempt) were rejected: sim_failures at simulation
        // level, the rest by the draw-level guard
        counters->sim_rejections.fetch_add(sim_failures, std::memory_order_relaxed);
        counters->draw_rejections.fetch_add(sc.attempt - sim_failures,
                                            std::memory_order_relaxed);
        counters->param_redraws.fetch_add(sc.param_redraws, std::memory_order_relaxed);
      }
      return st;
    } catch (const NonFiniteState&) {
      ++sim_failures;
      attempt = sc.attempt + 1;
      if (attempt >= static_cast<std::uint32_t>(row.sampling.max_redraws))
        throw ResampleExhausted(id, "scenario " + std::to_string(id) + " rejected " +
                                        std::to_string(row.sampling.max_redraws) +
                                        " consecutive redraws");
    }
  }
}

}  // namespace detail

/// Generates stats for ids [first, first+count) in parallel; slot order is by
/// id, so thread placement never affects the result.
inline std::vector<ScenarioStats> compute_stats(const SystemModel& model,
                                                const ExperimentRow& row, std::uint64_t first,
                                                std::uint64_t count,
                                                detail::SampleCounters* counters = nullptr) {
  std::vector<ScenarioStats> stats(count);
  parallel_for_chunks(count, row.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      stats[i] = detail::stats_with_resample(model, row, first + i, counters);
  });
  return stats;
}

/// Runs one experiment row end to end: scenario bound, stats (cached when a
/// cache path is given and its config hash matches), then the per-target
/// design-grid search.
inline RowOutcome run_experiment(const ExperimentRow& row, const std::string& cache_path = "") {
  using clock = std::chrono::steady_clock;
  const SystemModel model = resolve_model(row);
  const Vec scale = resolve_scale(row, model);
  const std::vector<std::string> target_names = resolve_targets(row, model);
  const DesignGrid grid = row.grid.build();

  RowOutcome out;
  out.row = row;
  out.n_theta = grid.size();
  out.n_scenarios = sample_count(row.cert, static_cast<std::int64_t>(grid.size()));

  StatsCacheHeader header;
  header.config_hash = stats_config_hash(row, model);
  header.model_name = model.name;
  header.horizon = static_cast<std::uint32_t>(row.sampling.horizon);
  header.n_y = static_cast<std::uint32_t>(model.n_y);
  header.n_targets = static_cast<std::uint32_t>(model.targets.size());

  const auto t0 = clock::now();
  std::vector<ScenarioStats> stats;
  detail::SampleCounters counters;
  if (!cache_path.empty()) {
    if (auto cached = load_stats_cache(cache_path, header)) {
      stats = std::move(*cached);
      out.cache_hit = true;
    } else if (std::filesystem::exists(cache_path)) {
      std::cerr << "obscert: cache " << cache_path
                << " does not match this configuration; regenerating\n";
    }
  }
  const std::uint64_t needed = static_cast<std::uint64_t>(out.n_scenarios);
  if (stats.size() < needed) {
    auto fresh = compute_stats(model, row, stats.size(), needed - stats.size(), &counters);
    if (!stats.empty()) out.cache_hit = true;  // extended an existing cache
    else out.cache_hit = false;
    stats.insert(stats.end(), std::make_move_iterator(fresh.begin()),
                 std::make_move_iterator(fresh.end()));
    if (!cache_path.empty()) save_stats_cache(cache_path, header, stats);
  }
  out.dt1 = std::chrono::duration<double>(clock::now() - t0).count();
  out.sim_rejections = counters.sim_rejections.load();
  out.draw_rejections = counters.draw_rejections.load();
  out.param_redraws = counters.param_redraws.load();

  const auto t1 = clock::now();
  for (const std::string& name : target_names) {
    const std::size_t idx = model.target_index(name);
    out.targets.push_back(
        certify_target(stats, grid, row.cert, idx, scale, row.threads, name));
  }
  out.dt2 = std::chrono::duration<double>(clock::now() - t1).count();
  return out;
}

/// Failure-region dump entry: the scenario and stats behind one g = 1 at
/// theta*, for the named target.
struct FailureRecord {
  std::string target;
  Scenario scenario;
  ScenarioStats stats;
};

/// Regenerates the failing scenarios of an outcome (draws are deterministic
/// per id, so the resample loop reproduces the original content bit-for-bit).
inline std::vector<FailureRecord> failure_report(const RowOutcome& outcome) {
  const SystemModel model = resolve_model(outcome.row);
  std::vector<FailureRecord> records;
  for (const TargetResult& target : outcome.targets) {
    for (std::uint64_t id : target.failure_ids) {
      std::uint32_t attempt = 0;
      while (true) {
        const Scenario sc = draw_scenario(model, outcome.row.sampling, id, attempt);
        try {
          ScenarioStats st = scenario_stats(sc, model, outcome.row.norm, outcome.row.bracket);
          records.push_back({target.target_name, sc, std::move(st)});
          break;
        } catch (const NonFiniteState&) {
          attempt = sc.attempt + 1;
        }
      }
    }
  }
  return records;
}

namespace detail {

inline std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json vec_to_json(const Vec& v) { return json(v); }

}  // namespace detail

inline constexpr const char* kResultsCsvHeader =
    "eps1,zeta1,eps2,zeta2,eps3,zeta3,N,noise,rho,std_p,p_mode,u_mode,eta,delta,m,dt1,dt2";

/// One results.csv row in the fixed schema. The first three certified targets
/// fill the eps/zeta columns; infeasible or absent targets leave them empty.
inline std::string results_csv_row(const RowOutcome& out) {
  using detail::csv_num;
  std::string line;
  for (std::size_t t = 0; t < 3; ++t) {
    if (t < out.targets.size() && out.targets[t].success) {
      line += csv_num(out.targets[t].eps_star);
      line += ',';
      line += csv_num(out.targets[t].zeta_star);
    } else {
      line += ',';
    }
    line += ',';
  }
  const SamplingConfig& s = out.row.sampling;
  line += std::to_string(s.horizon);
  line += ',';
  line += csv_num(s.noise_level);
  line += ',';
  if (s.param_mode == ParamMode::Uniform) line += csv_num(s.rho);
  line += ',';
  if (s.param_mode == ParamMode::Gaussian) line += csv_num(s.std_p);
  line += ',';
  line += s.param_mode == ParamMode::Uniform ? "uniform" : "gaussian";
  line += ',';
  line += s.input_mode == InputMode::Uniform ? "rand" : "fourier";
  line += ',';
  line += csv_num(out.row.cert.eta);
  line += ',';
  line += csv_num(out.row.cert.delta);
  line += ',';
  line += std::to_string(out.row.cert.max_failures);
  line += ',';
  line += csv_num(out.row.timings ? out.dt1 : 0.0);
  line += ',';
  line += csv_num(out.row.timings ? out.dt2 : 0.0);
  return line;
}

inline json detail_json(const RowOutcome& out) {
  json j;
  j["model"] = out.row.model;
  j["seed"] = out.row.sampling.master_seed;
  j["n_scenarios"] = out.n_scenarios;
  j["n_theta"] = out.n_theta;
  j["horizon"] = out.row.sampling.horizon;
  j["cache_hit"] = out.cache_hit;
  j["dt1"] = out.row.timings ? out.dt1 : 0.0;
  j["dt2"] = out.row.timings ? out.dt2 : 0.0;
  j["sim_rejections"] = out.sim_rejections;
  j["draw_rejections"] = out.draw_rejections;
  j["param_redraws"] = out.param_redraws;
  j["targets"] = json::array();
  for (const TargetResult& t : out.targets) {
    json tj;
    tj["name"] = t.target_name;
    tj["success"] = t.success;
    if (t.success) {
      tj["eps_star"] = t.eps_star;
      tj["zeta_star"] = t.zeta_star;
    }
    tj["failure_count"] = t.failure_count;
    tj["scanned_count"] = t.scanned_count;
    tj["failure_ids"] = t.failure_ids;
    j["targets"].push_back(std::move(tj));
  }
  return j;
}

inline json failure_record_json(const FailureRecord& r) {
  json j;
  j["target"] = r.target;
  j["id"] = r.scenario.id;
  j["q_x"] = detail::vec_to_json(r.scenario.q_x);
  j["q_p"] = detail::vec_to_json(r.scenario.q_p);
  j["xi"] = detail::vec_to_json(r.scenario.xi);
  j["p"] = detail::vec_to_json(r.scenario.p);
  j["dz"] = detail::vec_to_json(r.stats.dz);
  j["a"] = detail::vec_to_json(r.stats.a);
  j["b"] = detail::vec_to_json(r.stats.b);
  return j;
}

/// Writes results.csv (header once, append-safe), one detail_<k>.json and one
/// failures_<k>.jsonl per row. Returns the results.csv path.
inline std::filesystem::path emit_outputs(const std::vector<RowOutcome>& outcomes,
                                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path csv_path = dir / "results.csv";
  const bool write_header =
      !std::filesystem::exists(csv_path) || std::filesystem::file_size(csv_path) == 0;
  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
  if (write_header) csv << kResultsCsvHeader << '\n';
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const RowOutcome& out = outcomes[k];
    csv << results_csv_row(out) << '\n';

    std::ofstream detail_file(dir / ("detail_" + std::to_string(k) + ".json"));
    detail_file << detail_json(out).dump(2) << '\n';

    std::ofstream failures_file(dir / ("failures_" + std::to_string(k) + ".jsonl"));
    for (const FailureRecord& r : failure_report(out))
      failures_file << failure_record_json(r).dump() << '\n';
  }
  csv.flush();
  if (!csv) throw std::runtime_error("failed writing " + csv_path.string());
  return csv_path;
}

}  // namespace obscert
