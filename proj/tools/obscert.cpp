#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "obscert/obscert.hpp"

namespace {

namespace fs = std::filesystem;
using namespace obscert;

std::string default_out_dir() {
  if (const char* env = std::getenv("OBSCERT_OUT")) return env;
  return "";
}

int run_certify(const std::string& config_path, const std::string& out_override,
                std::optional<std::uint64_t> seed_override, std::optional<int> threads_override,
                const std::string& cache_path, bool no_timings) {
  ExperimentConfig cfg = parse_config(config_path);
  if (seed_override) cfg.base.sampling.master_seed = *seed_override;
  if (threads_override) cfg.base.threads = *threads_override;
  if (no_timings) cfg.base.timings = false;
  if (!out_override.empty()) cfg.base.out_dir = out_override;
  else if (!default_out_dir().empty()) cfg.base.out_dir = default_out_dir();

  const std::vector<ExperimentRow> rows = cfg.rows();
  std::vector<RowOutcome> outcomes;
  bool any_infeasible = false;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const ExperimentRow& row = rows[k];
    std::cerr << "obscert: row " << (k + 1) << "/" << rows.size() << " (N="
              << row.sampling.horizon << ", noise=" << row.sampling.noise_level
              << ", eta=" << row.cert.eta << ")\n";
    RowOutcome out = run_experiment(row, cache_path);
    std::cerr << "obscert:   N_s=" << out.n_scenarios << " dt1=" << out.dt1
              << "s dt2=" << out.dt2 << "s";
    for (const TargetResult& t : out.targets) {
      std::cerr << "  " << t.target_name << ":";
      if (t.success)
        std::cerr << " eps*=" << t.eps_star << " zeta*=" << t.zeta_star;
      else
        std::cerr << " infeasible (min failures " << t.failure_count << ")";
    }
    std::cerr << "\n";
    any_infeasible = any_infeasible || !out.all_success();
    outcomes.push_back(std::move(out));
  }
  const fs::path csv = emit_outputs(outcomes, cfg.base.out_dir);
  std::cerr << "obscert: wrote " << csv.string() << "\n";
  return any_infeasible ? 2 : 0;
}

int run_mhe_demo(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig cfg = parse_config(config_path);
  if (!out_override.empty()) cfg.base.out_dir = out_override;
  else if (!default_out_dir().empty()) cfg.base.out_dir = default_out_dir();
  const ExperimentRow row = cfg.rows().front();
  const SystemModel model = resolve_model(row);
  const MheDemoConfig& mhe = row.mhe;

  MheTraceConfig tc;
  tc.horizon = row.sampling.horizon;
  tc.steps = mhe.steps;
  tc.target_index = model.target_index(mhe.target);
  tc.x0 = mhe.x0 ? *mhe.x0 : Vec{};
  if (tc.x0.empty()) {
    tc.x0.resize(model.n_x);
    for (std::size_t i = 0; i < model.n_x; ++i) tc.x0[i] = model.state_box.midpoint(i);
  }
  tc.true_p = mhe.true_p ? *mhe.true_p : model.param_nominal;
  tc.seed = row.sampling.master_seed;

  SubStream s_input(row.sampling.master_seed, 0, StreamRole::InputProfile);
  const double offset = row.sampling.input_offset ? *row.sampling.input_offset
                                                  : model.input_box.midpoint(0);
  tc.inputs = row.sampling.input_mode == InputMode::Uniform
                  ? sample_input_uniform(model.input_box, tc.steps, s_input)
                  : sample_input_fourier(model.input_box, tc.steps, row.sampling.n_f,
                                         row.sampling.beta_bar, offset, s_input);
  SubStream s_noise(row.sampling.master_seed, 0, StreamRole::NoiseProfile);
  tc.noise = sample_noise(model.n_y, tc.steps, row.sampling.noise_mode,
                          row.sampling.noise_level, s_noise);

  tc.spec.zeta = mhe.zeta;
  tc.spec.scale = resolve_scale(row, model);
  tc.spec.r = row.dz_exponent;
  tc.spec.bracket = row.bracket;
  tc.param_box.lo = tc.true_p;
  tc.param_box.hi = tc.true_p;
  if (row.sampling.param_mode == ParamMode::Uniform) {
    for (std::size_t i = 0; i < tc.true_p.size(); ++i) {
      tc.param_box.lo[i] = (1.0 - row.sampling.rho) * model.param_nominal[i];
      tc.param_box.hi[i] = (1.0 + row.sampling.rho) * model.param_nominal[i];
    }
  } else {
    const double half = 3.0 * row.sampling.std_p;
    for (std::size_t i = 0; i < tc.true_p.size(); ++i) {
      tc.param_box.lo[i] = std::max(1e-12, (1.0 - half) * model.param_nominal[i]);
      tc.param_box.hi[i] = (1.0 + half) * model.param_nominal[i];
    }
  }
  tc.multistart_count = mhe.multistarts;
  tc.max_evals = mhe.max_evals;

  const std::vector<MheTraceRow> trace = run_mhe_trace(model, tc);

  fs::create_directories(cfg.base.out_dir);
  const fs::path csv_path = fs::path(cfg.base.out_dir) / "mhe_trace.csv";
  std::ofstream csv(csv_path);
  const std::size_t n_z = model.targets[tc.target_index].dim;
  csv << "step";
  for (std::size_t i = 0; i < n_z; ++i) csv << ",z_true" << (i + 1);
  for (std::size_t i = 0; i < n_z; ++i) csv << ",z_hat" << (i + 1);
  csv << ",J_star\n";
  char buf[32];
  for (const MheTraceRow& r : trace) {
    csv << r.step;
    for (double v : r.z_true) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      csv << ',' << buf;
    }
    for (double v : r.z_hat) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      csv << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.j_star);
    csv << ',' << buf << '\n';
  }
  std::cerr << "obscert: wrote " << csv_path.string() << " (" << trace.size() << " steps)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"obscert - scenario-based observability certification for uncertain "
               "nonlinear systems"};
  app.require_subcommand(1);

  std::string config_path, out_dir, cache_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool no_timings = false;

  CLI::App* certify = app.add_subcommand("certify", "run certification experiments");
  certify->add_option("--config", config_path, "experiment config (JSON)")->required();
  certify->add_option("--out", out_dir, "output directory (default from config/OBSCERT_OUT)");
  certify->add_option("--seed", seed, "override the master seed");
  certify->add_option("--threads", threads, "worker threads (0 = auto)");
  certify->add_option("--cache", cache_path, "scenario stats cache file");
  certify->add_flag("--no-timings", no_timings, "emit zeroed dt1/dt2 for reproducible output");

  CLI::App* demo = app.add_subcommand("mhe-demo", "run the moving-horizon estimator demo");
  demo->add_option("--config", config_path, "experiment config (JSON)")->required();
  demo->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(certify))
      return run_certify(config_path, out_dir, seed, threads, cache_path, no_timings);
    return run_mhe_demo(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "obscert: error: " << e.what() << "\n";
    return 1;
  }
}
