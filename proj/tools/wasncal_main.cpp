// Command-line front end: scenario simulation, single-shot calibration,
// bound reports and Monte Carlo experiment sweeps.

#include "wasncal/analysis.hpp"
#include "wasncal/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace wasncal;

struct ScenarioFlags {
  ScenarioSpec spec;

  void attach(CLI::App* cmd) {
    cmd->add_option("-M,--sensors", spec.num_sensors, "calibrated sensor count");
    cmd->add_option("-N,--emitters", spec.num_emitters, "emitter count");
    cmd->add_option("-D,--dimension", spec.dimension, "spatial dimension (2 or 3)");
    cmd->add_option("-A,--aperture", spec.aperture, "WASN/emitter aperture, m");
    cmd->add_option("-R,--range", spec.range, "new-sensor range, m");
    cmd->add_option("--min-separation", spec.min_separation, "minimum element spacing, m");
    cmd->add_option("--offset-lo", spec.offset_lo, "clock offset interval low, s");
    cmd->add_option("--offset-hi", spec.offset_hi, "clock offset interval high, s");
    cmd->add_option("-c,--speed-of-sound", spec.speed_of_sound, "propagation speed, m/s");
  }
};

struct NoiseFlags {
  double sigma_r_db = -30.0;
  double sigma_u_db = -30.0;
  double sigma_s_db = -30.0;
  std::optional<double> sigma_r1_db;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sigma-r-db", sigma_r_db, "10*log10 of range-diff noise SD (m)");
    cmd->add_option("--sigma-u-db", sigma_u_db, "10*log10 of emitter position noise SD (m)");
    cmd->add_option("--sigma-s-db", sigma_s_db, "10*log10 of sensor position noise SD (m)");
    cmd->add_option("--sigma-r1-db", sigma_r1_db, "10*log10 of first-sensor range noise SD (m)");
  }

  NoiseSpec to_spec() const {
    NoiseSpec noise;
    noise.sigma_range = std::pow(10.0, sigma_r_db / 10.0);
    noise.sigma_emitter = std::pow(10.0, sigma_u_db / 10.0);
    noise.sigma_sensor = std::pow(10.0, sigma_s_db / 10.0);
    if (sigma_r1_db) noise.sigma_range_first = std::pow(10.0, *sigma_r1_db / 10.0);
    return noise;
  }
};

std::string estimate_to_json(const CalibrationEstimate& est) {
  std::ostringstream out;
  out << "{\n  \"method\": \"" << est.method << "\",\n  \"position_m\": [";
  for (int d = 0; d < est.position.size(); ++d)
    out << (d ? ", " : "") << est.position(d);
  out << "],\n  \"range_offset_m\": " << est.range_offset
      << ",\n  \"clock_offset_s\": " << est.clock_offset()
      << ",\n  \"iterations_used\": " << est.iterations_used
      << ",\n  \"condition\": " << est.condition
      << ",\n  \"degraded\": " << (est.degraded ? "true" : "false") << "\n}\n";
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
}

int run(int argc, char** argv) {
  CLI::App app{"Joint localization and synchronization of a new sensor against a "
               "calibrated acoustic sensor network"};
  app.require_subcommand(1);

  // simulate: draw a scenario, corrupt it, write both to disk
  auto* simulate = app.add_subcommand("simulate", "generate a scenario and noisy measurements");
  ScenarioFlags sim_scenario;
  NoiseFlags sim_noise;
  sim_scenario.attach(simulate);
  sim_noise.attach(simulate);
  std::uint64_t sim_seed = 0;
  std::string scenario_out = "scenario.json";
  std::string measurement_out = "measurement.json";
  simulate->add_option("--seed", sim_seed, "RNG seed");
  simulate->add_option("--scenario-out", scenario_out, "scenario output path");
  simulate->add_option("--measurement-out", measurement_out, "measurement output path");

  // calibrate: solve from a measurement file or an imported TDOA table
  auto* calibrate_cmd = app.add_subcommand("calibrate", "estimate position and clock offset");
  NoiseFlags cal_noise;
  cal_noise.attach(calibrate_cmd);
  std::string measurement_in, tdoa_csv, scenario_in, estimate_out;
  int wls_iterations = 1;
  int reference_emitter = 0;
  double regularization_eps = 0.0;
  double cal_speed = 343.0;
  std::string tdoa_units = "s";
  calibrate_cmd->add_option("--measurement", measurement_in, "measurement JSON path");
  calibrate_cmd->add_option("--tdoa-csv", tdoa_csv,
                            "CSV of sensor_index,emitter_index,tdoa_seconds");
  calibrate_cmd->add_option("--scenario", scenario_in,
                            "scenario JSON supplying position estimates for --tdoa-csv");
  calibrate_cmd->add_option("--tdoa-noise-units", tdoa_units,
                            "units of --sigma-r-db for imported TDOAs: m or s")
      ->check(CLI::IsMember({"m", "s"}));
  calibrate_cmd->add_option("--wls-iterations", wls_iterations, "0 for plain least squares");
  calibrate_cmd->add_option("--reference-emitter", reference_emitter,
                            "1-based reference emitter; 0 = last");
  calibrate_cmd->add_option("--ridge-eps", regularization_eps, "ridge factor for the weighting");
  calibrate_cmd->add_option("-c,--speed-of-sound", cal_speed, "propagation speed, m/s");
  calibrate_cmd->add_option("-o,--out", estimate_out, "output path ('-' for stdout)");

  // crlb: bound report for a scenario
  auto* crlb_cmd = app.add_subcommand("crlb", "Cramer-Rao bound report for a scenario");
  NoiseFlags crlb_noise;
  crlb_noise.attach(crlb_cmd);
  std::string crlb_scenario, crlb_out;
  crlb_cmd->add_option("--scenario", crlb_scenario, "scenario JSON path")->required();
  crlb_cmd->add_option("-o,--out", crlb_out, "output path ('-' for stdout)");

  // experiment / acoustic: sweeps from a config file
  auto add_experiment_flags = [](CLI::App* cmd, std::string& config_path, std::string& csv_out,
                                 std::optional<std::uint64_t>& seed, std::optional<int>& threads,
                                 bool& paper_scale) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("-o,--out", csv_out, "CSV output path")->required();
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--threads", threads, "override the config thread count");
    cmd->add_flag("--paper-scale", paper_scale, "use 32 setups and 1000 trials");
  };

  auto* experiment_cmd = app.add_subcommand("experiment", "Monte Carlo sweep, injected noise");
  std::string exp_config, exp_out;
  std::optional<std::uint64_t> exp_seed;
  std::optional<int> exp_threads;
  bool exp_paper_scale = false;
  add_experiment_flags(experiment_cmd, exp_config, exp_out, exp_seed, exp_threads,
                       exp_paper_scale);

  auto* acoustic_cmd = app.add_subcommand("acoustic", "Monte Carlo sweep, signal-level TDOAs");
  std::string ac_config, ac_out;
  std::optional<std::uint64_t> ac_seed;
  std::optional<int> ac_threads;
  bool ac_paper_scale = false;
  add_experiment_flags(acoustic_cmd, ac_config, ac_out, ac_seed, ac_threads, ac_paper_scale);

  CLI11_PARSE(app, argc, argv);

  if (simulate->parsed()) {
    sim_scenario.spec.seed = sim_seed;
    Rng rng = make_rng(sim_seed);
    const Scenario scenario = generate_scenario(sim_scenario.spec, rng);
    const MeasurementSet meas = corrupt(scenario, sim_noise.to_spec(), rng);
    save_scenario(scenario, scenario_out);
    save_measurement(meas, measurement_out);
    std::cout << "wrote " << scenario_out << " and " << measurement_out << "\n";
    return 0;
  }

  if (calibrate_cmd->parsed()) {
    MeasurementSet meas;
    double speed = cal_speed;
    NoiseSpec noise = cal_noise.to_spec();
    if (!measurement_in.empty()) {
      meas = load_measurement(measurement_in);
    } else if (!tdoa_csv.empty()) {
      if (scenario_in.empty())
        throw ConfigError("--tdoa-csv requires --scenario for position estimates");
      const Scenario scenario = load_scenario(scenario_in);
      speed = scenario.speed_of_sound;
      meas.emitter_estimates = scenario.emitters;
      meas.sensor_estimates = scenario.sensors;
      meas.range_diffs = import_tdoa_csv(tdoa_csv, scenario.num_sensors(),
                                         scenario.num_emitters(), speed);
      if (tdoa_units == "s") noise.sigma_range *= speed;  // SD given per TDOA second
    } else {
      throw ConfigError("calibrate needs --measurement or --tdoa-csv");
    }
    const CovarianceSet covs =
        build_covariances(noise, meas.num_sensors(), meas.num_emitters(), meas.dimension());
    SolverOptions options;
    options.wls_iterations = wls_iterations;
    options.reference_emitter = reference_emitter;
    options.regularization_eps = regularization_eps;
    const CalibrationEstimate est = calibrate(meas, covs, options, speed);
    write_text(estimate_out, estimate_to_json(est));
    return 0;
  }

  if (crlb_cmd->parsed()) {
    const Scenario scenario = load_scenario(crlb_scenario);
    const CovarianceSet covs = build_covariances(
        crlb_noise.to_spec(), scenario.num_sensors(), scenario.num_emitters(),
        scenario.dimension());
    const CrlbReport report = compute_crlb(scenario, covs);
    write_text(crlb_out, report.to_string());
    return 0;
  }

  const bool acoustic = acoustic_cmd->parsed();
  ExperimentConfig config = load_config(acoustic ? ac_config : exp_config);
  const auto& seed = acoustic ? ac_seed : exp_seed;
  const auto& threads = acoustic ? ac_threads : exp_threads;
  if (seed) config.seed = *seed;
  if (threads) config.threads = *threads;
  if (acoustic ? ac_paper_scale : exp_paper_scale) {
    config.n_setups = 32;
    config.n_trials = 1000;
  }
  const ExperimentResult result =
      acoustic ? run_acoustic_experiment(config) : run_experiment(config);
  export_csv(result, acoustic ? ac_out : exp_out);
  std::cout << "wrote " << (acoustic ? ac_out : exp_out) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const wasncal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
