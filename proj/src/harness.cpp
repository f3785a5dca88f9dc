#include "wasncal/harness.hpp"

#include "wasncal/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

namespace wasncal {

namespace {

// Stream tags keep the per-purpose RNG streams disjoint.
constexpr std::uint64_t kScenarioStream = 101;
constexpr std::uint64_t kNoiseStream = 202;
constexpr std::uint64_t kSignalStream = 303;

int iterations_for(Method method) {
  switch (method) {
    case Method::LS: return 0;
    case Method::WLS1: return 1;
    case Method::WLS5: return 5;
    default: return -1;  // not an empirical method
  }
}

void apply_sweep(SweepParameter param, double value, ScenarioSpec& spec, NoiseSpec& noise) {
  switch (param) {
    case SweepParameter::SigmaRange: noise.sigma_range = std::pow(10.0, value / 10.0); break;
    case SweepParameter::SigmaEmitter: noise.sigma_emitter = std::pow(10.0, value / 10.0); break;
    case SweepParameter::SigmaSensor: noise.sigma_sensor = std::pow(10.0, value / 10.0); break;
    case SweepParameter::SigmaRangeFirst:
      noise.sigma_range_first = std::pow(10.0, value / 10.0);
      break;
    case SweepParameter::NumEmitters:
      spec.num_emitters = static_cast<int>(std::llround(value));
      break;
    case SweepParameter::NumSensors:
      spec.num_sensors = static_cast<int>(std::llround(value));
      break;
    case SweepParameter::Range: spec.range = value; break;
    case SweepParameter::AcousticAperture:
      spec.aperture = value;
      spec.range = value;
      break;
  }
}

void parallel_for(long count, int threads, const std::function<void(long)>& body) {
  threads = std::max(1, threads);
  if (threads == 1 || count < 2) {
    for (long t = 0; t < count; ++t) body(t);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (long t = next.fetch_add(1); t < count; t = next.fetch_add(1)) body(t);
    });
  for (auto& th : pool) th.join();
}

std::string format_value(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string format_sweep_value(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct EmpiricalOutcome {
  std::vector<char> ok;  // setup * n_trials + trial
  std::vector<Vector> positions;
  std::vector<double> offsets;
};

// Theoretical covariance of the weighted estimator at one true geometry.
Matrix wlst_covariance(const Scenario& scenario, const CovarianceSet& covs,
                       const SolverOptions& solver) {
  const Matrix beta =
      reduced_ranges(true_range_diffs(scenario), scenario.emitters, scenario.sensors);
  const LinearSystem sys = build_linear_system(beta, scenario.emitters, solver);
  const NoiseWeights weights =
      build_noise_weights(scenario.emitters, scenario.sensors, scenario.new_sensor,
                          solver.resolve_reference(scenario.num_emitters()));
  const Matrix psi = assemble_residual_covariance(weights, covs);
  return estimator_covariance(sys.design, psi);
}

struct CellAccumulator {
  double rmse_loc = std::numeric_limits<double>::quiet_NaN();
  double rmse_syn = std::numeric_limits<double>::quiet_NaN();
  long n_ok = 0;
  long n_fail = 0;
  std::string warning;
};

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::LS: return "LS";
    case Method::WLS1: return "WLS-1";
    case Method::WLS5: return "WLS-5";
    case Method::WLST: return "WLS-T";
    case Method::CRLB: return "CRLB";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "LS") return Method::LS;
  if (name == "WLS-1") return Method::WLS1;
  if (name == "WLS-5") return Method::WLS5;
  if (name == "WLS-T") return Method::WLST;
  if (name == "CRLB") return Method::CRLB;
  throw ConfigError("unknown method '" + name + "'");
}

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::SigmaRange: return "sigma_r";
    case SweepParameter::SigmaEmitter: return "sigma_u";
    case SweepParameter::SigmaSensor: return "sigma_s";
    case SweepParameter::SigmaRangeFirst: return "sigma_r_first";
    case SweepParameter::NumEmitters: return "num_emitters";
    case SweepParameter::NumSensors: return "num_sensors";
    case SweepParameter::Range: return "range";
    case SweepParameter::AcousticAperture: return "acoustic_aperture";
  }
  return "?";
}

SweepParameter sweep_parameter_from_string(const std::string& name) {
  if (name == "sigma_r") return SweepParameter::SigmaRange;
  if (name == "sigma_u") return SweepParameter::SigmaEmitter;
  if (name == "sigma_s") return SweepParameter::SigmaSensor;
  if (name == "sigma_r_first") return SweepParameter::SigmaRangeFirst;
  if (name == "num_emitters") return SweepParameter::NumEmitters;
  if (name == "num_sensors") return SweepParameter::NumSensors;
  if (name == "range") return SweepParameter::Range;
  if (name == "acoustic_aperture") return SweepParameter::AcousticAperture;
  throw ConfigError("unknown sweep parameter '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (sweep_values.empty()) throw ConfigError("experiment config: sweep_values must be nonempty");
  if (n_setups < 1 || n_trials < 1)
    throw ConfigError("experiment config: n_setups and n_trials must be at least 1");
  if (methods.empty()) throw ConfigError("experiment config: methods must be nonempty");
  noise.validate();
}

double rmse_loc(const std::vector<Vector>& true_positions,
                const std::vector<std::vector<Vector>>& estimates) {
  if (true_positions.size() != estimates.size())
    throw DimensionError("rmse_loc: setup counts disagree");
  double sum = 0.0;
  long count = 0;
  for (std::size_t s = 0; s < estimates.size(); ++s)
    for (const Vector& estimate : estimates[s]) {
      sum += (true_positions[s] - estimate).squaredNorm();
      ++count;
    }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(sum / static_cast<double>(count));
}

double rmse_syn(const std::vector<double>& true_offsets,
                const std::vector<std::vector<double>>& estimates) {
  if (true_offsets.size() != estimates.size())
    throw DimensionError("rmse_syn: setup counts disagree");
  double sum = 0.0;
  long count = 0;
  for (std::size_t s = 0; s < estimates.size(); ++s)
    for (double estimate : estimates[s]) {
      const double err = true_offsets[s] - estimate;
      sum += err * err;
      ++count;
    }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(sum / static_cast<double>(count));
}

double rmse_loc_theoretical(const std::vector<Matrix>& covariances, int dimension) {
  if (covariances.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const Matrix& cov : covariances) sum += cov.diagonal().head(dimension).sum();
  return std::sqrt(sum / static_cast<double>(covariances.size()));
}

double rmse_syn_theoretical(const std::vector<Matrix>& covariances, int dimension,
                            double speed_of_sound) {
  if (covariances.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const Matrix& cov : covariances) sum += cov(dimension, dimension);
  return std::sqrt(sum / static_cast<double>(covariances.size())) / speed_of_sound;
}

namespace {

// Shared sweep loop for the injected-noise and acoustic pipelines. The
// `measure` callback produces a MeasurementSet for one (scenario, trial).
ExperimentResult run_sweep(
    const ExperimentConfig& config,
    const std::function<MeasurementSet(const Scenario&, const NoiseSpec&, std::uint64_t setup,
                                       std::uint64_t trial)>& measure,
    const std::function<NoiseSpec(const NoiseSpec&, const ScenarioSpec&)>& solver_noise_model,
    bool validate_before_use) {
  config.validate();

  std::vector<Method> empirical;
  int max_iterations = 0;
  bool want_wlst = false, want_crlb = false;
  for (Method method : config.methods) {
    const int iters = iterations_for(method);
    if (iters >= 0) {
      empirical.push_back(method);
      max_iterations = std::max(max_iterations, iters);
    } else if (method == Method::WLST) {
      want_wlst = true;
    } else if (method == Method::CRLB) {
      want_crlb = true;
    }
  }

  ExperimentResult result;
  result.swept_parameter = to_string(config.swept_parameter);

  for (double value : config.sweep_values) {
    ScenarioSpec spec = config.scenario;
    NoiseSpec noise = config.noise;
    apply_sweep(config.swept_parameter, value, spec, noise);
    const NoiseSpec solver_noise = solver_noise_model(noise, spec);

    const long n_setups = config.n_setups;
    const long n_trials = config.n_trials;

    // Scenarios keyed by (seed, setup) only: sigma sweeps reuse the same
    // geometries, which keeps curves smooth across sweep values.
    std::vector<Scenario> scenarios(n_setups);
    std::vector<char> setup_ok(n_setups, 0);
    for (long si = 0; si < n_setups; ++si) {
      try {
        Rng rng = make_rng(config.seed, kScenarioStream, static_cast<std::uint64_t>(si));
        scenarios[si] = generate_scenario(spec, rng);
        if (validate_before_use &&
            !validate_geometry(scenarios[si], spec.dimension).all_ok)
          continue;
        setup_ok[si] = 1;
      } catch (const Error&) {
        setup_ok[si] = 0;
      }
    }

    CovarianceSet covs =
        build_covariances(solver_noise, spec.num_sensors, spec.num_emitters, spec.dimension);

    std::vector<EmpiricalOutcome> outcomes(empirical.size());
    for (auto& outcome : outcomes) {
      outcome.ok.assign(n_setups * n_trials, 0);
      outcome.positions.assign(n_setups * n_trials, Vector());
      outcome.offsets.assign(n_setups * n_trials, 0.0);
    }

    if (!empirical.empty()) {
      SolverOptions solver = config.solver;
      solver.wls_iterations = max_iterations;
      parallel_for(n_setups * n_trials, config.threads, [&](long task) {
        const long si = task / n_trials;
        const long ti = task % n_trials;
        if (!setup_ok[si]) return;
        try {
          const MeasurementSet meas =
              measure(scenarios[si], noise, static_cast<std::uint64_t>(si),
                      static_cast<std::uint64_t>(ti));
          const auto trace =
              calibrate_trace(meas, covs, solver, scenarios[si].speed_of_sound);
          for (std::size_t e = 0; e < empirical.size(); ++e) {
            const int iters = iterations_for(empirical[e]);
            const CalibrationEstimate& est = trace.at(iters);
            if (iters > 0 && est.degraded) continue;  // failed iteration
            outcomes[e].ok[task] = 1;
            outcomes[e].positions[task] = est.position;
            outcomes[e].offsets[task] = est.clock_offset();
          }
        } catch (const Error&) {
          // all methods fail for this trial; counters pick it up below
        } catch (const std::exception&) {
        }
      });
    }

    // Theoretical covariances per setup.
    std::vector<Matrix> wlst_covs, crlb_covs;
    long wlst_fail = 0, crlb_fail = 0;
    for (long si = 0; si < n_setups; ++si) {
      if (want_wlst) {
        if (setup_ok[si]) {
          try {
            wlst_covs.push_back(wlst_covariance(scenarios[si], covs, config.solver));
          } catch (const Error&) {
            ++wlst_fail;
          }
        } else {
          ++wlst_fail;
        }
      }
      if (want_crlb) {
        if (setup_ok[si]) {
          try {
            crlb_covs.push_back(compute_crlb(scenarios[si], covs).crlb);
          } catch (const Error&) {
            ++crlb_fail;
          }
        } else {
          ++crlb_fail;
        }
      }
    }

    // Reduce in method order; the WLS-1 standard error feeds the CRLB
    // sanity warning.
    double wls1_rmse = std::numeric_limits<double>::quiet_NaN();
    double wls1_se = std::numeric_limits<double>::quiet_NaN();

    std::vector<CellAccumulator> cells;
    for (Method method : config.methods) {
      CellAccumulator cell;
      const int iters = iterations_for(method);
      if (iters >= 0) {
        const std::size_t e =
            std::find(empirical.begin(), empirical.end(), method) - empirical.begin();
        const auto& outcome = outcomes[e];
        std::vector<Vector> trues;
        std::vector<double> true_offs;
        std::vector<std::vector<Vector>> positions(n_setups);
        std::vector<std::vector<double>> offsets(n_setups);
        std::vector<double> sq_errors;
        for (long si = 0; si < n_setups; ++si) {
          trues.push_back(setup_ok[si] ? Vector(scenarios[si].new_sensor)
                                       : Vector::Zero(spec.dimension));
          true_offs.push_back(setup_ok[si] ? scenarios[si].clock_offset : 0.0);
          for (long ti = 0; ti < n_trials; ++ti) {
            const long task = si * n_trials + ti;
            if (outcome.ok[task]) {
              positions[si].push_back(outcome.positions[task]);
              offsets[si].push_back(outcome.offsets[task]);
              sq_errors.push_back(
                  (outcome.positions[task] - scenarios[si].new_sensor).squaredNorm());
              ++cell.n_ok;
            } else {
              ++cell.n_fail;
            }
          }
        }
        cell.rmse_loc = rmse_loc(trues, positions);
        cell.rmse_syn = rmse_syn(true_offs, offsets);
        if (method == Method::WLS1 && cell.n_ok > 1) {
          const double mse = cell.rmse_loc * cell.rmse_loc;
          double var = 0.0;
          for (double sq : sq_errors) var += (sq - mse) * (sq - mse);
          var /= static_cast<double>(sq_errors.size() - 1);
          const double se_mse = std::sqrt(var / static_cast<double>(sq_errors.size()));
          wls1_rmse = cell.rmse_loc;
          wls1_se = se_mse / (2.0 * cell.rmse_loc);
        }
      } else if (method == Method::WLST) {
        cell.n_ok = n_setups - wlst_fail;
        cell.n_fail = wlst_fail;
        cell.rmse_loc = rmse_loc_theoretical(wlst_covs, spec.dimension);
        cell.rmse_syn = rmse_syn_theoretical(wlst_covs, spec.dimension, spec.speed_of_sound);
      } else {
        cell.n_ok = n_setups - crlb_fail;
        cell.n_fail = crlb_fail;
        cell.rmse_loc = rmse_loc_theoretical(crlb_covs, spec.dimension);
        cell.rmse_syn = rmse_syn_theoretical(crlb_covs, spec.dimension, spec.speed_of_sound);
      }
      if (cell.n_ok == 0) cell.warning = "all_trials_failed";
      cells.push_back(std::move(cell));
    }

    for (std::size_t k = 0; k < config.methods.size(); ++k) {
      ExperimentCell out;
      out.method = config.methods[k];
      out.sweep_value = value;
      out.rmse_loc = cells[k].rmse_loc;
      out.rmse_syn = cells[k].rmse_syn;
      out.n_ok = cells[k].n_ok;
      out.n_fail = cells[k].n_fail;
      out.warning = cells[k].warning;
      if (config.methods[k] == Method::CRLB && std::isfinite(wls1_rmse) &&
          std::isfinite(cells[k].rmse_loc) && out.warning.empty() &&
          cells[k].rmse_loc > wls1_rmse + 2.0 * wls1_se)
        out.warning = "exceeds_wls1_rmse_plus_2se";
      result.cells.push_back(std::move(out));
    }
  }
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  auto measure = [&config](const Scenario& scenario, const NoiseSpec& noise, std::uint64_t setup,
                           std::uint64_t trial) {
    Rng rng = make_rng(config.seed, kNoiseStream, setup, trial);
    return corrupt(scenario, noise, rng);
  };
  auto solver_noise = [](const NoiseSpec& noise, const ScenarioSpec&) { return noise; };
  return run_sweep(config, measure, solver_noise, false);
}

ExperimentResult run_acoustic_experiment(const ExperimentConfig& config) {
  const int signal_samples = static_cast<int>(
      std::llround(config.acoustic.sample_rate * config.acoustic.signal_duration));
  if (signal_samples < 2) throw ConfigError("acoustic config: signal too short");

  auto measure = [&config, signal_samples](const Scenario& scenario, const NoiseSpec& noise,
                                           std::uint64_t setup, std::uint64_t trial) {
    // Position estimates are still corrupted; the range differences come from
    // the signal pipeline.
    NoiseSpec position_noise = noise;
    position_noise.sigma_range = 0.0;
    position_noise.sigma_range_first.reset();
    Rng noise_rng = make_rng(config.seed, kNoiseStream, setup, trial);
    MeasurementSet meas = corrupt(scenario, position_noise, noise_rng);

    Rng signal_rng = make_rng(config.seed, kSignalStream, setup, trial);
    const std::vector<double> signal = white_noise(signal_samples, signal_rng);

    SynthesisOptions synth;
    synth.max_offset = std::max(std::abs(config.scenario.offset_lo),
                                std::abs(config.scenario.offset_hi));
    synth.guard = config.acoustic.guard;
    const RecordingSet rec =
        synthesize_anechoic(scenario, signal, config.acoustic.sample_rate, synth);

    TdoaEstimationOptions est;
    est.guard = config.acoustic.guard;
    est.min_peak_quality = config.acoustic.min_peak_quality;
    est.speed_of_sound = scenario.speed_of_sound;
    const auto tdoas =
        estimate_tdoas(rec, meas.emitter_estimates, meas.sensor_estimates, est);
    meas.range_diffs = tdoas_to_range_diffs(tdoas, scenario.speed_of_sound);
    return meas;
  };
  auto solver_noise = [&config](const NoiseSpec& noise, const ScenarioSpec& spec) {
    // One-sample TDOA error assumption for the weighting model.
    NoiseSpec assumed = noise;
    assumed.sigma_range = spec.speed_of_sound / config.acoustic.sample_rate;
    assumed.sigma_range_first.reset();
    return assumed;
  };
  return run_sweep(config, measure, solver_noise, true);
}

std::string result_to_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "sweep_param,sweep_value,method,rmse_loc_m,rmse_syn_s,n_ok,n_fail,warning\n";
  for (const ExperimentCell& cell : result.cells)
    out << result.swept_parameter << ',' << format_sweep_value(cell.sweep_value) << ','
        << to_string(cell.method) << ',' << format_value(cell.rmse_loc) << ','
        << format_value(cell.rmse_syn) << ',' << cell.n_ok << ',' << cell.n_fail << ','
        << cell.warning << '\n';
  return out.str();
}

void export_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << result_to_csv(result);
  if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

void expect_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                 const char* where) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(std::string("config: unknown key '") + item.key() + "' in " + where);
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  try {
    expect_keys(j,
                {"swept_parameter", "sweep_values", "scenario", "noise", "solver", "methods",
                 "n_setups", "n_trials", "seed", "threads", "acoustic"},
                "top level");
    ExperimentConfig config;
    if (j.contains("swept_parameter"))
      config.swept_parameter = sweep_parameter_from_string(j["swept_parameter"].get<std::string>());
    if (j.contains("sweep_values"))
      config.sweep_values = j["sweep_values"].get<std::vector<double>>();
    if (j.contains("scenario")) {
      const auto& s = j["scenario"];
      expect_keys(s,
                  {"num_sensors", "num_emitters", "dimension", "aperture", "range",
                   "min_separation", "offset_lo", "offset_hi", "speed_of_sound", "seed"},
                  "scenario");
      auto& spec = config.scenario;
      spec.num_sensors = s.value("num_sensors", spec.num_sensors);
      spec.num_emitters = s.value("num_emitters", spec.num_emitters);
      spec.dimension = s.value("dimension", spec.dimension);
      spec.aperture = s.value("aperture", spec.aperture);
      spec.range = s.value("range", spec.range);
      spec.min_separation = s.value("min_separation", spec.min_separation);
      spec.offset_lo = s.value("offset_lo", spec.offset_lo);
      spec.offset_hi = s.value("offset_hi", spec.offset_hi);
      spec.speed_of_sound = s.value("speed_of_sound", spec.speed_of_sound);
      spec.seed = s.value("seed", spec.seed);
    }
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      expect_keys(n, {"sigma_range", "sigma_emitter", "sigma_sensor", "sigma_range_first"},
                  "noise");
      config.noise.sigma_range = n.value("sigma_range", config.noise.sigma_range);
      config.noise.sigma_emitter = n.value("sigma_emitter", config.noise.sigma_emitter);
      config.noise.sigma_sensor = n.value("sigma_sensor", config.noise.sigma_sensor);
      if (n.contains("sigma_range_first") && !n["sigma_range_first"].is_null())
        config.noise.sigma_range_first = n["sigma_range_first"].get<double>();
    }
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      expect_keys(s, {"wls_iterations", "regularization_eps", "reference_emitter"}, "solver");
      config.solver.wls_iterations = s.value("wls_iterations", config.solver.wls_iterations);
      config.solver.regularization_eps =
          s.value("regularization_eps", config.solver.regularization_eps);
      config.solver.reference_emitter =
          s.value("reference_emitter", config.solver.reference_emitter);
    }
    if (j.contains("methods")) {
      config.methods.clear();
      for (const auto& name : j["methods"])
        config.methods.push_back(method_from_string(name.get<std::string>()));
    }
    config.n_setups = j.value("n_setups", config.n_setups);
    config.n_trials = j.value("n_trials", config.n_trials);
    config.seed = j.value("seed", config.seed);
    config.threads = j.value("threads", config.threads);
    if (j.contains("acoustic")) {
      const auto& a = j["acoustic"];
      expect_keys(a, {"sample_rate", "signal_duration", "guard", "min_peak_quality"}, "acoustic");
      config.acoustic.sample_rate = a.value("sample_rate", config.acoustic.sample_rate);
      config.acoustic.signal_duration =
          a.value("signal_duration", config.acoustic.signal_duration);
      config.acoustic.guard = a.value("guard", config.acoustic.guard);
      config.acoustic.min_peak_quality =
          a.value("min_peak_quality", config.acoustic.min_peak_quality);
    }
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["swept_parameter"] = to_string(config.swept_parameter);
  j["sweep_values"] = config.sweep_values;
  j["scenario"] = {{"num_sensors", config.scenario.num_sensors},
                   {"num_emitters", config.scenario.num_emitters},
                   {"dimension", config.scenario.dimension},
                   {"aperture", config.scenario.aperture},
                   {"range", config.scenario.range},
                   {"min_separation", config.scenario.min_separation},
                   {"offset_lo", config.scenario.offset_lo},
                   {"offset_hi", config.scenario.offset_hi},
                   {"speed_of_sound", config.scenario.speed_of_sound},
                   {"seed", config.scenario.seed}};
  j["noise"] = {{"sigma_range", config.noise.sigma_range},
                {"sigma_emitter", config.noise.sigma_emitter},
                {"sigma_sensor", config.noise.sigma_sensor}};
  if (config.noise.sigma_range_first)
    j["noise"]["sigma_range_first"] = *config.noise.sigma_range_first;
  j["solver"] = {{"wls_iterations", config.solver.wls_iterations},
                 {"regularization_eps", config.solver.regularization_eps},
                 {"reference_emitter", config.solver.reference_emitter}};
  std::vector<std::string> names;
  for (Method method : config.methods) names.push_back(to_string(method));
  j["methods"] = names;
  j["n_setups"] = config.n_setups;
  j["n_trials"] = config.n_trials;
  j["seed"] = config.seed;
  j["threads"] = config.threads;
  j["acoustic"] = {{"sample_rate", config.acoustic.sample_rate},
                   {"signal_duration", config.acoustic.signal_duration},
                   {"guard", config.acoustic.guard},
                   {"min_peak_quality", config.acoustic.min_peak_quality}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

}  // namespace wasncal
