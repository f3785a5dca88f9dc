#include "wasncal/harness.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace wasncal;
using namespace wasncal::testing;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig config;
  config.swept_parameter = SweepParameter::SigmaRange;
  config.sweep_values = {-30.0};
  config.noise.sigma_range = 1e-3;
  config.noise.sigma_emitter = 1e-3;
  config.noise.sigma_sensor = 1e-3;
  config.n_setups = 3;
  config.n_trials = 20;
  config.seed = 5;
  return config;
}

const ExperimentCell& find_cell(const ExperimentResult& result, Method method,
                                double sweep_value) {
  for (const auto& cell : result.cells)
    if (cell.method == method && cell.sweep_value == sweep_value) return cell;
  throw std::runtime_error("cell not found");
}

}  // namespace

TEST_CASE("empirical rmse matches hand-computed values") {
  Vector origin = Vector::Zero(3);
  std::vector<Vector> trues{origin};

  Vector e1 = Vector::Zero(3);
  e1(0) = 3e-3;
  Vector e2 = Vector::Zero(3);
  e2(1) = 4e-3;
  std::vector<std::vector<Vector>> perfect{{origin, origin}};
  CHECK(rmse_loc(trues, perfect) == 0.0);

  std::vector<std::vector<Vector>> off{{e1, e2}};
  CHECK(rmse_loc(trues, off) == doctest::Approx(std::sqrt(12.5) * 1e-3).epsilon(1e-12));

  std::vector<double> true_tau{0.5};
  std::vector<std::vector<double>> tau_est{{0.5, 0.5}};
  CHECK(rmse_syn(true_tau, tau_est) == 0.0);
}

TEST_CASE("theoretical rmse uses covariance traces") {
  Matrix cov = Matrix::Zero(4, 4);
  cov.diagonal() << 1.0, 1.0, 1.0, 4.0;
  const std::vector<Matrix> covs{cov};
  CHECK(rmse_loc_theoretical(covs, 3) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(rmse_syn_theoretical(covs, 3, 343.0) == doctest::Approx(2.0 / 343.0).epsilon(1e-12));
}

TEST_CASE("method and sweep names round trip") {
  for (Method m : {Method::LS, Method::WLS1, Method::WLS5, Method::WLST, Method::CRLB})
    CHECK(method_from_string(to_string(m)) == m);
  for (SweepParameter p :
       {SweepParameter::SigmaRange, SweepParameter::SigmaEmitter, SweepParameter::SigmaSensor,
        SweepParameter::SigmaRangeFirst, SweepParameter::NumEmitters,
        SweepParameter::NumSensors, SweepParameter::Range, SweepParameter::AcousticAperture})
    CHECK(sweep_parameter_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(method_from_string("WLS-7"), ConfigError);
}

TEST_CASE("zero-noise sweep points are exact for every empirical method") {
  ExperimentConfig config = tiny_config();
  config.sweep_values = {-400.0};  // sigma 1e-40: numerically zero influence
  config.noise.sigma_emitter = 0.0;
  config.noise.sigma_sensor = 0.0;
  config.methods = {Method::LS, Method::WLS1, Method::WLS5};
  const ExperimentResult result = run_experiment(config);
  for (const auto& cell : result.cells) {
    CHECK(cell.n_fail == 0);
    CHECK(cell.rmse_loc < 1e-8);
    CHECK(cell.rmse_syn < 1e-11);
  }
}

TEST_CASE("weighted least squares beats plain least squares at default noise") {
  ExperimentConfig config = tiny_config();
  config.n_setups = 4;
  config.n_trials = 100;
  config.methods = {Method::LS, Method::WLS1, Method::CRLB};
  const ExperimentResult result = run_experiment(config);
  const auto& ls = find_cell(result, Method::LS, -30.0);
  const auto& wls = find_cell(result, Method::WLS1, -30.0);
  const auto& crlb = find_cell(result, Method::CRLB, -30.0);
  CHECK(wls.rmse_loc <= ls.rmse_loc);
  CHECK(crlb.rmse_loc <= wls.rmse_loc * 1.25);
  CHECK(ls.n_ok + ls.n_fail == 400);
  CHECK(crlb.n_ok == 4);
}

TEST_CASE("experiment reruns are byte-identical across thread counts") {
  ExperimentConfig config = tiny_config();
  config.sweep_values = {-30.0, -20.0};
  config.methods = {Method::LS, Method::WLS1, Method::WLS5, Method::WLST, Method::CRLB};

  config.threads = 1;
  const std::string serial = result_to_csv(run_experiment(config));
  config.threads = 4;
  const std::string threaded = result_to_csv(run_experiment(config));
  CHECK(serial == threaded);

  config.threads = 3;
  CHECK(result_to_csv(run_experiment(config)) == serial);
}

TEST_CASE("csv export is stable and shaped by methods times sweep values") {
  ExperimentConfig config = tiny_config();
  config.sweep_values = {-30.0, -25.0, -20.0};
  config.methods = {Method::LS, Method::WLS1};
  const ExperimentResult result = run_experiment(config);
  CHECK(result.cells.size() == 6);

  const std::string csv = result_to_csv(result);
  CHECK(csv.substr(0, csv.find('\n')) ==
        "sweep_param,sweep_value,method,rmse_loc_m,rmse_syn_s,n_ok,n_fail,warning");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(result_to_csv(result) == csv);

  const ExperimentResult empty{.swept_parameter = "sigma_r", .cells = {}};
  const std::string header_only = result_to_csv(empty);
  CHECK(header_only ==
        "sweep_param,sweep_value,method,rmse_loc_m,rmse_syn_s,n_ok,n_fail,warning\n");
}

TEST_CASE("failure accounting always balances") {
  ExperimentConfig config = tiny_config();
  config.scenario.min_separation = 0.9;  // placement infeasible: all setups fail
  config.n_setups = 2;
  config.n_trials = 5;
  config.methods = {Method::LS, Method::WLS1, Method::CRLB};
  const ExperimentResult result = run_experiment(config);
  for (const auto& cell : result.cells) {
    if (cell.method == Method::CRLB) {
      CHECK(cell.n_ok + cell.n_fail == 2);
      CHECK(cell.n_fail == 2);
    } else {
      CHECK(cell.n_ok + cell.n_fail == 10);
      CHECK(cell.n_fail == 10);
    }
    CHECK(cell.warning == "all_trials_failed");
    CHECK(std::isnan(cell.rmse_loc));
  }
}

TEST_CASE("config json round trips and rejects unknown keys") {
  ExperimentConfig config = tiny_config();
  config.swept_parameter = SweepParameter::NumEmitters;
  config.sweep_values = {5, 10, 15};
  config.noise.sigma_range_first = 1e-2;
  config.methods = {Method::WLS1, Method::CRLB};
  config.acoustic.sample_rate = 16000.0;

  const ExperimentConfig restored = config_from_json(config_to_json(config));
  CHECK(restored.swept_parameter == config.swept_parameter);
  CHECK(restored.sweep_values == config.sweep_values);
  CHECK(restored.noise.sigma_range == config.noise.sigma_range);
  CHECK(*restored.noise.sigma_range_first == *config.noise.sigma_range_first);
  CHECK(restored.methods == config.methods);
  CHECK(restored.acoustic.sample_rate == 16000.0);
  CHECK(restored.scenario.num_sensors == config.scenario.num_sensors);

  CHECK_THROWS_AS(config_from_json("{\"sweepvalues\": [1]}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"noise\": {\"sigma\": 1}}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("not json"), ConfigError);
}

TEST_CASE("acoustic experiments run end to end and stay deterministic") {
  ExperimentConfig config;
  config.swept_parameter = SweepParameter::AcousticAperture;
  config.sweep_values = {0.6};
  config.scenario.num_sensors = 2;
  config.scenario.num_emitters = 5;
  config.scenario.offset_lo = 0.0;
  config.scenario.offset_hi = 0.15;
  config.noise.sigma_emitter = 1e-3;
  config.noise.sigma_sensor = 1e-3;
  config.methods = {Method::LS, Method::WLS1};
  config.n_setups = 2;
  config.n_trials = 2;
  config.seed = 11;
  config.acoustic.sample_rate = 16000.0;
  config.acoustic.signal_duration = 0.25;

  config.threads = 1;
  const ExperimentResult result = run_acoustic_experiment(config);
  const auto& wls = find_cell(result, Method::WLS1, 0.6);
  CHECK(wls.n_fail == 0);
  // With two sensors and the minimum emitter count the one-sample-noise bound
  // sits near 0.11 m; sub-sample TDOAs keep the estimate under it.
  CHECK(wls.rmse_loc < 0.12);

  const std::string serial = result_to_csv(result);
  config.threads = 3;
  CHECK(result_to_csv(run_acoustic_experiment(config)) == serial);
}
