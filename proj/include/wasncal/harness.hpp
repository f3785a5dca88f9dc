#pragma once

#include "wasncal/acoustics.hpp"
#include "wasncal/estimator.hpp"
#include "wasncal/geometry.hpp"
#include "wasncal/measurement.hpp"
#include "wasncal/types.hpp"

#include <string>
#include <vector>

namespace wasncal {

enum class Method { LS, WLS1, WLS5, WLST, CRLB };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

enum class SweepParameter {
  SigmaRange,       // 10*log10(sigma_r) in dB
  SigmaEmitter,     // 10*log10(sigma_u)
  SigmaSensor,      // 10*log10(sigma_s)
  SigmaRangeFirst,  // 10*log10(sigma_r1)
  NumEmitters,      // N
  NumSensors,       // M
  Range,            // R, meters
  AcousticAperture  // A = R jointly, meters (acoustic runs)
};

std::string to_string(SweepParameter p);
SweepParameter sweep_parameter_from_string(const std::string& name);

struct AcousticConfig {
  double sample_rate = 48000.0;   // Hz
  double signal_duration = 1.0;   // seconds
  double guard = 0.01;            // scheduling margin, seconds
  double min_peak_quality = 2.0;
};

struct ExperimentConfig {
  SweepParameter swept_parameter = SweepParameter::SigmaRange;
  std::vector<double> sweep_values;
  ScenarioSpec scenario;
  NoiseSpec noise;
  SolverOptions solver;
  std::vector<Method> methods = {Method::LS, Method::WLS1, Method::WLS5, Method::WLST,
                                 Method::CRLB};
  int n_setups = 8;    // desk-scale default; paper scale is 32
  int n_trials = 200;  // desk-scale default; paper scale is 1000
  std::uint64_t seed = 1;
  int threads = 1;     // never affects the result bytes
  AcousticConfig acoustic;

  void validate() const;
};

struct ExperimentCell {
  Method method = Method::LS;
  double sweep_value = 0.0;
  double rmse_loc = 0.0;  // meters
  double rmse_syn = 0.0;  // seconds
  long n_ok = 0;
  long n_fail = 0;
  std::string warning;  // soft diagnostics, e.g. bound above empirical RMSE
};

struct ExperimentResult {
  std::string swept_parameter;
  std::vector<ExperimentCell> cells;  // sweep-major, then method order
};

// Empirical RMSEs over setups and bootstrapped trials; failed trials are
// excluded by simply not appearing in the estimate lists.
double rmse_loc(const std::vector<Vector>& true_positions,
                const std::vector<std::vector<Vector>>& estimates);
double rmse_syn(const std::vector<double>& true_offsets,
                const std::vector<std::vector<double>>& estimates);

// Theoretical counterparts: mean of the covariance traces over setups, then
// the square root.
double rmse_loc_theoretical(const std::vector<Matrix>& covariances, int dimension);
double rmse_syn_theoretical(const std::vector<Matrix>& covariances, int dimension,
                            double speed_of_sound);

// Monte Carlo sweep with injected Gaussian noise. Scenario streams are keyed
// by (seed, setup) and noise streams by (seed, setup, trial), so results are
// independent of thread count and noise realizations are shared across sweep
// values.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Signal-level variant: TDOAs come from synthesized recordings through
// GCC-PHAT instead of injected noise. The solver's range-noise SD is assumed
// to be c / sample_rate.
ExperimentResult run_acoustic_experiment(const ExperimentConfig& config);

// CSV with one row per (method, sweep value); full-precision scientific
// notation, byte-stable across reruns.
std::string result_to_csv(const ExperimentResult& result);
void export_csv(const ExperimentResult& result, const std::string& path);

// JSON config io; see docs/schemas/experiment_config.schema.json.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

}  // namespace wasncal
