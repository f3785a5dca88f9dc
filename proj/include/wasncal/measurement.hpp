#pragma once

#include "wasncal/geometry.hpp"
#include "wasncal/types.hpp"

#include <optional>
#include <string>

namespace wasncal {

// Standard deviations of the additive Gaussian noise on measurements.
// All values are in meters; range noise acts on the c-scaled TDOAs.
struct NoiseSpec {
  double sigma_range = 0.0;    // SD of each range-difference entry
  double sigma_emitter = 0.0;  // SD per coordinate of emitter estimates
  double sigma_sensor = 0.0;   // SD per coordinate of sensor estimates
  // When set, range-difference noise for the first sensor's row uses this SD
  // instead (uneven-noise configuration).
  std::optional<double> sigma_range_first;

  void validate() const;
};

// Noisy measurements as seen by the solver: the M x N range-difference
// matrix plus the estimated element positions.
struct MeasurementSet {
  Matrix range_diffs;                // M x N, meters
  PositionMatrix emitter_estimates;  // D x N
  PositionMatrix sensor_estimates;   // D x M

  int num_sensors() const { return static_cast<int>(range_diffs.rows()); }
  int num_emitters() const { return static_cast<int>(range_diffs.cols()); }
  int dimension() const { return static_cast<int>(emitter_estimates.rows()); }
};

// Covariance blocks of the stacked measurement noise. Stacking follows the
// same order everywhere: range diffs sensor-major ((i-1)*N + j), positions
// element-major ((k-1)*D + d).
struct CovarianceSet {
  Matrix range_cov;           // NM x NM
  Matrix emitter_cov;         // DN x DN
  Matrix sensor_cov;          // DM x DM
  Matrix range_emitter_cov;   // NM x DN
  Matrix range_sensor_cov;    // NM x DM
  Matrix emitter_sensor_cov;  // DN x DM
};

// Noise-free range differences: entry (i, j) is
// ||u_j - s_i|| - ||u_j - p|| + c * clock_offset. Dividing by c recovers the
// TDOA between sensor i and the new sensor for emitter j.
Matrix true_range_diffs(const Scenario& scenario);

// Corrupts truth with the specified Gaussian noise. Draw order is fixed
// (range diffs sensor-major, then emitters, then sensors) so a given seed
// always produces the same set. Standard-normal draws are scaled by sigma,
// which keeps noise realizations common across sigma sweeps.
MeasurementSet corrupt(const Scenario& scenario, const NoiseSpec& noise, Rng& rng);

// Diagonal (or block-diagonal, when sigma_range_first is set) covariance
// matrices matching the corruption model; all cross blocks zero.
CovarianceSet build_covariances(const NoiseSpec& noise, int num_sensors, int num_emitters,
                                int dimension);

// Stacking helpers shared by the solver and the analysis code.
Vector pack_range_diffs(const Matrix& range_diffs);                  // NM
Matrix unpack_range_diffs(const Vector& v, int num_sensors, int num_emitters);
Vector pack_positions(const PositionMatrix& positions);              // D*K
PositionMatrix unpack_positions(const Vector& v, int dimension);

// JSON (de)serialization; see docs/schemas/measurement.schema.json.
std::string measurement_to_json(const MeasurementSet& meas);
MeasurementSet measurement_from_json(const std::string& text);
void save_measurement(const MeasurementSet& meas, const std::string& path);
MeasurementSet load_measurement(const std::string& path);

// CSV import of externally measured TDOAs. Expected columns:
// sensor_index, emitter_index, tdoa_seconds (1-based indices, header row
// optional). Every (i, j) pair must appear exactly once. Values are scaled
// by the speed of sound into range differences.
Matrix import_tdoa_csv(const std::string& path, int num_sensors, int num_emitters,
                       double speed_of_sound);

}  // namespace wasncal
