#pragma once

#include "wasncal/types.hpp"

#include <cstdint>
#include <string>

namespace wasncal {

// Randomized placement parameters for a calibration scenario. Sensors and
// emitters are drawn inside a ball of radius `aperture`, the new sensor
// inside a ball of radius `range`, all with radius ~ U(0, bound).
struct ScenarioSpec {
  int num_sensors = 10;    // M >= 1
  int num_emitters = 10;   // N >= D + 2
  int dimension = 3;       // D in {2, 3}
  double aperture = 1.0;   // meters, > 0
  double range = 1.0;      // meters, > 0
  double min_separation = 0.05;  // meters, >= 0, < aperture
  double offset_lo = 0.0;  // clock offset interval, seconds
  double offset_hi = 1.0;
  double speed_of_sound = 343.0;  // m/s
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError on a violated invariant
};

// Ground-truth geometry of one calibration problem: M calibrated sensors,
// N emitters, the uncalibrated sensor, and its clock offset.
struct Scenario {
  PositionMatrix sensors;   // D x M
  PositionMatrix emitters;  // D x N
  Vector new_sensor;        // D
  double clock_offset = 0.0;      // seconds
  double speed_of_sound = 343.0;  // m/s

  int dimension() const { return static_cast<int>(sensors.rows()); }
  int num_sensors() const { return static_cast<int>(sensors.cols()); }
  int num_emitters() const { return static_cast<int>(emitters.cols()); }
  // Clock offset expressed in range units.
  double range_offset() const { return speed_of_sound * clock_offset; }
};

struct GeometryReport {
  int num_sensors = 0;
  int num_emitters = 0;
  bool sensor_count_ok = false;    // M >= 1
  bool emitter_count_ok = false;   // N >= D + 2
  double min_pairwise_separation = 0.0;
  // Rank of the emitter-difference matrix stacked against the last emitter.
  double smallest_singular_value = 0.0;
  double largest_singular_value = 0.0;
  bool emitter_rank_ok = false;
  bool all_ok = false;

  std::string to_string() const;
};

// Rejection-samples scenarios until every pairwise separation (sensors,
// emitters and the new sensor alike) clears spec.min_separation. Throws
// PlacementInfeasibleError once the retry budget is exhausted.
Scenario generate_scenario(const ScenarioSpec& spec, Rng& rng);

// Checks the structural requirements the linearized solver relies on.
// Always returns a report; never throws.
GeometryReport validate_geometry(const Scenario& scenario, int dimension);

// Smallest distance between any two elements of the scenario.
double min_pairwise_separation(const Scenario& scenario);

// JSON (de)serialization; field names are documented in
// docs/schemas/scenario.schema.json.
std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

}  // namespace wasncal
