#include "wasncal/geometry.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace wasncal {

namespace {

constexpr int kRetryBudget = 10000;
constexpr double kRankTolerance = 1e-9;

// Radius ~ U(0, bound) by construction (not volume-uniform); angles uniform
// over the sphere's parameter ranges.
Vector draw_position(int dimension, double bound, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = bound * unit(rng);
  const double azimuth = 2.0 * std::numbers::pi * unit(rng);
  Vector p(dimension);
  if (dimension == 2) {
    p << radius * std::cos(azimuth), radius * std::sin(azimuth);
  } else {
    const double elevation = std::numbers::pi * (unit(rng) - 0.5);
    p << radius * std::cos(elevation) * std::cos(azimuth),
        radius * std::cos(elevation) * std::sin(azimuth), radius * std::sin(elevation);
  }
  return p;
}

PositionMatrix gather_elements(const Scenario& scenario) {
  const int d = scenario.dimension();
  const int total = scenario.num_sensors() + scenario.num_emitters() + 1;
  PositionMatrix all(d, total);
  all.leftCols(scenario.num_sensors()) = scenario.sensors;
  all.middleCols(scenario.num_sensors(), scenario.num_emitters()) = scenario.emitters;
  all.col(total - 1) = scenario.new_sensor;
  return all;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (num_sensors < 1) throw ConfigError("scenario spec: need at least one sensor");
  if (dimension != 2 && dimension != 3) throw ConfigError("scenario spec: dimension must be 2 or 3");
  if (num_emitters < dimension + 2)
    throw ConfigError("scenario spec: need at least D + 2 emitters for estimability");
  if (!(aperture > 0.0)) throw ConfigError("scenario spec: aperture must be positive");
  if (!(range >= 0.0)) throw ConfigError("scenario spec: range must be nonnegative");
  if (min_separation < 0.0) throw ConfigError("scenario spec: min_separation must be nonnegative");
  if (min_separation >= aperture)
    throw PlacementInfeasibleError(
        "scenario spec: min_separation must be below the aperture; spacing is infeasible");
  if (offset_hi < offset_lo) throw ConfigError("scenario spec: empty offset interval");
  if (!(speed_of_sound > 0.0)) throw ConfigError("scenario spec: propagation speed must be positive");
}

Scenario generate_scenario(const ScenarioSpec& spec, Rng& rng) {
  spec.validate();
  const int d = spec.dimension;

  for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
    Scenario scenario;
    scenario.speed_of_sound = spec.speed_of_sound;
    scenario.sensors.resize(d, spec.num_sensors);
    scenario.emitters.resize(d, spec.num_emitters);
    for (int i = 0; i < spec.num_sensors; ++i) scenario.sensors.col(i) = draw_position(d, spec.aperture, rng);
    for (int j = 0; j < spec.num_emitters; ++j) scenario.emitters.col(j) = draw_position(d, spec.aperture, rng);
    scenario.new_sensor = draw_position(d, spec.range, rng);

    if (min_pairwise_separation(scenario) >= spec.min_separation) {
      std::uniform_real_distribution<double> offset(spec.offset_lo, spec.offset_hi);
      scenario.clock_offset = offset(rng);
      return scenario;
    }
  }
  std::ostringstream msg;
  msg << "could not place " << (spec.num_sensors + spec.num_emitters + 1) << " elements with "
      << spec.min_separation << " m separation inside aperture " << spec.aperture << " m after "
      << kRetryBudget << " attempts";
  throw PlacementInfeasibleError(msg.str());
}

double min_pairwise_separation(const Scenario& scenario) {
  const PositionMatrix all = gather_elements(scenario);
  double closest = std::numeric_limits<double>::infinity();
  for (int a = 0; a < all.cols(); ++a)
    for (int b = a + 1; b < all.cols(); ++b)
      closest = std::min(closest, (all.col(a) - all.col(b)).norm());
  return closest;
}

GeometryReport validate_geometry(const Scenario& scenario, int dimension) {
  GeometryReport report;
  report.num_sensors = scenario.num_sensors();
  report.num_emitters = scenario.num_emitters();
  report.sensor_count_ok = report.num_sensors >= 1;
  report.emitter_count_ok = report.num_emitters >= dimension + 2;
  report.min_pairwise_separation =
      (report.num_sensors + report.num_emitters >= 1) ? min_pairwise_separation(scenario) : 0.0;

  // Differences against the last emitter must span the full space for the
  // linearized system to have full column rank.
  const int n = report.num_emitters;
  if (n >= 2) {
    Matrix diffs(n - 1, dimension);
    for (int j = 0; j + 1 < n; ++j)
      diffs.row(j) = (scenario.emitters.col(n - 1) - scenario.emitters.col(j)).transpose();
    Eigen::JacobiSVD<Matrix> svd(diffs);
    const auto& sv = svd.singularValues();
    report.largest_singular_value = sv(0);
    report.smallest_singular_value = sv.size() >= dimension ? sv(dimension - 1) : 0.0;
    report.emitter_rank_ok = sv.size() >= dimension &&
                             report.smallest_singular_value > kRankTolerance * report.largest_singular_value;
  }
  report.all_ok = report.sensor_count_ok && report.emitter_count_ok && report.emitter_rank_ok;
  return report;
}

std::string GeometryReport::to_string() const {
  std::ostringstream out;
  out << "sensors: " << num_sensors << (sensor_count_ok ? " (ok)" : " (violates M >= 1)") << "\n"
      << "emitters: " << num_emitters << (emitter_count_ok ? " (ok)" : " (violates N >= D + 2)")
      << "\n"
      << "min pairwise separation: " << min_pairwise_separation << " m\n"
      << "emitter-difference singular values: smallest " << smallest_singular_value << ", largest "
      << largest_singular_value << (emitter_rank_ok ? " (full rank)" : " (rank deficient)") << "\n"
      << (all_ok ? "all checks passed" : "checks FAILED") << "\n";
  return out.str();
}

namespace {

nlohmann::json positions_to_json(const PositionMatrix& positions) {
  nlohmann::json list = nlohmann::json::array();
  for (int k = 0; k < positions.cols(); ++k) {
    nlohmann::json point = nlohmann::json::array();
    for (int d = 0; d < positions.rows(); ++d) point.push_back(positions(d, k));
    list.push_back(point);
  }
  return list;
}

PositionMatrix positions_from_json(const nlohmann::json& list, const char* what) {
  if (!list.is_array() || list.empty())
    throw IoError(std::string("scenario json: '") + what + "' must be a nonempty array");
  const auto dim = list.front().size();
  PositionMatrix positions(dim, list.size());
  for (std::size_t k = 0; k < list.size(); ++k) {
    if (list[k].size() != dim)
      throw IoError(std::string("scenario json: inconsistent dimension in '") + what + "'");
    for (std::size_t d = 0; d < dim; ++d) positions(d, k) = list[k][d].get<double>();
  }
  return positions;
}

}  // namespace

std::string scenario_to_json(const Scenario& scenario) {
  nlohmann::json j;
  j["dimension"] = scenario.dimension();
  j["speed_of_sound_mps"] = scenario.speed_of_sound;
  j["clock_offset_s"] = scenario.clock_offset;
  j["sensors_m"] = positions_to_json(scenario.sensors);
  j["emitters_m"] = positions_to_json(scenario.emitters);
  nlohmann::json p = nlohmann::json::array();
  for (int d = 0; d < scenario.new_sensor.size(); ++d) p.push_back(scenario.new_sensor(d));
  j["new_sensor_m"] = p;
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("scenario json: ") + e.what());
  }
  try {
    Scenario scenario;
    scenario.speed_of_sound = j.at("speed_of_sound_mps").get<double>();
    scenario.clock_offset = j.at("clock_offset_s").get<double>();
    scenario.sensors = positions_from_json(j.at("sensors_m"), "sensors_m");
    scenario.emitters = positions_from_json(j.at("emitters_m"), "emitters_m");
    const auto& p = j.at("new_sensor_m");
    scenario.new_sensor.resize(p.size());
    for (std::size_t d = 0; d < p.size(); ++d) scenario.new_sensor(d) = p[d].get<double>();
    const int dim = j.at("dimension").get<int>();
    if (dim != scenario.dimension() || scenario.emitters.rows() != dim ||
        scenario.new_sensor.size() != dim)
      throw IoError("scenario json: dimension field disagrees with coordinates");
    return scenario;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("scenario json: ") + e.what());
  }
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << scenario_to_json(scenario);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

}  // namespace wasncal
