#include "wasncal/measurement.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace wasncal {

void NoiseSpec::validate() const {
  if (sigma_range < 0.0 || sigma_emitter < 0.0 || sigma_sensor < 0.0 ||
      (sigma_range_first && *sigma_range_first < 0.0))
    throw ConfigError("noise spec: standard deviations must be nonnegative");
}

Matrix true_range_diffs(const Scenario& scenario) {
  const int m = scenario.num_sensors();
  const int n = scenario.num_emitters();
  const double offset = scenario.range_offset();
  Matrix r(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      r(i, j) = (scenario.emitters.col(j) - scenario.sensors.col(i)).norm() -
                (scenario.emitters.col(j) - scenario.new_sensor).norm() + offset;
  return r;
}

MeasurementSet corrupt(const Scenario& scenario, const NoiseSpec& noise, Rng& rng) {
  noise.validate();
  const int m = scenario.num_sensors();
  const int n = scenario.num_emitters();
  std::normal_distribution<double> gauss(0.0, 1.0);

  MeasurementSet meas;
  meas.range_diffs = true_range_diffs(scenario);
  // Fixed draw order: range diffs sensor-major, then emitter coordinates,
  // then sensor coordinates. Standard normals are scaled afterwards so the
  // same seed yields common realizations across sigma values.
  for (int i = 0; i < m; ++i) {
    const double sigma = (i == 0 && noise.sigma_range_first) ? *noise.sigma_range_first
                                                             : noise.sigma_range;
    for (int j = 0; j < n; ++j) meas.range_diffs(i, j) += sigma * gauss(rng);
  }
  meas.emitter_estimates = scenario.emitters;
  for (int j = 0; j < n; ++j)
    for (int d = 0; d < scenario.dimension(); ++d)
      meas.emitter_estimates(d, j) += noise.sigma_emitter * gauss(rng);
  meas.sensor_estimates = scenario.sensors;
  for (int i = 0; i < m; ++i)
    for (int d = 0; d < scenario.dimension(); ++d)
      meas.sensor_estimates(d, i) += noise.sigma_sensor * gauss(rng);
  return meas;
}

CovarianceSet build_covariances(const NoiseSpec& noise, int num_sensors, int num_emitters,
                                int dimension) {
  noise.validate();
  const int nm = num_sensors * num_emitters;
  const int dn = dimension * num_emitters;
  const int dm = dimension * num_sensors;

  CovarianceSet covs;
  covs.range_cov = Matrix::Zero(nm, nm);
  const double var_r = noise.sigma_range * noise.sigma_range;
  const double var_r1 = noise.sigma_range_first
                            ? (*noise.sigma_range_first) * (*noise.sigma_range_first)
                            : var_r;
  for (int i = 0; i < num_sensors; ++i)
    for (int j = 0; j < num_emitters; ++j) {
      const int k = i * num_emitters + j;
      covs.range_cov(k, k) = (i == 0) ? var_r1 : var_r;
    }
  covs.emitter_cov = noise.sigma_emitter * noise.sigma_emitter * Matrix::Identity(dn, dn);
  covs.sensor_cov = noise.sigma_sensor * noise.sigma_sensor * Matrix::Identity(dm, dm);
  covs.range_emitter_cov = Matrix::Zero(nm, dn);
  covs.range_sensor_cov = Matrix::Zero(nm, dm);
  covs.emitter_sensor_cov = Matrix::Zero(dn, dm);
  return covs;
}

Vector pack_range_diffs(const Matrix& range_diffs) {
  const int m = static_cast<int>(range_diffs.rows());
  const int n = static_cast<int>(range_diffs.cols());
  Vector v(m * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) v(i * n + j) = range_diffs(i, j);
  return v;
}

Matrix unpack_range_diffs(const Vector& v, int num_sensors, int num_emitters) {
  if (v.size() != num_sensors * num_emitters)
    throw DimensionError("unpack_range_diffs: size mismatch");
  Matrix r(num_sensors, num_emitters);
  for (int i = 0; i < num_sensors; ++i)
    for (int j = 0; j < num_emitters; ++j) r(i, j) = v(i * num_emitters + j);
  return r;
}

Vector pack_positions(const PositionMatrix& positions) {
  Vector v(positions.size());
  for (int k = 0; k < positions.cols(); ++k)
    v.segment(k * positions.rows(), positions.rows()) = positions.col(k);
  return v;
}

PositionMatrix unpack_positions(const Vector& v, int dimension) {
  if (dimension <= 0 || v.size() % dimension != 0)
    throw DimensionError("unpack_positions: size not divisible by dimension");
  PositionMatrix positions(dimension, v.size() / dimension);
  for (int k = 0; k < positions.cols(); ++k)
    positions.col(k) = v.segment(k * dimension, dimension);
  return positions;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& mat) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < mat.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& rows, const char* what) {
  if (!rows.is_array() || rows.empty())
    throw IoError(std::string("measurement json: '") + what + "' must be a nonempty array");
  const auto cols = rows.front().size();
  Matrix mat(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw IoError(std::string("measurement json: ragged rows in '") + what + "'");
    for (std::size_t j = 0; j < cols; ++j) mat(i, j) = rows[i][j].get<double>();
  }
  return mat;
}

}  // namespace

std::string measurement_to_json(const MeasurementSet& meas) {
  nlohmann::json j;
  j["range_diffs_m"] = matrix_to_json(meas.range_diffs);
  // Positions serialize as one row per element to stay readable.
  j["emitter_estimates_m"] = matrix_to_json(meas.emitter_estimates.transpose());
  j["sensor_estimates_m"] = matrix_to_json(meas.sensor_estimates.transpose());
  return j.dump(2) + "\n";
}

MeasurementSet measurement_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("measurement json: ") + e.what());
  }
  try {
    MeasurementSet meas;
    meas.range_diffs = matrix_from_json(j.at("range_diffs_m"), "range_diffs_m");
    meas.emitter_estimates =
        matrix_from_json(j.at("emitter_estimates_m"), "emitter_estimates_m").transpose();
    meas.sensor_estimates =
        matrix_from_json(j.at("sensor_estimates_m"), "sensor_estimates_m").transpose();
    if (meas.emitter_estimates.cols() != meas.range_diffs.cols() ||
        meas.sensor_estimates.cols() != meas.range_diffs.rows() ||
        meas.emitter_estimates.rows() != meas.sensor_estimates.rows())
      throw IoError("measurement json: shapes disagree");
    return meas;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("measurement json: ") + e.what());
  }
}

void save_measurement(const MeasurementSet& meas, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << measurement_to_json(meas);
  if (!out) throw IoError("failed writing '" + path + "'");
}

MeasurementSet load_measurement(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return measurement_from_json(buf.str());
}

Matrix import_tdoa_csv(const std::string& path, int num_sensors, int num_emitters,
                       double speed_of_sound) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  Matrix r(num_sensors, num_emitters);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen(num_sensors, num_emitters);
  seen.setConstant(false);

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string si, ej, tdoa;
    if (!std::getline(fields, si, ',') || !std::getline(fields, ej, ',') ||
        !std::getline(fields, tdoa, ','))
      throw IoError("tdoa csv: malformed line " + std::to_string(line_no));
    try {
      const int i = std::stoi(si);
      const int j = std::stoi(ej);
      const double value = std::stod(tdoa);
      if (i < 1 || i > num_sensors || j < 1 || j > num_emitters)
        throw IoError("tdoa csv: index out of range at line " + std::to_string(line_no));
      if (seen(i - 1, j - 1))
        throw IoError("tdoa csv: duplicate entry at line " + std::to_string(line_no));
      seen(i - 1, j - 1) = true;
      r(i - 1, j - 1) = speed_of_sound * value;
    } catch (const std::invalid_argument&) {
      if (line_no == 1) continue;  // header row
      throw IoError("tdoa csv: non-numeric field at line " + std::to_string(line_no));
    } catch (const std::out_of_range&) {
      throw IoError("tdoa csv: value out of range at line " + std::to_string(line_no));
    }
  }
  if (!seen.all()) throw IoError("tdoa csv: missing (sensor, emitter) entries");
  return r;
}

}  // namespace wasncal
