#include "wasncal/analysis.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

namespace wasncal {

namespace {

constexpr double kCoincidenceTolerance = 1e-9;  // meters
constexpr double kConditionGuard = 1e12;

Vector unit_between(const Vector& from, const Vector& to, const char* what) {
  const Vector diff = to - from;
  const double dist = diff.norm();
  if (dist < kCoincidenceTolerance) throw CoincidentPairError(what);
  return diff / dist;
}

// Inverse of a symmetric positive-definite covariance block, symmetrized so
// the assembled Fisher matrix is exactly equal to its transpose.
Matrix symmetric_inverse(const Matrix& mat, const char* what) {
  Eigen::LDLT<Matrix> ldlt(mat);
  const Vector pivots = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 0.0))
    throw SingularMatrixError(std::string(what) + " is singular; cannot form its inverse");
  Matrix inv = ldlt.solve(Matrix::Identity(mat.rows(), mat.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

Matrix range_jacobian_wrt_calibration(const PositionMatrix& emitters, const Vector& new_sensor,
                                      int num_sensors) {
  const int d = static_cast<int>(emitters.rows());
  const int n = static_cast<int>(emitters.cols());
  Matrix jac(num_sensors * n, d + 1);
  for (int j = 0; j < n; ++j) {
    const Vector unit =
        unit_between(new_sensor, emitters.col(j), "new sensor coincides with an emitter");
    for (int i = 0; i < num_sensors; ++i) {
      jac.block(i * n + j, 0, 1, d) = unit.transpose();
      jac(i * n + j, d) = 1.0;
    }
  }
  return jac;
}

Matrix range_jacobian_wrt_emitters(const PositionMatrix& emitters, const PositionMatrix& sensors,
                                   const Vector& new_sensor) {
  const int d = static_cast<int>(emitters.rows());
  const int n = static_cast<int>(emitters.cols());
  const int m = static_cast<int>(sensors.cols());
  Matrix jac = Matrix::Zero(m * n, d * n);
  for (int j = 0; j < n; ++j) {
    const Vector unit_p =
        unit_between(new_sensor, emitters.col(j), "new sensor coincides with an emitter");
    for (int i = 0; i < m; ++i) {
      const Vector unit_s =
          unit_between(sensors.col(i), emitters.col(j), "emitter coincides with a sensor");
      jac.block(i * n + j, d * j, 1, d) = (unit_s - unit_p).transpose();
    }
  }
  return jac;
}

Matrix range_jacobian_wrt_sensors(const PositionMatrix& emitters, const PositionMatrix& sensors) {
  const int d = static_cast<int>(emitters.rows());
  const int n = static_cast<int>(emitters.cols());
  const int m = static_cast<int>(sensors.cols());
  Matrix jac = Matrix::Zero(m * n, d * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const Vector unit =
          unit_between(sensors.col(i), emitters.col(j), "emitter coincides with a sensor");
      jac.block(i * n + j, d * i, 1, d) = -unit.transpose();
    }
  return jac;
}

Matrix fisher_information(const Scenario& scenario, const CovarianceSet& covs) {
  const int d = scenario.dimension();
  const int n = scenario.num_emitters();
  const int m = scenario.num_sensors();
  const int n_gamma = d + 1;
  const int n_u = d * n;
  const int n_s = d * m;

  const Matrix jac_gamma =
      range_jacobian_wrt_calibration(scenario.emitters, scenario.new_sensor, m);
  const Matrix jac_u =
      range_jacobian_wrt_emitters(scenario.emitters, scenario.sensors, scenario.new_sensor);
  const Matrix jac_s = range_jacobian_wrt_sensors(scenario.emitters, scenario.sensors);

  const Matrix range_info = symmetric_inverse(covs.range_cov, "range covariance");
  const Matrix emitter_info = symmetric_inverse(covs.emitter_cov, "emitter covariance");
  const Matrix sensor_info = symmetric_inverse(covs.sensor_cov, "sensor covariance");

  const Matrix wg = range_info * jac_gamma;
  const Matrix wu = range_info * jac_u;
  const Matrix ws = range_info * jac_s;

  const int total = n_gamma + n_u + n_s;
  Matrix fisher(total, total);
  auto symmetrized = [](const Matrix& x) { return (0.5 * (x + x.transpose())).eval(); };

  fisher.block(0, 0, n_gamma, n_gamma) = symmetrized(jac_gamma.transpose() * wg);
  fisher.block(0, n_gamma, n_gamma, n_u) = jac_gamma.transpose() * wu;
  fisher.block(0, n_gamma + n_u, n_gamma, n_s) = jac_gamma.transpose() * ws;
  fisher.block(n_gamma, n_gamma, n_u, n_u) = symmetrized(jac_u.transpose() * wu) + emitter_info;
  fisher.block(n_gamma, n_gamma + n_u, n_u, n_s) = jac_u.transpose() * ws;
  fisher.block(n_gamma + n_u, n_gamma + n_u, n_s, n_s) =
      symmetrized(jac_s.transpose() * ws) + sensor_info;

  // Mirror the upper triangle so the matrix equals its transpose exactly.
  fisher.block(n_gamma, 0, n_u, n_gamma) = fisher.block(0, n_gamma, n_gamma, n_u).transpose();
  fisher.block(n_gamma + n_u, 0, n_s, n_gamma) =
      fisher.block(0, n_gamma + n_u, n_gamma, n_s).transpose();
  fisher.block(n_gamma + n_u, n_gamma, n_s, n_u) =
      fisher.block(n_gamma, n_gamma + n_u, n_u, n_s).transpose();
  return fisher;
}

CrlbReport compute_crlb(const Scenario& scenario, const CovarianceSet& covs) {
  CrlbReport report;
  report.fisher = fisher_information(scenario, covs);

  // LDLT keeps the strongly scaled nuisance blocks from polluting the
  // calibration block of the inverse; the pivot ratio doubles as the
  // condition diagnostic.
  Eigen::LDLT<Matrix> ldlt(report.fisher);
  const Vector pivots = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 0.0))
    throw SingularMatrixError("Fisher information is singular: degenerate geometry");

  report.condition = pivots.maxCoeff() / pivots.minCoeff();
  report.reliable = report.condition < kConditionGuard;
  report.crlb = ldlt.solve(Matrix::Identity(report.fisher.rows(), report.fisher.cols()));
  report.crlb = 0.5 * (report.crlb + report.crlb.transpose()).eval();

  const int d = scenario.dimension();
  report.gamma_bounds = report.crlb.diagonal().head(d + 1);
  report.rmse_loc_bound = std::sqrt(report.gamma_bounds.head(d).sum());
  report.rmse_syn_bound = std::sqrt(report.gamma_bounds(d)) / scenario.speed_of_sound;
  return report;
}

std::string CrlbReport::to_string() const {
  std::ostringstream out;
  out << "parameters: " << fisher.rows() << "\n"
      << "calibration variance bounds (m^2):";
  for (int k = 0; k < gamma_bounds.size(); ++k) out << " " << gamma_bounds(k);
  out << "\nlocalization rmse bound: " << rmse_loc_bound << " m\n"
      << "synchronization rmse bound: " << rmse_syn_bound << " s\n"
      << "fisher condition: " << condition << (reliable ? "" : " (bound unreliable)") << "\n";
  return out.str();
}

Matrix estimator_covariance(const Matrix& design, const Matrix& residual_cov) {
  if (residual_cov.rows() != design.rows() || residual_cov.cols() != design.rows())
    throw DimensionError("estimator_covariance: shape mismatch");

  Eigen::LDLT<Matrix> ldlt(residual_cov);
  const Vector pivots = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 0.0))
    throw SingularMatrixError("estimator_covariance: residual covariance is singular");

  const Matrix whitened = ldlt.solve(design);
  Matrix normal = design.transpose() * whitened;
  normal = 0.5 * (normal + normal.transpose()).eval();

  Eigen::LDLT<Matrix> info(normal);
  if (info.info() != Eigen::Success || !(info.vectorD().minCoeff() > 0.0))
    throw SingularMatrixError("estimator_covariance: information matrix is singular");
  Matrix cov = info.solve(Matrix::Identity(normal.rows(), normal.cols()));
  return 0.5 * (cov + cov.transpose()).eval();
}

double linearized_distance_delta(const Vector& u, const Vector& s, const Vector& du,
                                 const Vector& ds) {
  const Vector diff = u - s;
  const double dist = diff.norm();
  if (dist < kCoincidenceTolerance)
    throw CoincidentPairError("linearized_distance_delta: coincident points");
  return diff.dot(du - ds) / dist;
}

}  // namespace wasncal
