#include "wasncal/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace wasncal {

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kCoincidenceTolerance = 1e-9;  // meters
constexpr double kPivotTolerance = 1e-14;

// Solves min ||rhs - design * x|| by SVD; throws on numerical rank loss.
// Returns the solution and the singular-value ratio.
std::pair<Vector, double> orthogonal_least_squares(const Matrix& design, const Vector& rhs) {
  Eigen::JacobiSVD<Matrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double largest = sv(0);
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > kRankTolerance * largest)) {
    std::ostringstream msg;
    msg << "design matrix is rank deficient: smallest singular value " << smallest
        << " (largest " << largest << "); emitter geometry is degenerate";
    throw RankDeficiencyError(msg.str(), smallest);
  }
  return {svd.solve(rhs), largest / smallest};
}

CalibrationEstimate make_estimate(const Vector& solution, double speed_of_sound,
                                  std::string method, int iterations, double condition) {
  CalibrationEstimate est;
  est.position = solution.head(solution.size() - 1);
  est.range_offset = solution(solution.size() - 1);
  est.speed_of_sound = speed_of_sound;
  est.method = std::move(method);
  est.iterations_used = iterations;
  est.condition = condition;
  return est;
}

}  // namespace

int SolverOptions::resolve_reference(int num_emitters) const {
  const int ref = reference_emitter == 0 ? num_emitters : reference_emitter;
  if (ref < 1 || ref > num_emitters)
    throw ConfigError("reference emitter index out of range");
  return ref;
}

Matrix reduced_ranges(const Matrix& range_diffs, const PositionMatrix& emitter_estimates,
                      const PositionMatrix& sensor_estimates) {
  const int m = static_cast<int>(range_diffs.rows());
  const int n = static_cast<int>(range_diffs.cols());
  if (emitter_estimates.cols() != n || sensor_estimates.cols() != m ||
      emitter_estimates.rows() != sensor_estimates.rows())
    throw DimensionError("reduced_ranges: inconsistent shapes");
  Matrix beta(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      beta(i, j) =
          range_diffs(i, j) - (emitter_estimates.col(j) - sensor_estimates.col(i)).norm();
  return beta;
}

LinearSystem build_linear_system(const Matrix& reduced, const PositionMatrix& emitter_estimates,
                                 const SolverOptions& options) {
  const int m = static_cast<int>(reduced.rows());
  const int n = static_cast<int>(reduced.cols());
  const int d = static_cast<int>(emitter_estimates.rows());
  if (emitter_estimates.cols() != n)
    throw DimensionError("build_linear_system: emitter count mismatch");
  if (n < d + 2)
    throw DimensionError("build_linear_system: need at least D + 2 emitters");
  const int ref = options.resolve_reference(n) - 1;

  LinearSystem sys;
  sys.rhs.resize(m * (n - 1));
  sys.design.resize(m * (n - 1), d + 1);
  const double ref_norm2 = emitter_estimates.col(ref).squaredNorm();
  int row = 0;
  for (int i = 0; i < m; ++i) {
    const double beta_ref = reduced(i, ref);
    for (int j = 0; j < n; ++j) {
      if (j == ref) continue;
      const double beta = reduced(i, j);
      sys.rhs(row) = 0.5 * (beta * beta - beta_ref * beta_ref -
                            emitter_estimates.col(j).squaredNorm() + ref_norm2);
      sys.design.block(row, 0, 1, d) =
          (emitter_estimates.col(ref) - emitter_estimates.col(j)).transpose();
      sys.design(row, d) = beta - beta_ref;
      ++row;
    }
  }
  return sys;
}

CalibrationEstimate ls_solve(const LinearSystem& sys, double speed_of_sound) {
  auto [solution, condition] = orthogonal_least_squares(sys.design, sys.rhs);
  return make_estimate(solution, speed_of_sound, "LS", 0, condition);
}

NoiseWeights build_noise_weights(const PositionMatrix& emitters, const PositionMatrix& sensors,
                                 const Vector& new_sensor, int reference_emitter) {
  const int d = static_cast<int>(emitters.rows());
  const int n = static_cast<int>(emitters.cols());
  const int m = static_cast<int>(sensors.cols());
  if (sensors.rows() != d || new_sensor.size() != d)
    throw DimensionError("build_noise_weights: dimension mismatch");
  const int ref = (reference_emitter == 0 ? n : reference_emitter) - 1;
  if (ref < 0 || ref >= n) throw ConfigError("reference emitter index out of range");

  // Distances from the new sensor; the reference-position approximation
  // replaces truth with estimates here.
  Vector dist_p(n);
  for (int j = 0; j < n; ++j) dist_p(j) = (emitters.col(j) - new_sensor).norm();

  Matrix dist_su(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      dist_su(i, j) = (emitters.col(j) - sensors.col(i)).norm();
      if (dist_su(i, j) < kCoincidenceTolerance) {
        std::ostringstream msg;
        msg << "emitter " << j + 1 << " coincides with sensor " << i + 1;
        throw CoincidentPairError(msg.str());
      }
    }

  const int rows = m * (n - 1);
  NoiseWeights w;
  w.range = Matrix::Zero(rows, n * m);
  w.emitter = Matrix::Zero(rows, d * n);
  w.sensor = Matrix::Zero(rows, d * m);
  w.second_order = Matrix::Zero(rows, n * m);

  int row = 0;
  for (int i = 0; i < m; ++i) {
    // Range-noise coefficients: -distance for the paired emitter, +distance
    // for the reference one.
    const Vector unit_ref = (emitters.col(ref) - sensors.col(i)) / dist_su(i, ref);
    const Vector a_ref_u = dist_p(ref) * unit_ref - (emitters.col(ref) - new_sensor);
    const Vector a_ref_s = -dist_p(ref) * unit_ref;
    for (int j = 0; j < n; ++j) {
      if (j == ref) continue;
      w.range(row, i * n + j) = -dist_p(j);
      w.range(row, i * n + ref) = dist_p(ref);

      const Vector unit = (emitters.col(j) - sensors.col(i)) / dist_su(i, j);
      const Vector a_u = dist_p(j) * unit - (emitters.col(j) - new_sensor);
      w.emitter.block(row, d * j, 1, d) = a_u.transpose();
      w.emitter.block(row, d * ref, 1, d) = -a_ref_u.transpose();

      const Vector a_s = -dist_p(j) * unit;
      w.sensor.block(row, d * i, 1, d) = (a_s - a_ref_s).transpose();

      w.second_order(row, i * n + j) = 0.5;
      w.second_order(row, i * n + ref) = -0.5;
      ++row;
    }
  }
  return w;
}

Matrix assemble_residual_covariance(const NoiseWeights& weights, const CovarianceSet& covs) {
  if (weights.range.cols() != covs.range_cov.rows() ||
      weights.emitter.cols() != covs.emitter_cov.rows() ||
      weights.sensor.cols() != covs.sensor_cov.rows())
    throw DimensionError("assemble_residual_covariance: shape mismatch");

  Matrix psi = weights.range * covs.range_cov * weights.range.transpose();
  psi += weights.emitter * covs.emitter_cov * weights.emitter.transpose();
  psi += weights.sensor * covs.sensor_cov * weights.sensor.transpose();

  const Matrix ru = weights.range * covs.range_emitter_cov * weights.emitter.transpose();
  const Matrix rs = weights.range * covs.range_sensor_cov * weights.sensor.transpose();
  const Matrix us = weights.emitter * covs.emitter_sensor_cov * weights.sensor.transpose();
  psi += ru + ru.transpose() + rs + rs.transpose() + us + us.transpose();

  psi = 0.5 * (psi + psi.transpose()).eval();
  return psi;
}

CalibrationEstimate wls_solve(const LinearSystem& sys, const Matrix& residual_cov,
                              double speed_of_sound, double regularization_eps) {
  const auto rows = sys.design.rows();
  if (residual_cov.rows() != rows || residual_cov.cols() != rows)
    throw DimensionError("wls_solve: residual covariance shape mismatch");
  if (!residual_cov.allFinite())
    throw SingularMatrixError("wls_solve: residual covariance has non-finite entries");

  const double trace = residual_cov.trace();
  if (trace <= 0.0) {
    // Exact measurements: any positive-definite weighting gives the same
    // solution, so fall back to identity weights.
    auto [solution, condition] = orthogonal_least_squares(sys.design, sys.rhs);
    return make_estimate(solution, speed_of_sound, "WLS-1", 1, condition);
  }

  Matrix weighted = residual_cov;
  if (regularization_eps > 0.0)
    weighted += regularization_eps * (trace / static_cast<double>(rows)) *
                Matrix::Identity(rows, rows);

  Eigen::LDLT<Matrix> ldlt(weighted);
  const Vector pivots = ldlt.vectorD();
  const double pivot_max = pivots.maxCoeff();
  const double pivot_min = pivots.minCoeff();
  if (ldlt.info() != Eigen::Success || !(pivot_min > kPivotTolerance * pivot_max)) {
    std::ostringstream msg;
    msg << "residual covariance is numerically singular (pivot ratio "
        << pivot_min / pivot_max << "); consider a ridge via regularization_eps";
    throw SingularMatrixError(msg.str());
  }

  // Whiten with the factorization instead of forming an inverse, then solve
  // the plain least-squares problem on the whitened system.
  const Eigen::Transpositions<Eigen::Dynamic> perm = ldlt.transpositionsP();
  Matrix design_w = perm * sys.design;
  Vector rhs_w = perm * sys.rhs;
  ldlt.matrixL().solveInPlace(design_w);
  ldlt.matrixL().solveInPlace(rhs_w);
  const Vector inv_sqrt = pivots.array().sqrt().inverse();
  design_w.array().colwise() *= inv_sqrt.array();
  rhs_w.array() *= inv_sqrt.array();

  const Vector solution = orthogonal_least_squares(design_w, rhs_w).first;
  return make_estimate(solution, speed_of_sound, "WLS-1", 1, pivot_max / pivot_min);
}

std::vector<CalibrationEstimate> calibrate_trace(const MeasurementSet& meas,
                                                 const CovarianceSet& covs,
                                                 const SolverOptions& options,
                                                 double speed_of_sound) {
  if (options.wls_iterations < 0)
    throw ConfigError("wls_iterations must be nonnegative");
  const int ref = options.resolve_reference(meas.num_emitters());

  const Matrix beta =
      reduced_ranges(meas.range_diffs, meas.emitter_estimates, meas.sensor_estimates);
  const LinearSystem sys = build_linear_system(beta, meas.emitter_estimates, options);

  std::vector<CalibrationEstimate> trace;
  trace.reserve(options.wls_iterations + 1);
  trace.push_back(ls_solve(sys, speed_of_sound));

  for (int k = 1; k <= options.wls_iterations; ++k) {
    try {
      const NoiseWeights weights = build_noise_weights(
          meas.emitter_estimates, meas.sensor_estimates, trace.back().position, ref);
      const Matrix psi = assemble_residual_covariance(weights, covs);
      CalibrationEstimate est =
          wls_solve(sys, psi, speed_of_sound, options.regularization_eps);
      est.method = "WLS-" + std::to_string(k);
      est.iterations_used = k;
      trace.push_back(std::move(est));
    } catch (const Error&) {
      // Conditioning failed: degrade to the last good iterate for the rest.
      CalibrationEstimate degraded = trace.back();
      degraded.degraded = true;
      for (int rest = k; rest <= options.wls_iterations; ++rest) trace.push_back(degraded);
      break;
    }
  }
  return trace;
}

CalibrationEstimate calibrate(const MeasurementSet& meas, const CovarianceSet& covs,
                              const SolverOptions& options, double speed_of_sound) {
  return calibrate_trace(meas, covs, options, speed_of_sound).back();
}

}  // namespace wasncal
