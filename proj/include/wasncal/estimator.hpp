#pragma once

#include "wasncal/measurement.hpp"
#include "wasncal/types.hpp"

#include <string>
#include <vector>

namespace wasncal {

// Linearized calibration system. Row (i, j) pairs sensor i with non-reference
// emitter j; rows are sensor-major, emitters in increasing index order.
struct LinearSystem {
  Vector rhs;     // M(N-1), meters^2
  Matrix design;  // M(N-1) x (D+1); first D columns positions, last column range
};

// Weights that map the stacked measurement noise onto the linearized
// residual. Shapes: range M(N-1) x NM, emitter M(N-1) x DN,
// sensor M(N-1) x DM, second_order M(N-1) x NM.
struct NoiseWeights {
  Matrix range;         // applied to range-difference noise
  Matrix emitter;       // applied to emitter position noise
  Matrix sensor;        // applied to sensor position noise
  Matrix second_order;  // rows carry +1/2 and -1/2; diagnostics only
};

struct SolverOptions {
  int wls_iterations = 1;          // 0 => plain least squares
  double regularization_eps = 0.0; // ridge factor applied to the residual covariance
  // 1-based emitter index used as the linearization reference; 0 selects the
  // last emitter.
  int reference_emitter = 0;

  int resolve_reference(int num_emitters) const;  // validated, 1-based
};

struct CalibrationEstimate {
  Vector position;            // D, meters
  double range_offset = 0.0;  // meters
  double speed_of_sound = 343.0;
  std::string method;         // "LS" or "WLS-k"
  int iterations_used = 0;
  // Condition diagnostic: singular-value ratio of the design matrix for LS,
  // pivot ratio of the residual covariance for WLS.
  double condition = 0.0;
  // True when a WLS iteration failed conditioning and an earlier iterate was
  // returned instead.
  bool degraded = false;

  double clock_offset() const { return range_offset / speed_of_sound; }
};

// Reduced ranges: measured range difference minus the estimated
// sensor-emitter distance. Noise-free this equals
// range_offset - ||emitter_j - new_sensor||.
Matrix reduced_ranges(const Matrix& range_diffs, const PositionMatrix& emitter_estimates,
                      const PositionMatrix& sensor_estimates);

// Builds the linear system by differencing each emitter's squared equation
// against the reference emitter's. Throws DimensionError when N < D + 2.
LinearSystem build_linear_system(const Matrix& reduced, const PositionMatrix& emitter_estimates,
                                 const SolverOptions& options = {});

// Unweighted solution via orthogonal (SVD) decomposition. Throws
// RankDeficiencyError when the design matrix is numerically rank deficient.
CalibrationEstimate ls_solve(const LinearSystem& sys, double speed_of_sound = 343.0);

// Noise-to-residual weights evaluated at reference positions (estimates, or
// truth in analysis code). Throws CoincidentPairError when an emitter and a
// sensor estimate coincide.
NoiseWeights build_noise_weights(const PositionMatrix& emitters, const PositionMatrix& sensors,
                                 const Vector& new_sensor, int reference_emitter = 0);

// Covariance of the linearized residual: sums the weighted noise covariance
// blocks (second-order terms excluded). Result is exactly symmetric.
Matrix assemble_residual_covariance(const NoiseWeights& weights, const CovarianceSet& covs);

// Weighted solution. The residual covariance is factorized, never inverted
// explicitly; an all-zero covariance (exact measurements) falls back to
// identity weighting. Throws SingularMatrixError when conditioning fails
// after optional ridge regularization.
CalibrationEstimate wls_solve(const LinearSystem& sys, const Matrix& residual_cov,
                              double speed_of_sound = 343.0, double regularization_eps = 0.0);

// Full pipeline: LS bootstrap, then wls_iterations rounds of reweighting at
// the previous iterate. Failed iterations degrade to the last good estimate.
CalibrationEstimate calibrate(const MeasurementSet& meas, const CovarianceSet& covs,
                              const SolverOptions& options, double speed_of_sound = 343.0);

// Same pipeline, returning every iterate: index 0 is LS, index k the k-th WLS
// refinement. Lets callers evaluate LS/WLS-1/WLS-5 on one measurement pass.
std::vector<CalibrationEstimate> calibrate_trace(const MeasurementSet& meas,
                                                 const CovarianceSet& covs,
                                                 const SolverOptions& options,
                                                 double speed_of_sound = 343.0);

}  // namespace wasncal
