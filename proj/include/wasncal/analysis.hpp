#pragma once

#include "wasncal/geometry.hpp"
#include "wasncal/measurement.hpp"
#include "wasncal/types.hpp"

#include <string>

namespace wasncal {

// Fisher information over the full parameter vector [position; range offset;
// emitter coords; sensor coords] and the bounds extracted from its inverse.
struct CrlbReport {
  Matrix fisher;       // (D+1+DN+DM)^2
  Matrix crlb;         // inverse of fisher
  Vector gamma_bounds; // first D+1 diagonal entries, m^2
  double rmse_loc_bound = 0.0;  // meters
  double rmse_syn_bound = 0.0;  // seconds
  double condition = 0.0;       // eigenvalue ratio of the Fisher matrix
  // False when the Fisher matrix conditioning exceeds the guard (1e12); the
  // bound values are still reported but should not be trusted.
  bool reliable = true;

  std::string to_string() const;
};

// Jacobian of the stacked range differences w.r.t. [position, range offset].
// Row (i, j) is [(u_j - p)^T / ||u_j - p||, 1]. Throws CoincidentPairError
// when the new sensor sits on an emitter.
Matrix range_jacobian_wrt_calibration(const PositionMatrix& emitters, const Vector& new_sensor,
                                      int num_sensors);

// Jacobian w.r.t. the stacked emitter coordinates: per-sensor blocks are
// diagonal in the emitter index.
Matrix range_jacobian_wrt_emitters(const PositionMatrix& emitters, const PositionMatrix& sensors,
                                   const Vector& new_sensor);

// Jacobian w.r.t. the stacked sensor coordinates: sensor i's block occupies
// columns D(i-1)..Di, zeros elsewhere.
Matrix range_jacobian_wrt_sensors(const PositionMatrix& emitters, const PositionMatrix& sensors);

// Assembles the symmetric block Fisher information under independent
// Gaussian noise. Throws SingularMatrixError when a covariance block cannot
// be factorized.
Matrix fisher_information(const Scenario& scenario, const CovarianceSet& covs);

// Inverts the Fisher matrix and extracts the calibration bounds.
CrlbReport compute_crlb(const Scenario& scenario, const CovarianceSet& covs);

// First-order covariance of the weighted estimator:
// (design^T residual_cov^{-1} design)^{-1}, symmetric PSD.
Matrix estimator_covariance(const Matrix& design, const Matrix& residual_cov);

// First-order change of ||(u + du) - (s + ds)|| - ||u - s||:
// (u - s)^T (du - ds) / ||u - s||. Exact for radial perturbations; the
// residual is quadratic in the orthogonal component.
double linearized_distance_delta(const Vector& u, const Vector& s, const Vector& du,
                                 const Vector& ds);

}  // namespace wasncal
