#include "wasncal/analysis.hpp"

#include "wasncal/estimator.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace wasncal;
using namespace wasncal::testing;

namespace {

NoiseSpec default_noise() {
  NoiseSpec noise;
  noise.sigma_range = 1e-3;
  noise.sigma_emitter = 1e-3;
  noise.sigma_sensor = 1e-3;
  return noise;
}

CovarianceSet default_covs(const Scenario& scenario, const NoiseSpec& noise) {
  return build_covariances(noise, scenario.num_sensors(), scenario.num_emitters(),
                           scenario.dimension());
}

}  // namespace

TEST_CASE("calibration jacobian rows are unit directions with a trailing one") {
  PositionMatrix u = PositionMatrix::Zero(3, 1);
  u(0, 0) = 1.0;
  const Matrix jac = range_jacobian_wrt_calibration(u, Vector::Zero(3), 1);
  CHECK(jac.rows() == 1);
  CHECK(jac(0, 0) == doctest::Approx(1.0));
  CHECK(jac(0, 1) == doctest::Approx(0.0));
  CHECK(jac(0, 2) == doctest::Approx(0.0));
  CHECK(jac(0, 3) == doctest::Approx(1.0));

  const Scenario scenario = make_scenario(3);
  const Matrix full = range_jacobian_wrt_calibration(scenario.emitters, scenario.new_sensor,
                                                     scenario.num_sensors());
  for (int row = 0; row < full.rows(); ++row) {
    CHECK(full.row(row).head(3).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(full(row, 3) == 1.0);
  }
}

TEST_CASE("analytic jacobians match central finite differences") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    ScenarioSpec spec;
    spec.num_sensors = 3;
    spec.num_emitters = 6;
    const Scenario scenario = make_scenario(seed, spec);
    const int d = scenario.dimension();
    const double h = 1e-6;

    const Matrix jac_gamma = range_jacobian_wrt_calibration(
        scenario.emitters, scenario.new_sensor, scenario.num_sensors());
    for (int k = 0; k < d; ++k) {
      const Vector fd = central_difference(
          scenario, [k](Scenario& s, double step) { s.new_sensor(k) += step; }, h);
      CHECK((jac_gamma.col(k) - fd).norm() <= 1e-6 * fd.norm());
    }
    const Vector fd_offset = central_difference(
        scenario,
        [](Scenario& s, double step) { s.clock_offset += step / s.speed_of_sound; }, h);
    CHECK((jac_gamma.col(d) - fd_offset).norm() <= 1e-6 * fd_offset.norm());

    const Matrix jac_u = range_jacobian_wrt_emitters(scenario.emitters, scenario.sensors,
                                                     scenario.new_sensor);
    for (int j = 0; j < scenario.num_emitters(); ++j)
      for (int k = 0; k < d; ++k) {
        const Vector fd = central_difference(
            scenario, [j, k](Scenario& s, double step) { s.emitters(k, j) += step; }, h);
        CHECK((jac_u.col(d * j + k) - fd).norm() <= 1e-6 * (fd.norm() + 1e-12));
      }

    const Matrix jac_s = range_jacobian_wrt_sensors(scenario.emitters, scenario.sensors);
    for (int i = 0; i < scenario.num_sensors(); ++i)
      for (int k = 0; k < d; ++k) {
        const Vector fd = central_difference(
            scenario, [i, k](Scenario& s, double step) { s.sensors(k, i) += step; }, h);
        CHECK((jac_s.col(d * i + k) - fd).norm() <= 1e-6 * (fd.norm() + 1e-12));
      }
  }
}

TEST_CASE("emitter jacobian entries vanish when the new sensor sits on a sensor") {
  Scenario scenario = make_scenario(7);
  scenario.new_sensor = scenario.sensors.col(2);
  const Matrix jac = range_jacobian_wrt_emitters(scenario.emitters, scenario.sensors,
                                                 scenario.new_sensor);
  const int n = scenario.num_emitters();
  for (int j = 0; j < n; ++j)
    CHECK(jac.row(2 * n + j).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("sensor jacobian keeps the documented zero padding") {
  ScenarioSpec spec;
  spec.num_sensors = 2;
  spec.num_emitters = 5;
  const Scenario scenario = make_scenario(11, spec);
  const Matrix jac = range_jacobian_wrt_sensors(scenario.emitters, scenario.sensors);
  const int d = scenario.dimension();
  const int n = scenario.num_emitters();
  // rows of sensor 1 have zeros in sensor 2's columns and vice versa
  for (int j = 0; j < n; ++j) {
    CHECK(jac.row(j).segment(d, d).isZero());
    CHECK(jac.row(n + j).segment(0, d).isZero());
    CHECK(jac.row(j).segment(0, d).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("coincident points raise errors in the jacobians") {
  Scenario scenario = make_scenario(13);
  scenario.new_sensor = scenario.emitters.col(0);
  CHECK_THROWS_AS(range_jacobian_wrt_calibration(scenario.emitters, scenario.new_sensor,
                                                 scenario.num_sensors()),
                  CoincidentPairError);
}

TEST_CASE("fisher information equals its transpose exactly") {
  const Scenario scenario = make_scenario(17);
  const Matrix fisher = fisher_information(scenario, default_covs(scenario, default_noise()));
  CHECK((fisher - fisher.transpose()).norm() == 0.0);
}

TEST_CASE("fisher blocks match their defining quadratic forms") {
  ScenarioSpec spec;
  spec.num_sensors = 2;
  spec.num_emitters = 5;
  const Scenario scenario = make_scenario(19, spec);
  const NoiseSpec noise = default_noise();
  const CovarianceSet covs = default_covs(scenario, noise);
  const Matrix fisher = fisher_information(scenario, covs);

  const Matrix jg = range_jacobian_wrt_calibration(scenario.emitters, scenario.new_sensor,
                                                   scenario.num_sensors());
  const double inv_var = 1.0 / (noise.sigma_range * noise.sigma_range);
  const Matrix gamma_block = fisher.block(0, 0, 4, 4);
  CHECK((gamma_block - inv_var * jg.transpose() * jg).norm() <= 1e-9 * gamma_block.norm());

  // nuisance diagonal adds the prior information 1/sigma^2
  const int d = scenario.dimension();
  const Matrix ju = range_jacobian_wrt_emitters(scenario.emitters, scenario.sensors,
                                                scenario.new_sensor);
  const Matrix uu = fisher.block(4, 4, d * 5, d * 5);
  const Matrix expected_uu =
      inv_var * ju.transpose() * ju +
      Matrix::Identity(d * 5, d * 5) / (noise.sigma_emitter * noise.sigma_emitter);
  CHECK((uu - expected_uu).norm() <= 1e-9 * uu.norm());
}

TEST_CASE("singular covariances are rejected") {
  const Scenario scenario = make_scenario(23);
  CovarianceSet covs = default_covs(scenario, default_noise());
  covs.emitter_cov.setZero();
  CHECK_THROWS_AS(fisher_information(scenario, covs), SingularMatrixError);
}

TEST_CASE("vanishing position priors reduce the bound to the range-only form") {
  const Scenario scenario = make_scenario(7);
  NoiseSpec noise = default_noise();
  noise.sigma_emitter = 1e-9;  // variance 1e-18
  noise.sigma_sensor = 1e-9;
  const CrlbReport report = compute_crlb(scenario, default_covs(scenario, noise));

  const Matrix jg = range_jacobian_wrt_calibration(scenario.emitters, scenario.new_sensor,
                                                   scenario.num_sensors());
  const Matrix limit =
      (jg.transpose() * jg / (noise.sigma_range * noise.sigma_range)).inverse();
  const Matrix gamma_block = report.crlb.block(0, 0, 4, 4);
  CHECK((gamma_block - limit).norm() <= 1e-6 * limit.norm());
}

TEST_CASE("crlb diagonal is nonnegative and scales with range noise") {
  const Scenario scenario = make_scenario(7);
  const NoiseSpec noise = default_noise();
  const CrlbReport base = compute_crlb(scenario, default_covs(scenario, noise));
  CHECK(base.gamma_bounds.minCoeff() >= 0.0);
  CHECK(base.crlb.diagonal().minCoeff() >= 0.0);
  CHECK(base.reliable);
  CHECK(base.rmse_syn_bound ==
        doctest::Approx(std::sqrt(base.gamma_bounds(3)) / 343.0).epsilon(1e-12));

  CovarianceSet inflated = default_covs(scenario, noise);
  inflated.range_cov *= 4.0;
  const CrlbReport wider = compute_crlb(scenario, inflated);
  CHECK(wider.rmse_loc_bound > base.rmse_loc_bound);
}

TEST_CASE("weighted estimator covariance simplifies under identity weighting") {
  const Scenario scenario = make_scenario(29);
  const Matrix beta =
      reduced_ranges(true_range_diffs(scenario), scenario.emitters, scenario.sensors);
  const LinearSystem sys = build_linear_system(beta, scenario.emitters);
  const long rows = sys.design.rows();

  const double variance = 2.5e-5;
  const Matrix cov = estimator_covariance(sys.design, variance * Matrix::Identity(rows, rows));
  const Matrix expected = variance * (sys.design.transpose() * sys.design).inverse();
  CHECK((cov - expected).norm() <= 1e-9 * expected.norm());
  CHECK((cov - cov.transpose()).norm() <= 1e-12 * cov.norm());
}

TEST_CASE("predicted estimator covariance matches Monte Carlo variance") {
  const Scenario scenario = make_scenario(7);
  const NoiseSpec noise = default_noise();
  const CovarianceSet covs = default_covs(scenario, noise);

  // Truth-referenced weighting on both sides of the comparison.
  const Matrix beta_true =
      reduced_ranges(true_range_diffs(scenario), scenario.emitters, scenario.sensors);
  const LinearSystem sys_true = build_linear_system(beta_true, scenario.emitters);
  const NoiseWeights weights =
      build_noise_weights(scenario.emitters, scenario.sensors, scenario.new_sensor);
  const Matrix psi = assemble_residual_covariance(weights, covs);
  const Matrix predicted = estimator_covariance(sys_true.design, psi);

  const int trials = 4000;
  Matrix samples(4, trials);
  Rng rng = make_rng(404);
  for (int t = 0; t < trials; ++t) {
    const MeasurementSet meas = corrupt(scenario, noise, rng);
    const Matrix beta =
        reduced_ranges(meas.range_diffs, meas.emitter_estimates, meas.sensor_estimates);
    const LinearSystem sys = build_linear_system(beta, meas.emitter_estimates);
    const CalibrationEstimate est = wls_solve(sys, psi, scenario.speed_of_sound);
    samples.col(t).head(3) = est.position;
    samples(3, t) = est.range_offset;
  }
  const Vector mean = samples.rowwise().mean();
  for (int k = 0; k < 4; ++k) {
    const double var =
        (samples.row(k).array() - mean(k)).square().sum() / double(trials - 1);
    CHECK(var == doctest::Approx(predicted(k, k)).epsilon(0.25));
  }
}

TEST_CASE("estimator covariance never undercuts the calibration bound") {
  // Both evaluated at the truth with the same covariances; near-efficiency
  // means the difference is PSD up to numerical slack.
  for (std::uint64_t seed : {7ull, 19ull, 31ull}) {
    const Scenario scenario = make_scenario(seed);
    const NoiseSpec noise = default_noise();
    const CovarianceSet covs = default_covs(scenario, noise);

    const Matrix beta =
        reduced_ranges(true_range_diffs(scenario), scenario.emitters, scenario.sensors);
    const LinearSystem sys = build_linear_system(beta, scenario.emitters);
    const NoiseWeights weights =
        build_noise_weights(scenario.emitters, scenario.sensors, scenario.new_sensor);
    const Matrix psi = assemble_residual_covariance(weights, covs);
    const Matrix wlst = estimator_covariance(sys.design, psi);

    const Matrix crlb_gamma = compute_crlb(scenario, covs).crlb.block(0, 0, 4, 4);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(wlst - crlb_gamma);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * crlb_gamma.norm());
  }
}

TEST_CASE("distance linearization behaves as a first-order model") {
  Vector u(3), s(3);
  u << 1.0, 0.2, -0.3;
  s << -0.4, 0.5, 0.1;
  const Vector zero = Vector::Zero(3);

  CHECK(linearized_distance_delta(u, s, zero, zero) == 0.0);

  const Vector radial = (u - s).normalized();
  Vector orthogonal(3);
  orthogonal << -(u - s)(1), (u - s)(0), 0.0;
  orthogonal.normalize();

  auto exact_delta = [&](const Vector& du) { return (u + du - s).norm() - (u - s).norm(); };

  // Radial perturbations are linear in the distance itself: no quadratic term.
  for (double eps : {1e-3, 1e-5}) {
    const double approx = linearized_distance_delta(u, s, eps * radial, zero);
    CHECK(std::abs(approx - exact_delta(eps * radial)) < 1e-12);
  }

  // Orthogonal perturbations have zero linear part and positive exact change.
  const double ortho_approx = linearized_distance_delta(u, s, 1e-3 * orthogonal, zero);
  CHECK(ortho_approx == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(exact_delta(1e-3 * orthogonal) > 0.0);

  // Generic directions lose accuracy quadratically: halving the step shrinks
  // the residual by nearly four.
  const Vector generic = (0.8 * radial + 0.6 * orthogonal).normalized();
  double previous = std::abs(linearized_distance_delta(u, s, 1e-3 * generic, zero) -
                             exact_delta(1e-3 * generic));
  for (double eps : {5e-4, 2.5e-4}) {
    const double residual =
        std::abs(linearized_distance_delta(u, s, eps * generic, zero) - exact_delta(eps * generic));
    CHECK(previous / residual >= 3.5);
    previous = residual;
  }

  CHECK_THROWS_AS(linearized_distance_delta(u, u, zero, zero), CoincidentPairError);
}

TEST_CASE("linearization residual is quadratic over four decades") {
  Vector u(3), s(3);
  u << 0.9, -0.1, 0.4;
  s << -0.2, 0.3, -0.5;
  Vector direction(3);
  direction << 0.48, -0.6, 0.64;
  direction.normalize();
  const Vector zero = Vector::Zero(3);

  std::vector<double> log_eps, log_res;
  for (double eps = 1e-6; eps <= 1.01e-2; eps *= 10.0) {
    const double approx = linearized_distance_delta(u, s, eps * direction, zero);
    const double exact = (u + eps * direction - s).norm() - (u - s).norm();
    log_eps.push_back(std::log10(eps));
    log_res.push_back(std::log10(std::abs(approx - exact)));
  }
  // least-squares slope
  const double n = static_cast<double>(log_eps.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < log_eps.size(); ++k) {
    sx += log_eps[k];
    sy += log_res[k];
    sxx += log_eps[k] * log_eps[k];
    sxy += log_eps[k] * log_res[k];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
}
