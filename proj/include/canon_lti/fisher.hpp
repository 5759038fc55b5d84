#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "canon_lti/canonical.hpp"
#include "canon_lti/inference.hpp"
#include "canon_lti/lti_core.hpp"
#include "canon_lti/params.hpp"
#include "canon_lti/posterior.hpp"

namespace canon_lti {

enum class FimMethod { NoiselessRecursive, KalmanSensitivity, NumericExpected };

struct FimResult {
  MatrixXd matrix;
  FimMethod method = FimMethod::NoiselessRecursive;
  int realizations = 0;  // NumericExpected only
  int T = 0;
};

/// Directions for (a, b[, d0]) of a canonical form.
std::vector<ModelDerivative> canonical_directions(const CanonicalSiso& c, bool include_d0 = false);

/// Directions for (vec A, vec B, vec C[, vec D]).
std::vector<ModelDerivative> standard_directions(const StateSpaceSystem& sys, bool include_d = false);

/// Noiseless information (1/sigma^2) sum_t g_t^T g_t along arbitrary
/// directions, with g_t the output sensitivity from the state-sensitivity
/// recursion started at x_0 = 0.
MatrixXd fim_noiseless(const StateSpaceSystem& sys, const std::vector<ModelDerivative>& directions,
                       const MatrixXd& u, double sigma_obs);

FimResult fim_noiseless(const CanonicalSiso& c, const MatrixXd& u, double sigma_obs,
                        bool include_d0 = false);

/// Standard-parameter information of a state-space system in the noiseless regime.
FimResult fim_standard_noiseless(const StateSpaceSystem& sys, const MatrixXd& u, double sigma_obs,
                                 bool include_d = false);

/// Expected information through the Kalman sensitivity recursions.
FimResult fim_kalman(const CanonicalSiso& c, const MatrixXd& u, const NoiseSpec& noise,
                     bool include_d0 = false);

/// Same, for every entry of a layout's parameter vector (noise scales included).
FimResult fim_kalman(const ParamLayout& layout, const VectorXd& theta, const MatrixXd& u);

/// Observed information (negative Hessian of the Kalman log-likelihood in the
/// layout's coordinates, central differences of the analytic gradient) at
/// theta_hat, averaged over trajectories simulated from the truth with the
/// given seeds.
FimResult fim_numeric_expected(const ParamLayout& layout, const VectorXd& theta_hat,
                               const StateSpaceSystem& truth, const NoiseSpec& truth_noise,
                               const MatrixXd& u, const std::vector<std::uint64_t>& seeds,
                               int n_threads = 1, double h = 1e-4);

/// M realizations with seeds derived from seed.
FimResult fim_numeric_expected(const ParamLayout& layout, const VectorXd& theta_hat,
                               const StateSpaceSystem& truth, const NoiseSpec& truth_noise,
                               const MatrixXd& u, int M, std::uint64_t seed, int n_threads = 1);

/// Negative Hessian of the log-likelihood from second differences of its values.
MatrixXd observed_information_fd(const ParamLayout& layout, const VectorXd& theta,
                                 const Trajectory& traj, double h = 1e-4);

/// Eigenvalues below rel_tol * lambda_max.
int count_small_eigenvalues(const MatrixXd& F, double rel_tol = 1e-6);

struct EllipsoidVolume {
  double log_volume = 0.0;
  bool singular = false;  // log_volume is +inf
};

/// log volume of {d : d^T F d <= r2}.
EllipsoidVolume ellipsoid_log_volume_radius(const MatrixXd& F, double r2, double rel_tol = 1e-6);

/// r2 is the chi-square quantile with dim degrees of freedom at the given confidence.
EllipsoidVolume ellipsoid_log_volume(const MatrixXd& F, double confidence,
                                     double rel_tol = 1e-6);

struct BvmReport {
  double log_volume_ratio = 0.0;  // log|Sigma_post| - log|F^{-1}|
  VectorXd z_scores;              // (PME - truth) / sqrt(diag F^{-1})
  double mahalanobis = 0.0;       // sqrt((PME - truth)^T F (PME - truth))
};

/// Uses the leading F.rows() coordinates of the draws. Throws NumericalError
/// for a singular F or a rank-deficient sample covariance.
BvmReport bvm_report(const PosteriorSamples& samples, const MatrixXd& F, const VectorXd& truth);

/// Same comparison on a plain sample matrix (one row per draw).
BvmReport bvm_report(const MatrixXd& draws, const MatrixXd& F, const VectorXd& truth);

struct CurvatureResult {
  MatrixXd matrix;
  int used = 0;
  int skipped = 0;
};

/// Average of finite-difference Hessians of -log posterior over every
/// thin-th pooled draw; stencils that leave the support are skipped.
CurvatureResult expected_posterior_curvature(const PosteriorSamples& samples,
                                             const Posterior& posterior, int thin = 50,
                                             double h = 1e-4);

/// Smallest eigenvalue of the order-k sample autocovariance matrix of a scalar input.
double excitation_min_eigenvalue(const VectorXd& u, int order);

}  // namespace canon_lti
