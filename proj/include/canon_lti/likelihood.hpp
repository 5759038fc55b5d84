#pragma once

// Exact Gaussian marginal likelihood through the Kalman recursions.
//
// For t = 1..T (row t-1 of the trajectory):
//   predict  x_{t|t-1} = A x_{t-1|t-1} + B u_{t-1},  P_{t|t-1} = A P_{t-1|t-1} A^T + Sigma
//   innovate nu_t = y_t - C x_{t|t-1} - D u_t,        S_t = C P_{t|t-1} C^T + Gamma + nugget I
//   update   Joseph form
// starting from (x_{0|0}, P_{0|0}) = (0, P0) and u_0 = 0.

#include <vector>

#include <Eigen/Dense>

#include "canon_lti/lti_core.hpp"
#include "canon_lti/params.hpp"
#include "canon_lti/random.hpp"

namespace canon_lti {

inline constexpr double kInnovationNugget = 1e-12;

struct FilterState {
  VectorXd mean;       // x_{t|t}
  MatrixXd cov;        // P_{t|t}
  VectorXd pred_mean;  // x_{t|t-1}
  MatrixXd pred_cov;   // P_{t|t-1}
  VectorXd innovation;
  MatrixXd innovation_cov;
  double loglik_increment = 0.0;
};

struct KalmanResult {
  double loglik = 0.0;
  std::vector<FilterState> steps;  // t = 1..T
};

KalmanResult kalman_filter(const StateSpaceSystem& sys, const NoiseSpec& noise,
                           const Trajectory& traj);

/// Same recursion as kalman_filter without storing the per-step record.
double kalman_loglik(const StateSpaceSystem& sys, const NoiseSpec& noise, const Trajectory& traj);

struct SmoothedState {
  VectorXd mean;
  MatrixXd cov;
};

/// Rauch-Tung-Striebel smoother; entry t holds x_t | y_{1..T} for t = 0..T.
std::vector<SmoothedState> kalman_smoother(const StateSpaceSystem& sys, const NoiseSpec& noise,
                                           const Trajectory& traj);

/// One joint draw of x_0..x_T from p(x | y) by forward filtering, backward
/// sampling. Returns a (T+1) x d_x matrix.
MatrixXd sample_smoothed_states(const StateSpaceSystem& sys, const NoiseSpec& noise,
                                const Trajectory& traj, Rng& rng);

struct LoglikGradient {
  double loglik = 0.0;
  VectorXd grad;
};

/// Log-likelihood and its derivative along each model direction, from the
/// forward sensitivity recursions of the filter.
LoglikGradient kalman_loglik_gradient(const StateSpaceSystem& sys, const NoiseSpec& noise,
                                      const Trajectory& traj,
                                      const std::vector<ModelDerivative>& directions);

/// Expected Fisher information along the given directions under the model
/// itself, for the inputs u (T x d_u). Exact for the linear-Gaussian model: the
/// filter covariances are data independent, and the means of the predicted
/// state and its sensitivities follow an augmented linear system whose first
/// two moments are propagated in closed form.
MatrixXd kalman_expected_fim(const StateSpaceSystem& sys, const NoiseSpec& noise,
                             const MatrixXd& u, const std::vector<ModelDerivative>& directions);

}  // namespace canon_lti
