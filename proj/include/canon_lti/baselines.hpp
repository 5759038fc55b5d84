#pragma once

// Ho-Kalman realization from estimated impulse responses, used as a
// non-Bayesian point estimate.

#include <vector>

#include <Eigen/Dense>

#include "canon_lti/canonical.hpp"
#include "canon_lti/lti_core.hpp"

namespace canon_lti {

enum class MarkovEstimation { ImpulseDirect, LeastSquares };

struct HoKalmanConfig {
  int p = 0;  // block rows of the Hankel matrix; 0 means 2 * state_dim
  int q = 0;  // block columns; 0 means 2 * state_dim
  int state_dim = 2;
  MarkovEstimation markov_estimation = MarkovEstimation::LeastSquares;
  int window = 0;  // FIR window k for LeastSquares; 0 means p + q
  /// A singular-value ratio sigma_{d+1} / sigma_d above this flags the order as ambiguous.
  double gap_warning = 1e-2;

  int rows() const { return p > 0 ? p : 2 * state_dim; }
  int cols() const { return q > 0 ? q : 2 * state_dim; }
  int markov_window() const { return window > 0 ? window : rows() + cols(); }
  void validate() const;
};

/// Least-squares FIR fit of y_t on (u_t, u_{t-1}, ..., u_{t-k}), inputs before
/// the first sample taken as zero. Returns M_0..M_k. Requires T >= min_ratio * k;
/// throws NumericalError if the regressor matrix is rank deficient.
std::vector<MatrixXd> estimate_markov(const Trajectory& traj, int k, double min_ratio = 3.0);

/// Reads M_0..M_k straight off a unit-impulse experiment on input channel 0
/// (u_1 = 1, all other inputs zero), so only meaningful for single-input data.
std::vector<MatrixXd> markov_from_impulse(const Trajectory& traj, int k);

struct HoKalmanResult {
  StateSpaceSystem system;
  VectorXd singular_values;
  bool order_ambiguous = false;
};

/// Needs M_0..M_{p+q-1}.
HoKalmanResult ho_kalman(const std::vector<MatrixXd>& markov, const HoKalmanConfig& cfg);

/// Markov estimation per cfg, then realization.
HoKalmanResult ho_kalman_from_data(const Trajectory& traj, const HoKalmanConfig& cfg);

/// Realization mapped to controller form; throws NotControllableError when the
/// recovered pair (A, B) is not controllable.
CanonicalSiso hke_in_canonical(const Trajectory& traj, const HoKalmanConfig& cfg);

}  // namespace canon_lti
