#include "canon_lti/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "canon_lti/errors.hpp"

namespace canon_lti {

namespace {

void check_inputs(const StateSpaceSystem& sys, const NoiseSpec& noise, const Trajectory& traj) {
  if (traj.u().cols() != sys.input_dim() || traj.y().cols() != sys.output_dim())
    throw DimensionError("kalman: trajectory columns do not match the system dimensions");
  if (noise.state_cov().rows() != sys.state_dim() || noise.obs_cov().rows() != sys.output_dim())
    throw DimensionError("kalman: noise dimensions do not match the system");
  if (!traj.u().allFinite() || !traj.y().allFinite())
    throw std::invalid_argument("kalman: non-finite data");
}

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

// One predict/update step. Returns the log-likelihood increment.
double filter_step(const StateSpaceSystem& sys, const NoiseSpec& noise, const VectorXd& u_prev,
                   const VectorXd& u_now, const VectorXd& y, VectorXd& x, MatrixXd& P,
                   FilterState* record) {
  const auto p = sys.output_dim();
  const auto n = sys.state_dim();
  VectorXd xp = sys.A() * x + sys.B() * u_prev;
  MatrixXd Pp = symmetrize(sys.A() * P * sys.A().transpose() + noise.state_cov());
  const VectorXd nu = y - sys.C() * xp - sys.D() * u_now;
  const MatrixXd R = noise.obs_cov() + kInnovationNugget * MatrixXd::Identity(p, p);
  const MatrixXd S = symmetrize(sys.C() * Pp * sys.C().transpose() + R);
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success || !S.allFinite())
    throw NumericalError("kalman: innovation covariance is not positive definite");
  const MatrixXd K = llt.solve(sys.C() * Pp).transpose();
  const MatrixXd IKC = MatrixXd::Identity(n, n) - K * sys.C();
  x = xp + K * nu;
  P = symmetrize(IKC * Pp * IKC.transpose() + K * R * K.transpose());

  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = nu.dot(llt.solve(nu));
  const double inc =
      -0.5 * (static_cast<double>(p) * std::log(2.0 * std::numbers::pi) + logdet + quad);
  if (record) {
    record->mean = x;
    record->cov = P;
    record->pred_mean = std::move(xp);
    record->pred_cov = std::move(Pp);
    record->innovation = nu;
    record->innovation_cov = S;
    record->loglik_increment = inc;
  }
  return inc;
}

template <class Visit>
double run_filter(const StateSpaceSystem& sys, const NoiseSpec& noise, const Trajectory& traj,
                  Visit&& visit) {
  check_inputs(sys, noise, traj);
  const int T = traj.length();
  VectorXd x = VectorXd::Zero(sys.state_dim());
  MatrixXd P = noise.initial_cov();
  VectorXd u_prev = VectorXd::Zero(sys.input_dim());
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    const VectorXd u_now = traj.u().row(t).transpose();
    total += filter_step(sys, noise, u_prev, u_now, traj.y().row(t).transpose(), x, P, visit(t));
    u_prev = u_now;
  }
  return total;
}

MatrixXd psd_factor(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(S));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// Smoother gain J = P_{t|t} A^T P_{t+1|t}^+ (pseudo-inverse tolerates a
// singular prediction covariance in the noiseless case).
MatrixXd smoother_gain(const MatrixXd& P, const MatrixXd& A, const MatrixXd& Pp) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Pp);
  return cod.solve(A * P).transpose();
}

}  // namespace

KalmanResult kalman_filter(const StateSpaceSystem& sys, const NoiseSpec& noise,
                           const Trajectory& traj) {
  KalmanResult out;
  out.steps.resize(static_cast<size_t>(traj.length()));
  out.loglik = run_filter(sys, noise, traj,
                          [&](int t) { return &out.steps[static_cast<size_t>(t)]; });
  return out;
}

double kalman_loglik(const StateSpaceSystem& sys, const NoiseSpec& noise, const Trajectory& traj) {
  return run_filter(sys, noise, traj, [](int) -> FilterState* { return nullptr; });
}

std::vector<SmoothedState> kalman_smoother(const StateSpaceSystem& sys, const NoiseSpec& noise,
                                           const Trajectory& traj) {
  const KalmanResult f = kalman_filter(sys, noise, traj);
  const int T = traj.length();
  std::vector<SmoothedState> out(static_cast<size_t>(T + 1));
  out[static_cast<size_t>(T)] = {f.steps.back().mean, f.steps.back().cov};
  for (int t = T - 1; t >= 0; --t) {
    const VectorXd m = t == 0 ? VectorXd::Zero(sys.state_dim()) : f.steps[t - 1].mean;
    const MatrixXd P = t == 0 ? noise.initial_cov() : f.steps[t - 1].cov;
    const FilterState& next = f.steps[static_cast<size_t>(t)];
    const MatrixXd J = smoother_gain(P, sys.A(), next.pred_cov);
    const SmoothedState& s1 = out[static_cast<size_t>(t + 1)];
    out[static_cast<size_t>(t)] = {m + J * (s1.mean - next.pred_mean),
                                   symmetrize(P + J * (s1.cov - next.pred_cov) * J.transpose())};
  }
  return out;
}

MatrixXd sample_smoothed_states(const StateSpaceSystem& sys, const NoiseSpec& noise,
                                const Trajectory& traj, Rng& rng) {
  const KalmanResult f = kalman_filter(sys, noise, traj);
  const int T = traj.length();
  const int n = sys.state_dim();
  MatrixXd X(T + 1, n);
  VectorXd x = f.steps.back().mean + psd_factor(f.steps.back().cov) * standard_normal_vector(rng, n);
  X.row(T) = x.transpose();
  for (int t = T - 1; t >= 0; --t) {
    const VectorXd m = t == 0 ? VectorXd::Zero(n) : f.steps[t - 1].mean;
    const MatrixXd P = t == 0 ? noise.initial_cov() : f.steps[t - 1].cov;
    const FilterState& next = f.steps[static_cast<size_t>(t)];
    const MatrixXd J = smoother_gain(P, sys.A(), next.pred_cov);
    const MatrixXd cov = P - J * next.pred_cov * J.transpose();
    x = m + J * (x - next.pred_mean) + psd_factor(cov) * standard_normal_vector(rng, n);
    X.row(t) = x.transpose();
  }
  return X;
}

}  // namespace canon_lti
