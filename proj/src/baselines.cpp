#include "canon_lti/baselines.hpp"

#include <stdexcept>
#include <string>

#include "canon_lti/errors.hpp"

namespace canon_lti {

void HoKalmanConfig::validate() const {
  if (state_dim < 1) throw std::invalid_argument("HoKalmanConfig: state_dim must be >= 1");
  if (rows() < state_dim || cols() < state_dim)
    throw std::invalid_argument("HoKalmanConfig: p and q must be >= state_dim");
  if (rows() < 2) throw std::invalid_argument("HoKalmanConfig: p must be >= 2 for the shift");
  if (markov_window() + 1 < rows() + cols())
    throw std::invalid_argument("HoKalmanConfig: window too short for the Hankel matrix");
}

std::vector<MatrixXd> estimate_markov(const Trajectory& traj, int k, double min_ratio) {
  if (k < 0) throw std::invalid_argument("estimate_markov: k must be >= 0");
  const int T = traj.length();
  const int m = static_cast<int>(traj.u().cols());
  if (static_cast<double>(T) < min_ratio * k || T < m * (k + 1))
    throw std::invalid_argument("estimate_markov: trajectory too short for window " +
                                std::to_string(k));
  MatrixXd X = MatrixXd::Zero(T, m * (k + 1));
  for (int t = 0; t < T; ++t)
    for (int j = 0; j <= k && j <= t; ++j) X.block(t, j * m, 1, m) = traj.u().row(t - j);

  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < X.cols())
    throw NumericalError("estimate_markov: regressor matrix is rank deficient");
  const MatrixXd theta = qr.solve(traj.y());  // m(k+1) x p
  std::vector<MatrixXd> out;
  for (int j = 0; j <= k; ++j) out.push_back(theta.middleRows(j * m, m).transpose());
  return out;
}

std::vector<MatrixXd> markov_from_impulse(const Trajectory& traj, int k) {
  if (k < 0 || k >= traj.length())
    throw std::invalid_argument("markov_from_impulse: need T > k");
  // With u_1 = e_1 and no earlier input, y_{t+1} = M_t e_1 in the noiseless case.
  std::vector<MatrixXd> out;
  for (int t = 0; t <= k; ++t) out.push_back(traj.y().row(t).transpose());
  return out;
}

HoKalmanResult ho_kalman(const std::vector<MatrixXd>& markov, const HoKalmanConfig& cfg) {
  cfg.validate();
  const int P = cfg.rows(), Q = cfg.cols(), n = cfg.state_dim;
  if (static_cast<int>(markov.size()) < P + Q)
    throw std::invalid_argument("ho_kalman: need Markov parameters M_0..M_{p+q-1}");
  const auto py = markov.front().rows(), mu = markov.front().cols();
  for (const auto& M : markov)
    if (M.rows() != py || M.cols() != mu) throw DimensionError("ho_kalman: Markov sizes differ");

  MatrixXd H(P * py, Q * mu);
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < Q; ++j) H.block(i * py, j * mu, py, mu) = markov[static_cast<size_t>(i + j + 1)];

  Eigen::JacobiSVD<MatrixXd> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  if (s.size() < n || !(s(n - 1) > 0.0))
    throw NumericalError("ho_kalman: Hankel matrix has rank below the requested order");
  const VectorXd sqrt_s = s.head(n).cwiseSqrt();
  const MatrixXd O = svd.matrixU().leftCols(n) * sqrt_s.asDiagonal();
  const MatrixXd Ctrb = sqrt_s.asDiagonal() * svd.matrixV().leftCols(n).transpose();

  const MatrixXd O_up = O.topRows((P - 1) * py);
  const MatrixXd O_down = O.bottomRows((P - 1) * py);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(O_up);
  cod.setThreshold(1e-10);  // relative to the largest pivot, i.e. sigma_max
  const MatrixXd A = cod.solve(O_down);

  HoKalmanResult r{StateSpaceSystem(A, Ctrb.leftCols(mu), O.topRows(py), markov.front()), s,
                   false};
  r.order_ambiguous = s.size() > n && s(n) > cfg.gap_warning * s(n - 1);
  return r;
}

HoKalmanResult ho_kalman_from_data(const Trajectory& traj, const HoKalmanConfig& cfg) {
  cfg.validate();
  const int k = cfg.markov_window();
  const auto markov = cfg.markov_estimation == MarkovEstimation::ImpulseDirect
                          ? markov_from_impulse(traj, k)
                          : estimate_markov(traj, k);
  return ho_kalman(markov, cfg);
}

CanonicalSiso hke_in_canonical(const Trajectory& traj, const HoKalmanConfig& cfg) {
  const HoKalmanResult r = ho_kalman_from_data(traj, cfg);
  if (!r.system.is_siso()) throw DimensionError("hke_in_canonical: SISO data required");
  return to_controller_form(r.system).first;
}

}  // namespace canon_lti
