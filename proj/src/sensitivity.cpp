// Forward sensitivity recursions of the Kalman filter: the log-likelihood
// gradient and the expected Fisher information.

#include <cmath>
#include <numbers>

#include "canon_lti/errors.hpp"
#include "canon_lti/likelihood.hpp"

namespace canon_lti {

namespace {

constexpr int kMaxDim = 12;

struct DirectionMask {
  bool A, B, C, D, Sigma, Gamma;
};

DirectionMask mask_of(const ModelDerivative& d) {
  auto nz = [](const MatrixXd& M) { return M.size() > 0 && M.cwiseAbs().maxCoeff() > 0.0; };
  return {nz(d.dA), nz(d.dB), nz(d.dC), nz(d.dD), nz(d.dSigma), nz(d.dGamma)};
}

void check_directions(const StateSpaceSystem& sys, const std::vector<ModelDerivative>& dirs) {
  const int n = sys.state_dim(), m = sys.input_dim(), p = sys.output_dim();
  for (const auto& d : dirs) {
    if (d.dA.rows() != n || d.dA.cols() != n || d.dB.rows() != n || d.dB.cols() != m ||
        d.dC.rows() != p || d.dC.cols() != n || d.dD.rows() != p || d.dD.cols() != m ||
        d.dSigma.rows() != n || d.dSigma.cols() != n || d.dGamma.rows() != p ||
        d.dGamma.cols() != p)
      throw DimensionError("model derivative has inconsistent dimensions");
  }
}

// Matrix type with compile-time shape where known, otherwise bounded dynamic
// storage on the stack.
template <int R, int C, int Max>
using Mx = Eigen::Matrix<double, R, C,
                         ((R == 1 && C != 1) ? Eigen::RowMajor : Eigen::ColMajor),
                         (R == Eigen::Dynamic ? Max : R), (C == Eigen::Dynamic ? Max : C)>;

// Gradient engine. N, P, M are the state, output and input dimensions when
// fixed at compile time (small SISO models), Eigen::Dynamic otherwise; Max
// bounds the dynamic sizes (Eigen::Dynamic for heap storage).
template <int N, int P, int M, int Max = kMaxDim>
LoglikGradient gradient_impl(const StateSpaceSystem& sys, const NoiseSpec& noise,
                             const Trajectory& traj, const std::vector<ModelDerivative>& dirs) {
  using MatNN = Mx<N, N, Max>;
  using MatNP = Mx<N, P, Max>;
  using MatPN = Mx<P, N, Max>;
  using MatNM = Mx<N, M, Max>;
  using MatPM = Mx<P, M, Max>;
  using MatPP = Mx<P, P, Max>;
  using VecN = Mx<N, 1, Max>;
  using VecP = Mx<P, 1, Max>;
  using VecM = Mx<M, 1, Max>;

  const int n = sys.state_dim(), m = sys.input_dim(), p = sys.output_dim();
  const int q = static_cast<int>(dirs.size());
  const int T = traj.length();

  const MatNN A = sys.A();
  const MatNM B = sys.B();
  const MatPN C = sys.C();
  const MatPM D = sys.D();
  const MatNN At = A.transpose();
  const MatNP Ct = C.transpose();
  const MatNN Sigma = noise.state_cov();
  const MatPP R = noise.obs_cov() + kInnovationNugget * MatrixXd::Identity(p, p);
  const MatNN I_n = MatNN::Identity(n, n);
  const MatPP I_p = MatPP::Identity(p, p);

  std::vector<DirectionMask> masks;
  std::vector<MatNN> dA, dSigma;
  std::vector<MatNM> dB;
  std::vector<MatPN> dC;
  std::vector<MatPM> dD;
  std::vector<MatPP> dGamma;
  for (const auto& d : dirs) {
    masks.push_back(mask_of(d));
    dA.emplace_back(d.dA);
    dB.emplace_back(d.dB);
    dC.emplace_back(d.dC);
    dD.emplace_back(d.dD);
    dSigma.emplace_back(d.dSigma);
    dGamma.emplace_back(d.dGamma);
  }

  VecN x = VecN::Zero(n);
  MatNN Pcov = noise.initial_cov();
  std::vector<VecN> dx(static_cast<size_t>(q), VecN::Zero(n));
  std::vector<MatNN> dP(static_cast<size_t>(q), MatNN::Zero(n, n));
  std::vector<VecN> dxp(static_cast<size_t>(q));
  std::vector<MatNN> dPp(static_cast<size_t>(q));
  VecM u_prev = VecM::Zero(m);

  LoglikGradient out;
  out.grad = VectorXd::Zero(q);
  const double log2pi = std::log(2.0 * std::numbers::pi);

  for (int t = 0; t < T; ++t) {
    const VecM u_now = traj.u().row(t).transpose();
    const VecP y = traj.y().row(t).transpose();

    const VecN xp = A * x + B * u_prev;
    const MatNN AP = A * Pcov;
    MatNN Pp = AP * At + Sigma;
    Pp = 0.5 * (Pp + Pp.transpose()).eval();
    for (int i = 0; i < q; ++i) {
      const auto k = static_cast<size_t>(i);
      const auto& mk = masks[k];
      dxp[k] = A * dx[k];
      dPp[k] = A * dP[k] * At;
      if (mk.A) {
        dxp[k] += dA[k] * x;
        const MatNN Mi = dA[k] * AP.transpose();
        dPp[k] += Mi + Mi.transpose();
      }
      if (mk.B) dxp[k] += dB[k] * u_prev;
      if (mk.Sigma) dPp[k] += dSigma[k];
    }

    const VecP nu = y - C * xp - D * u_now;
    const MatNP PC = Pp * Ct;
    MatPP S = C * PC + R;
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::LLT<MatPP> llt(S);
    if (llt.info() != Eigen::Success || !S.allFinite())
      throw NumericalError("kalman: innovation covariance is not positive definite");
    const MatPP Sinv = llt.solve(I_p);
    const MatNP K = PC * Sinv;
    const VecP alpha = Sinv * nu;
    double logdet = 0.0;
    for (int k = 0; k < p; ++k) logdet += 2.0 * std::log(llt.matrixLLT()(k, k));
    out.loglik += -0.5 * (p * log2pi + logdet + nu.dot(alpha));

    for (int i = 0; i < q; ++i) {
      const auto k = static_cast<size_t>(i);
      const auto& mk = masks[k];
      VecP dnu = -(C * dxp[k]);
      MatNP dPC = dPp[k] * Ct;
      MatPP dS = C * dPC;
      if (mk.C) {
        dnu -= dC[k] * xp;
        const MatPP Ni = dC[k] * PC;
        dS += Ni + Ni.transpose();
        dPC += Pp * dC[k].transpose();
      }
      if (mk.D) dnu -= dD[k] * u_now;
      if (mk.Gamma) dS += dGamma[k];

      out.grad(i) += -0.5 * ((Sinv * dS).trace() - alpha.dot(dS * alpha) + 2.0 * dnu.dot(alpha));

      const MatNP dK = (dPC - K * dS) * Sinv;
      dx[k] = dxp[k] + dK * nu + K * dnu;
      const MatNN G = dK * PC.transpose();
      const MatNN dPi = dPp[k] - G - G.transpose() - K * dS * K.transpose();
      dP[k] = 0.5 * (dPi + dPi.transpose());
    }

    x = xp + K * nu;
    const MatNN IKC = I_n - K * C;
    const MatNN Pn = IKC * Pp * IKC.transpose() + K * R * K.transpose();
    Pcov = 0.5 * (Pn + Pn.transpose());
    u_prev = u_now;
  }
  return out;
}

}  // namespace

LoglikGradient kalman_loglik_gradient(const StateSpaceSystem& sys, const NoiseSpec& noise,
                                      const Trajectory& traj,
                                      const std::vector<ModelDerivative>& directions) {
  if (traj.u().cols() != sys.input_dim() || traj.y().cols() != sys.output_dim())
    throw DimensionError("kalman: trajectory columns do not match the system dimensions");
  if (!traj.u().allFinite() || !traj.y().allFinite())
    throw std::invalid_argument("kalman: non-finite data");
  check_directions(sys, directions);
  constexpr int X = Eigen::Dynamic;
  if (sys.is_siso()) {
    switch (sys.state_dim()) {
      case 1: return gradient_impl<1, 1, 1>(sys, noise, traj, directions);
      case 2: return gradient_impl<2, 1, 1>(sys, noise, traj, directions);
      case 3: return gradient_impl<3, 1, 1>(sys, noise, traj, directions);
      case 4: return gradient_impl<4, 1, 1>(sys, noise, traj, directions);
      default: break;
    }
  }
  const int big = std::max({sys.state_dim(), sys.input_dim(), sys.output_dim()});
  if (big <= kMaxDim) return gradient_impl<X, X, X>(sys, noise, traj, directions);
  return gradient_impl<X, X, X, X>(sys, noise, traj, directions);
}

MatrixXd kalman_expected_fim(const StateSpaceSystem& sys, const NoiseSpec& noise,
                             const MatrixXd& u, const std::vector<ModelDerivative>& dirs) {
  if (u.cols() != sys.input_dim()) throw DimensionError("kalman_expected_fim: bad input width");
  if (u.rows() < 1) throw DimensionError("kalman_expected_fim: T must be >= 1");
  check_directions(sys, dirs);
  const int n = sys.state_dim(), p = sys.output_dim();
  const int q = static_cast<int>(dirs.size());
  const int T = static_cast<int>(u.rows());
  const int N = n * (2 + q);  // [x; xp; dxp_1 .. dxp_q]
  const MatrixXd& A = sys.A();
  const MatrixXd& B = sys.B();
  const MatrixXd& C = sys.C();
  const MatrixXd R = noise.obs_cov() + kInnovationNugget * MatrixXd::Identity(p, p);

  MatrixXd P = noise.initial_cov();
  std::vector<MatrixXd> dP(static_cast<size_t>(q), MatrixXd::Zero(n, n));
  VectorXd mu = VectorXd::Zero(N);
  MatrixXd Pi = MatrixXd::Zero(N, N);
  Pi.topLeftCorner(n, n) = A * P * A.transpose() + noise.state_cov();

  MatrixXd fim = MatrixXd::Zero(q, q);
  for (int t = 0; t < T; ++t) {
    const VectorXd u_now = u.row(t).transpose();
    MatrixXd Pp = A * P * A.transpose() + noise.state_cov();
    Pp = 0.5 * (Pp + Pp.transpose()).eval();
    std::vector<MatrixXd> dPp(static_cast<size_t>(q));
    for (int i = 0; i < q; ++i) {
      const auto& d = dirs[static_cast<size_t>(i)];
      const MatrixXd M = d.dA * P * A.transpose();
      dPp[static_cast<size_t>(i)] =
          M + M.transpose() + A * dP[static_cast<size_t>(i)] * A.transpose() + d.dSigma;
    }
    const MatrixXd PC = Pp * C.transpose();
    MatrixXd S = C * PC + R;
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
      throw NumericalError("kalman_expected_fim: innovation covariance is not positive definite");
    const MatrixXd Sinv = llt.solve(MatrixXd::Identity(p, p));
    const MatrixXd K = PC * Sinv;

    std::vector<MatrixXd> dS(static_cast<size_t>(q)), dK(static_cast<size_t>(q));
    for (int i = 0; i < q; ++i) {
      const auto& d = dirs[static_cast<size_t>(i)];
      const MatrixXd Nc = d.dC * PC;
      dS[static_cast<size_t>(i)] = Nc + Nc.transpose() + C * dPp[static_cast<size_t>(i)] * C.transpose() + d.dGamma;
      const MatrixXd dPC = dPp[static_cast<size_t>(i)] * C.transpose() + Pp * d.dC.transpose();
      dK[static_cast<size_t>(i)] = (dPC - K * dS[static_cast<size_t>(i)]) * Sinv;
    }

    // dnu_i = G_i xi + g_i with G_i = [0, -dC_i, -C in block i], g_i = -dD_i u_t.
    MatrixXd G = MatrixXd::Zero(q * p, N);
    VectorXd g(q * p);
    for (int i = 0; i < q; ++i) {
      const auto& d = dirs[static_cast<size_t>(i)];
      G.block(i * p, n, p, n) = -d.dC;
      G.block(i * p, (2 + i) * n, p, n) = -C;
      g.segment(i * p, p) = -d.dD * u_now;
    }
    const VectorXd e = G * mu + g;
    const MatrixXd W = G * Pi * G.transpose();
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) {
        const double mean_part =
            e.segment(i * p, p).dot(Sinv * e.segment(j * p, p));
        const double cov_part = (Sinv * W.block(i * p, j * p, p, p)).trace();
        const double s_part =
            0.5 * (Sinv * dS[static_cast<size_t>(i)] * Sinv * dS[static_cast<size_t>(j)]).trace();
        fim(i, j) += mean_part + cov_part + s_part;
      }

    // Augmented transition xi' = F xi + c + L [w; z].
    MatrixXd F = MatrixXd::Zero(N, N);
    VectorXd c = VectorXd::Zero(N);
    MatrixXd L = MatrixXd::Zero(N, n + p);
    const MatrixXd AK = A * K;
    const MatrixXd AKC = AK * C;
    F.block(0, 0, n, n) = A;
    L.block(0, 0, n, n).setIdentity();
    c.segment(0, n) = B * u_now;
    F.block(n, 0, n, n) = AKC;
    F.block(n, n, n, n) = A - AKC;
    L.block(n, n, n, p) = AK;
    c.segment(n, n) = B * u_now;
    for (int i = 0; i < q; ++i) {
      const auto& d = dirs[static_cast<size_t>(i)];
      const MatrixXd Z = d.dA * K + A * dK[static_cast<size_t>(i)];  // multiplies nu
      const int r0 = (2 + i) * n;
      F.block(r0, 0, n, n) = Z * C;
      F.block(r0, n, n, n) = d.dA - Z * C - AK * d.dC;
      F.block(r0, r0, n, n) = A - AKC;
      L.block(r0, n, n, p) = Z;
      c.segment(r0, n) = d.dB * u_now + AK * g.segment(i * p, p);
    }
    MatrixXd Q = MatrixXd::Zero(n + p, n + p);
    Q.topLeftCorner(n, n) = noise.state_cov();
    Q.bottomRightCorner(p, p) = noise.obs_cov();
    mu = F * mu + c;
    Pi = F * Pi * F.transpose() + L * Q * L.transpose();
    Pi = 0.5 * (Pi + Pi.transpose()).eval();

    // Filter covariance and its sensitivities.
    for (int i = 0; i < q; ++i) {
      const MatrixXd Gk = dK[static_cast<size_t>(i)] * PC.transpose();
      const MatrixXd dPi = dPp[static_cast<size_t>(i)] - Gk - Gk.transpose() -
                           K * dS[static_cast<size_t>(i)] * K.transpose();
      dP[static_cast<size_t>(i)] = 0.5 * (dPi + dPi.transpose());
    }
    const MatrixXd IKC = MatrixXd::Identity(n, n) - K * C;
    const MatrixXd Pn = IKC * Pp * IKC.transpose() + K * R * K.transpose();
    P = 0.5 * (Pn + Pn.transpose());
  }
  return 0.5 * (fim + fim.transpose());
}

}  // namespace canon_lti
