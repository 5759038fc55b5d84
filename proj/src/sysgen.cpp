#include "canon_lti/sysgen.hpp"

#include <algorithm>
#include <stdexcept>

#include "canon_lti/canonical.hpp"
#include "canon_lti/errors.hpp"

namespace canon_lti {

namespace {

double dominance(const MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() / W.trace();
}

StateSpaceSystem draw_candidate(int n, const EigenPriorSpec& prior, Rng& rng) {
  const EigenSpectrum roots = sample_eigen_prior(prior, rng);
  const MatrixXd Q = haar_orthogonal(rng, n);
  const MatrixXd A = Q.transpose() * companion_matrix(vieta_forward(roots)) * Q;
  const MatrixXd B = standard_normal_matrix(rng, n, 1);
  const MatrixXd C = standard_normal_matrix(rng, 1, n);
  return StateSpaceSystem(A, B, C, MatrixXd::Zero(1, 1));
}

}  // namespace

double gramian_dominance(const StateSpaceSystem& sys) {
  const Gramians g = gramians(sys);
  return std::max(dominance(g.controllability), dominance(g.observability));
}

GeneratedSystem random_stable_system(int n, const EigenPriorSpec& prior, std::uint64_t seed,
                                     int max_rejects, double max_dominance) {
  if (n < 1) throw std::invalid_argument("random_stable_system: n must be >= 1");
  if (prior.n != n) throw std::invalid_argument("random_stable_system: prior dimension mismatch");
  prior.validate();
  Rng rng = make_rng(seed, 0x5E5);
  for (int rejections = 0; rejections <= max_rejects; ++rejections) {
    StateSpaceSystem sys = draw_candidate(n, prior, rng);
    if (!is_stable(sys.A()) || !is_minimal(sys)) continue;
    if (n > 1 && gramian_dominance(sys) > max_dominance) continue;
    return {std::move(sys), rejections};
  }
  throw NumericalError("random_stable_system: rejection budget exceeded");
}

StateSpaceSystem balanced_system(int n) {
  if (n < 2) throw std::invalid_argument("balanced_system: n must be >= 2");
  const VectorXd lambda = VectorXd::LinSpaced(n, -0.98, 0.9);
  const MatrixXd A0 = lambda.asDiagonal();
  const MatrixXd B0 = MatrixXd::Ones(n, 1);
  const MatrixXd Wc = solve_discrete_lyapunov(A0, B0 * B0.transpose());
  const MatrixXd T = symmetric_sqrt(Wc);
  const auto T_lu = T.partialPivLu();
  const MatrixXd A = T_lu.solve(A0 * T);
  const MatrixXd B = T_lu.solve(B0);

  // Eigenvectors of A are T^{-1} e_i. Taking them with unit norm and the sign
  // that T^{-1} (SPD) gives them fixes the otherwise arbitrary scaling of V.
  MatrixXd V = T_lu.solve(MatrixXd::Identity(n, n));
  V.colwise().normalize();
  MatrixXd C = MatrixXd::Ones(1, n) * V.inverse();
  C /= C.norm();
  return StateSpaceSystem(A, B, C, MatrixXd::Zero(1, 1));
}

EasyHardPair easy_hard_pair(std::uint64_t seed, int max_rejects) {
  const EigenPriorSpec prior = EigenPriorSpec::uniform_stable_coeffs(2);
  Rng rng = make_rng(seed, 0xEA5);
  for (int rejections = 0; rejections <= max_rejects; ++rejections) {
    StateSpaceSystem sys = draw_candidate(2, prior, rng);
    if (!is_stable(sys.A()) || !is_minimal(sys)) continue;
    if (gramian_dominance(sys) > 0.95) return {balanced_system(2), std::move(sys), rejections};
  }
  throw NumericalError("easy_hard_pair: rejection budget exceeded");
}

}  // namespace canon_lti
