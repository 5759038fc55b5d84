#include "canon_lti/canonical.hpp"

#include <cmath>
#include <limits>

#include "canon_lti/errors.hpp"

namespace canon_lti {

namespace {

void require_siso(const StateSpaceSystem& sys, const char* who) {
  if (!sys.is_siso()) throw DimensionError(std::string(who) + ": system must be SISO");
}

bool close(const MatrixXd& x, const MatrixXd& y, double tol) {
  const double scale = std::max({1.0, x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff()});
  return (x - y).cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace

CanonicalSiso::CanonicalSiso(VectorXd a_, VectorXd b_, double d0_, CanonicalForm form_)
    : form(form_), a(std::move(a_)), b(std::move(b_)), d0(d0_) {
  if (a.size() < 1) throw DimensionError("CanonicalSiso: need at least one state");
  if (b.size() != a.size())
    throw DimensionError("CanonicalSiso: a and b must have the same length");
  if (!a.allFinite() || !b.allFinite() || !std::isfinite(d0))
    throw std::invalid_argument("CanonicalSiso: non-finite coefficient");
}

MatrixXd companion_matrix(const VectorXd& a) {
  const auto n = a.size();
  if (n < 1) throw DimensionError("companion_matrix: empty coefficient vector");
  MatrixXd A = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
  A.row(n - 1) = -a.transpose();
  return A;
}

StateSpaceSystem canonical_to_statespace(const CanonicalSiso& c) {
  const int n = c.state_dim();
  MatrixXd A = companion_matrix(c.a);
  MatrixXd B(n, 1), C(1, n), D(1, 1);
  D(0, 0) = c.d0;
  if (c.form == CanonicalForm::Controller) {
    B.setZero();
    B(n - 1, 0) = 1.0;
    C = c.b.transpose();
  } else {
    B = c.b;
    C.setZero();
    C(0, 0) = 1.0;
  }
  return StateSpaceSystem(std::move(A), std::move(B), std::move(C), std::move(D));
}

std::pair<CanonicalSiso, SimilarityWitness> to_controller_form(const StateSpaceSystem& sys,
                                                               double rank_tol) {
  require_siso(sys, "to_controller_form");
  const int n = sys.state_dim();
  const int rank = numerical_rank(controllability_matrix(sys), rank_tol);
  if (rank < n)
    throw NotControllableError("to_controller_form: (A, B) is not controllable (rank " +
                                   std::to_string(rank) + " < " + std::to_string(n) + ")",
                               rank);

  const VectorXd a = char_poly(sys.A());
  // f_i = P_i(A) b with P_i(l) = sum_{k=0}^{n-i} a_{k+i} l^k and a_n = 1,
  // evaluated by Horner from f_n = b: f_{i} = A f_{i+1} + a_i b.
  const VectorXd bvec = sys.B().col(0);
  MatrixXd F(n, n);
  F.col(n - 1) = bvec;
  for (int i = n - 2; i >= 0; --i) F.col(i) = sys.A() * F.col(i + 1) + a(i + 1) * bvec;

  SimilarityWitness w;
  w.T_inv = F;
  w.cond = condition_number(F);
  if (!std::isfinite(w.cond) || w.cond > 1e14)
    throw NumericalError("to_controller_form: transformation is numerically singular");
  w.T = F.partialPivLu().inverse();

  CanonicalSiso c(a, (sys.C() * F).transpose(), sys.D()(0, 0), CanonicalForm::Controller);
  return {std::move(c), std::move(w)};
}

std::pair<CanonicalSiso, SimilarityWitness> to_observer_form(const StateSpaceSystem& sys,
                                                             double rank_tol) {
  require_siso(sys, "to_observer_form");
  const int n = sys.state_dim();
  const MatrixXd O = observability_matrix(sys);
  const int rank = numerical_rank(O, rank_tol);
  if (rank < n)
    throw NumericalError("to_observer_form: (A, C) is not observable (rank " +
                         std::to_string(rank) + ")");
  // The canonical pair (companion(a), e_1^T) has identity observability matrix,
  // so T^{-1} = O^{-1} and b = O B.
  SimilarityWitness w;
  w.T = O;
  w.cond = condition_number(O);
  w.T_inv = O.partialPivLu().inverse();
  CanonicalSiso c(char_poly(sys.A()), O * sys.B().col(0), sys.D()(0, 0),
                  CanonicalForm::Observer);
  return {std::move(c), std::move(w)};
}

VectorXd vieta_forward(const EigenSpectrum& roots) {
  if (roots.size() < 1) throw DimensionError("vieta_forward: empty spectrum");
  if (!roots.conjugate_closed())
    throw std::invalid_argument("vieta_forward: roots are not closed under conjugation");
  const auto c = poly_from_roots(roots.values());
  const int n = roots.size();
  VectorXd a(n);
  double scale = 1.0;
  for (const auto& r : roots.values()) scale *= std::max(1.0, std::abs(r));
  for (int k = 0; k < n; ++k) {
    const auto& ck = c[static_cast<size_t>(k)];
    if (std::abs(ck.imag()) > 1e-10 * scale)
      throw NumericalError("vieta_forward: coefficient has a non-negligible imaginary part");
    a(k) = ck.real();
  }
  return a;
}

EigenSpectrum vieta_inverse(const VectorXd& a) { return eigenvalues(companion_matrix(a)); }

double vandermonde_log_abs_det(const EigenSpectrum& roots, double delta) {
  double s = 0.0;
  const int n = roots.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double gap = std::abs(roots[i] - roots[j]);
      if (gap < delta)
        throw DegenerateSpectrumError("vandermonde_log_abs_det: near-coincident roots", gap);
      s += std::log(gap);
    }
  return s;
}

bool check_statistical_isomorphism(const StateSpaceSystem& sys1, const NoiseSpec& noise1,
                                   const StateSpaceSystem& sys2, const NoiseSpec& noise2,
                                   double tol) {
  require_siso(sys1, "check_statistical_isomorphism");
  require_siso(sys2, "check_statistical_isomorphism");
  const int n = sys1.state_dim();
  if (sys2.state_dim() != n)
    throw DimensionError("check_statistical_isomorphism: state dimensions differ");
  if (!is_minimal(sys1) || !is_minimal(sys2))
    throw std::invalid_argument("check_statistical_isomorphism: both systems must be minimal");

  for (int t = 0; t <= 2 * n; ++t)
    if (!close(markov_parameter(sys1, t), markov_parameter(sys2, t), tol)) return false;

  // Both controller forms coincide, so sys2 = apply_similarity(sys1, F1 F2^{-1}).
  const auto w1 = to_controller_form(sys1).second;
  const auto w2 = to_controller_form(sys2).second;
  const MatrixXd Tinv = w2.T_inv * w1.T;
  const MatrixXd sigma = Tinv * noise1.state_cov() * Tinv.transpose();
  const MatrixXd p0 = Tinv * noise1.initial_cov() * Tinv.transpose();
  return close(sigma, noise2.state_cov(), tol) && close(p0, noise2.initial_cov(), tol) &&
         close(noise1.obs_cov(), noise2.obs_cov(), tol);
}

}  // namespace canon_lti
