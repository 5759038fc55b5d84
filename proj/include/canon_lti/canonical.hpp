#pragma once

// Identifiable SISO parameterizations.
//
// Controller form: A = companion(a) (ones on the superdiagonal, last row
// -a_0 ... -a_{n-1}), B = e_n, C = (b_0 ... b_{n-1}), D = d0.
// Observer form:   A = companion(a), C = e_1^T, B = (b_0 ... b_{n-1})^T, D = d0.

#include <utility>

#include <Eigen/Dense>

#include "canon_lti/lti_core.hpp"

namespace canon_lti {

enum class CanonicalForm { Controller, Observer };

struct CanonicalSiso {
  CanonicalForm form = CanonicalForm::Controller;
  VectorXd a;  // characteristic coefficients a_0..a_{n-1}
  VectorXd b;
  double d0 = 0.0;

  CanonicalSiso() = default;
  CanonicalSiso(VectorXd a_, VectorXd b_, double d0_ = 0.0,
                CanonicalForm form_ = CanonicalForm::Controller);

  int state_dim() const { return static_cast<int>(a.size()); }
};

/// T is the transform with A_c = T A T^{-1}; equivalently
/// apply_similarity(sys, T_inv) yields the canonical realization.
struct SimilarityWitness {
  MatrixXd T;
  MatrixXd T_inv;
  double cond = 1.0;
};

/// Roots closer than this are treated as coincident.
inline constexpr double kRootCoincidenceTol = 1e-8;

MatrixXd companion_matrix(const VectorXd& a);

StateSpaceSystem canonical_to_statespace(const CanonicalSiso& c);

/// Requires a SISO system with (A, B) controllable; throws NotControllableError otherwise.
std::pair<CanonicalSiso, SimilarityWitness> to_controller_form(const StateSpaceSystem& sys,
                                                               double rank_tol = 1e-8);

/// Requires (A, C) observable. b comes out as the Markov parameters M_1..M_n.
std::pair<CanonicalSiso, SimilarityWitness> to_observer_form(const StateSpaceSystem& sys,
                                                             double rank_tol = 1e-8);

/// Characteristic coefficients (a_0..a_{n-1}) of prod (lambda - lambda_i).
VectorXd vieta_forward(const EigenSpectrum& roots);

/// Roots of lambda^n + a_{n-1} lambda^{n-1} + ... + a_0 via the companion eigenvalues.
EigenSpectrum vieta_inverse(const VectorXd& a);

/// sum_{i<j} log|lambda_i - lambda_j|, i.e. log |det D(vieta_forward)| over complex roots.
/// Throws DegenerateSpectrumError if two roots are closer than delta.
double vandermonde_log_abs_det(const EigenSpectrum& roots, double delta = kRootCoincidenceTol);

/// Both systems must be minimal SISO with equal state dimension. True when the
/// Markov parameters M_0..M_{2n} agree and the noise models are related by the
/// similarity recovered from the two controller forms.
bool check_statistical_isomorphism(const StateSpaceSystem& sys1, const NoiseSpec& noise1,
                                   const StateSpaceSystem& sys2, const NoiseSpec& noise2,
                                   double tol = 1e-8);

}  // namespace canon_lti
