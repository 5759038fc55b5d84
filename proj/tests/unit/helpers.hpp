#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "canon_lti/canonical.hpp"
#include "canon_lti/lti_core.hpp"
#include "canon_lti/priors.hpp"
#include "canon_lti/random.hpp"

namespace testing {

using namespace canon_lti;

// Minimal SISO system with well separated, stable eigenvalues.
inline StateSpaceSystem random_siso(int n, Rng& rng) {
  for (;;) {
    const EigenSpectrum roots = sample_eigen_prior(EigenPriorSpec::polar_uniform(n), rng);
    bool separated = roots.spectral_radius() < 0.95;
    for (int i = 0; i < n && separated; ++i)
      for (int j = i + 1; j < n; ++j)
        if (std::abs(roots[i] - roots[j]) < 0.05) separated = false;
    if (!separated) continue;
    const MatrixXd Q = haar_orthogonal(rng, n);
    const MatrixXd A = Q.transpose() * companion_matrix(vieta_forward(roots)) * Q;
    StateSpaceSystem sys(A, standard_normal_matrix(rng, n, 1), standard_normal_matrix(rng, 1, n),
                         MatrixXd::Zero(1, 1));
    if (is_minimal(sys, 1e-6) && condition_number(controllability_matrix(sys)) < 1e4) return sys;
  }
}

inline MatrixXd random_similarity(Rng& rng, int n, double max_cond = 1e3) {
  for (;;) {
    MatrixXd T = standard_normal_matrix(rng, n, n) + 0.5 * n * MatrixXd::Identity(n, n);
    if (condition_number(T) < max_cond) return T;
  }
}

inline double max_rel_diff(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace testing
