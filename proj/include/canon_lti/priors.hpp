#pragma once

// Stability-enforcing priors over eigenvalues and their pushforward onto the
// characteristic coefficients of a canonical form.
//
// Root-space densities are "labeled": real roots are treated as an ordered
// tuple and every conjugate pair is represented by its upper half-plane member
// (x, y), y > 0. The coefficient-space density collects the r! m! labelings of
// a spectrum with r real roots and m pairs and divides by the real Jacobian of
// the Vieta map, 2^m prod_{i<j} |lambda_i - lambda_j|.

#include <vector>

#include <Eigen/Dense>

#include "canon_lti/lti_core.hpp"
#include "canon_lti/random.hpp"

namespace canon_lti {

enum class EigenPriorKind { RestrictedReal, UniformReal, PolarUniform, UniformStableCoeffs };

struct EigenPriorSpec {
  EigenPriorKind kind = EigenPriorKind::UniformStableCoeffs;
  int n = 2;
  double lo = 0.0;  // RestrictedReal support (lo, hi)
  double hi = 0.9;
  /// PolarUniform only: probability of each real-root count r = 0..n. Entries
  /// for counts of the wrong parity must be zero. Empty means uniform over the
  /// admissible counts.
  std::vector<double> real_count_weights;

  static EigenPriorSpec restricted_real(int n, double lo = 0.0, double hi = 0.9);
  static EigenPriorSpec uniform_real(int n);
  static EigenPriorSpec polar_uniform(int n, std::vector<double> weights = {});
  static EigenPriorSpec uniform_stable_coeffs(int n);

  /// Throws std::invalid_argument when the fields are inconsistent.
  void validate() const;
};

enum class NoisePriorKind { HalfCauchy, HalfNormal, Fixed };

struct NoisePrior {
  NoisePriorKind kind = NoisePriorKind::HalfCauchy;
  double scale = 1.0;
};

struct ParamPriorSpec {
  EigenPriorSpec eigen;
  double b_std = 1.0;
  double d0_std = 1.0;
  NoisePrior noise;
  bool infer_sigma_state = false;
  bool infer_sigma_obs = false;

  void validate() const;
};

/// Log density of a spectrum under the labeled root-space prior; -inf outside
/// the support. UniformStableCoeffs is only available for n = 2.
double log_prior_eigen(const EigenPriorSpec& spec, const EigenSpectrum& roots);

/// Log density of the characteristic coefficients. Near-coincident roots
/// propagate DegenerateSpectrumError.
double log_prior_coeffs(const EigenPriorSpec& spec, const VectorXd& a);

/// Gradient of log_prior_coeffs with respect to a (zero for the flat priors).
/// Only meaningful where log_prior_coeffs is finite.
VectorXd grad_log_prior_coeffs(const EigenPriorSpec& spec, const VectorXd& a);

/// Gradient of vandermonde_log_abs_det(vieta_inverse(a)) with respect to a.
VectorXd grad_log_vandermonde(const VectorXd& a);

EigenSpectrum sample_eigen_prior(const EigenPriorSpec& spec, Rng& rng,
                                 long max_tries = 10'000'000);
EigenSpectrum sample_eigen_prior(const EigenPriorSpec& spec, std::uint64_t seed);

/// Schur-Cohn step-down test: all roots of lambda^n + ... + a_0 strictly inside
/// the unit disk.
bool schur_stable(const VectorXd& a);

/// Uniform draw from the stable coefficient region by box rejection
/// (|a_k| < binom(n, k)). Throws NumericalError when max_tries is exhausted.
VectorXd sample_stable_coeffs(int n, Rng& rng, long max_tries = 10'000'000);

/// Monte Carlo estimate of the distribution of the real-root count under the
/// uniform-stable-coefficient prior; usable as PolarUniform weights.
std::vector<double> estimate_real_count_weights(int n, long draws, Rng& rng);

/// Log density of a positive scale at sigma = exp(log_sigma), including the
/// log-transform Jacobian.
double log_prior_noise_scale(const NoisePrior& prior, double log_sigma);
double grad_log_prior_noise_scale(const NoisePrior& prior, double log_sigma);

}  // namespace canon_lti
