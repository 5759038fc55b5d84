#pragma once

// Discrete-time LTI state-space systems
//
//   x_{t+1} = A x_t + B u_t + w_t,   w_t ~ N(0, Sigma)
//   y_t     = C x_t + D u_t + z_t,   z_t ~ N(0, Gamma)
//
// with x_0 ~ N(0, P0). Time indexing: row k of an input/output array holds
// u_{k+1} / y_{k+1}; the first state transition x_1 = A x_0 + w_0 sees no
// input (u_0 = 0), and u_T only enters through the feedthrough D.

#include <complex>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "canon_lti/random.hpp"

namespace canon_lti {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class StateSpaceSystem {
 public:
  StateSpaceSystem(MatrixXd A, MatrixXd B, MatrixXd C, MatrixXd D);

  const MatrixXd& A() const { return A_; }
  const MatrixXd& B() const { return B_; }
  const MatrixXd& C() const { return C_; }
  const MatrixXd& D() const { return D_; }

  int state_dim() const { return static_cast<int>(A_.rows()); }
  int input_dim() const { return static_cast<int>(B_.cols()); }
  int output_dim() const { return static_cast<int>(C_.rows()); }
  bool is_siso() const { return input_dim() == 1 && output_dim() == 1; }

 private:
  MatrixXd A_, B_, C_, D_;
};

/// Gaussian noise and initial-state model. The initial mean is always zero.
/// Covariances are stored as full matrices so that similarity transforms of
/// an isotropic model stay representable.
class NoiseSpec {
 public:
  NoiseSpec(MatrixXd state_cov, MatrixXd obs_cov, MatrixXd initial_cov);

  /// Sigma = sigma_state^2 I, Gamma = sigma_obs^2 I, P0 = p0_scale * I.
  static NoiseSpec isotropic(double sigma_state, double sigma_obs, int state_dim,
                             int output_dim = 1, double p0_scale = 1.0);

  const MatrixXd& state_cov() const { return state_cov_; }
  const MatrixXd& obs_cov() const { return obs_cov_; }
  const MatrixXd& initial_cov() const { return initial_cov_; }

 private:
  MatrixXd state_cov_, obs_cov_, initial_cov_;
};

class Trajectory {
 public:
  /// u: T x d_u, y: T x d_y, x (optional): (T+1) x d_x holding x_0..x_T.
  Trajectory(MatrixXd u, MatrixXd y, std::optional<MatrixXd> x = std::nullopt);

  int length() const { return static_cast<int>(y_.rows()); }
  const MatrixXd& u() const { return u_; }
  const MatrixXd& y() const { return y_; }
  const std::optional<MatrixXd>& x() const { return x_; }

 private:
  MatrixXd u_, y_;
  std::optional<MatrixXd> x_;
};

/// Multiset of eigenvalues sorted by real part, then imaginary part, so
/// conjugate pairs are adjacent (lower half-plane member first).
class EigenSpectrum {
 public:
  /// Imaginary parts at or below this (relative) size count as real.
  static constexpr double kRealTol = 1e-12;

  EigenSpectrum() = default;
  explicit EigenSpectrum(std::vector<std::complex<double>> values);

  const std::vector<std::complex<double>>& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  const std::complex<double>& operator[](int i) const { return values_[static_cast<size_t>(i)]; }

  static bool is_real(const std::complex<double>& z);
  int real_count() const;
  double spectral_radius() const;
  bool conjugate_closed(double tol = 1e-8) const;

 private:
  std::vector<std::complex<double>> values_;
};

struct SimulateOptions {
  bool pin_initial_state = false;  // x_0 = 0 instead of a draw from N(0, P0)
};

/// Draws x_0, then (w_{t-1}, z_t) for t = 1..T, in that order.
Trajectory simulate(const StateSpaceSystem& sys, const NoiseSpec& noise, const MatrixXd& u,
                    Rng& rng, SimulateOptions options = {});
Trajectory simulate(const StateSpaceSystem& sys, const NoiseSpec& noise, const MatrixXd& u,
                    std::uint64_t seed, SimulateOptions options = {});

/// M_0 = D, M_t = C A^{t-1} B.
MatrixXd markov_parameter(const StateSpaceSystem& sys, int t);

/// Block (i, j) (1-based) is M_{i+j-1}.
MatrixXd hankel_matrix(const StateSpaceSystem& sys, int p, int q);

/// G(z) = D + C (zI - A)^{-1} B; throws NearPoleError if zI - A is singular.
MatrixXcd transfer_function(const StateSpaceSystem& sys, std::complex<double> z);

EigenSpectrum eigenvalues(const MatrixXd& A);

/// Monic characteristic polynomial coefficients (a_0, ..., a_{n-1}) of
/// lambda^n + a_{n-1} lambda^{n-1} + ... + a_0, expanded from the eigenvalues.
VectorXd char_poly(const MatrixXd& A);

/// Coefficients of prod_i (lambda - r_i), lowest degree first, leading 1 included.
std::vector<std::complex<double>> poly_from_roots(const std::vector<std::complex<double>>& roots);

MatrixXd controllability_matrix(const StateSpaceSystem& sys);
MatrixXd observability_matrix(const StateSpaceSystem& sys);

/// Number of singular values above rel_tol * sigma_max.
int numerical_rank(const MatrixXd& M, double rel_tol = 1e-8);

struct MinimalityReport {
  bool minimal = false;
  int controllability_rank = 0;
  int observability_rank = 0;
  explicit operator bool() const { return minimal; }
};

MinimalityReport is_minimal(const StateSpaceSystem& sys, double tol = 1e-8);

bool is_stable(const MatrixXd& A, double margin = 0.0);

/// Solves W = A W A^T + Q. Kronecker-vectorized solve for n <= 12, squared
/// Smith doubling above that. Throws NumericalError for unstable A.
MatrixXd solve_discrete_lyapunov(const MatrixXd& A, const MatrixXd& Q);

struct Gramians {
  MatrixXd controllability;  // W_c = A W_c A^T + B B^T
  MatrixXd observability;    // W_o = A^T W_o A + C^T C
};

Gramians gramians(const StateSpaceSystem& sys);

/// Unique symmetric PSD square root via eigendecomposition.
MatrixXd symmetric_sqrt(const MatrixXd& S);

/// (T^{-1} A T, T^{-1} B, C T, D); Sigma and P0 map to T^{-1} X T^{-T}, Gamma is unchanged.
std::pair<StateSpaceSystem, NoiseSpec> apply_similarity(const StateSpaceSystem& sys,
                                                        const NoiseSpec& noise,
                                                        const MatrixXd& T,
                                                        double max_condition = 1e12);

/// Transform of the matrices only.
StateSpaceSystem apply_similarity(const StateSpaceSystem& sys, const MatrixXd& T,
                                  double max_condition = 1e12);

double condition_number(const MatrixXd& M);

}  // namespace canon_lti
