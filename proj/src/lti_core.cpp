#include "canon_lti/lti_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "canon_lti/errors.hpp"

namespace canon_lti {

namespace {

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

std::string shape(const MatrixXd& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

bool is_symmetric(const MatrixXd& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_psd(const MatrixXd& m, bool strict) {
  if (!is_symmetric(m)) return false;
  if (m.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return strict ? lo > 0.0 : lo >= -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
}

// Symmetric factor L with L L^T = S for PSD S (eigenvalues clamped at zero).
MatrixXd psd_factor(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  const VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

}  // namespace

StateSpaceSystem::StateSpaceSystem(MatrixXd A, MatrixXd B, MatrixXd C, MatrixXd D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
  const auto n = A_.rows();
  if (n < 1 || A_.cols() != n)
    throw DimensionError("StateSpaceSystem: A must be square and non-empty, got " + shape(A_));
  if (B_.rows() != n || B_.cols() < 1)
    throw DimensionError("StateSpaceSystem: B has shape " + shape(B_) + ", expected " +
                         std::to_string(n) + "xd_u");
  if (C_.cols() != n || C_.rows() < 1)
    throw DimensionError("StateSpaceSystem: C has shape " + shape(C_) + ", expected d_yx" +
                         std::to_string(n));
  if (D_.rows() != C_.rows() || D_.cols() != B_.cols())
    throw DimensionError("StateSpaceSystem: D has shape " + shape(D_) + ", expected " +
                         std::to_string(C_.rows()) + "x" + std::to_string(B_.cols()));
  if (!all_finite(A_) || !all_finite(B_) || !all_finite(C_) || !all_finite(D_))
    throw std::invalid_argument("StateSpaceSystem: non-finite matrix entry");
}

NoiseSpec::NoiseSpec(MatrixXd state_cov, MatrixXd obs_cov, MatrixXd initial_cov)
    : state_cov_(std::move(state_cov)),
      obs_cov_(std::move(obs_cov)),
      initial_cov_(std::move(initial_cov)) {
  if (state_cov_.rows() != state_cov_.cols() || initial_cov_.rows() != initial_cov_.cols() ||
      state_cov_.rows() != initial_cov_.rows())
    throw DimensionError("NoiseSpec: state and initial covariances must be d_x x d_x");
  if (obs_cov_.rows() != obs_cov_.cols() || obs_cov_.rows() < 1)
    throw DimensionError("NoiseSpec: observation covariance must be square");
  if (!is_psd(state_cov_, false))
    throw std::invalid_argument("NoiseSpec: process covariance must be symmetric PSD");
  if (!is_psd(obs_cov_, true))
    throw std::invalid_argument("NoiseSpec: observation covariance must be SPD");
  if (!is_psd(initial_cov_, true))
    throw std::invalid_argument("NoiseSpec: initial covariance P0 must be SPD");
}

NoiseSpec NoiseSpec::isotropic(double sigma_state, double sigma_obs, int state_dim,
                               int output_dim, double p0_scale) {
  if (!(sigma_state >= 0.0)) throw std::invalid_argument("sigma_state must be >= 0");
  if (!(sigma_obs > 0.0)) throw std::invalid_argument("sigma_obs must be > 0");
  if (!(p0_scale > 0.0)) throw std::invalid_argument("P0 scale must be > 0");
  return NoiseSpec(sigma_state * sigma_state * MatrixXd::Identity(state_dim, state_dim),
                   sigma_obs * sigma_obs * MatrixXd::Identity(output_dim, output_dim),
                   p0_scale * MatrixXd::Identity(state_dim, state_dim));
}

Trajectory::Trajectory(MatrixXd u, MatrixXd y, std::optional<MatrixXd> x)
    : u_(std::move(u)), y_(std::move(y)), x_(std::move(x)) {
  if (y_.rows() < 1) throw DimensionError("Trajectory: T must be >= 1");
  if (u_.rows() != y_.rows())
    throw DimensionError("Trajectory: u has " + std::to_string(u_.rows()) + " rows, y has " +
                         std::to_string(y_.rows()));
  if (x_ && x_->rows() != y_.rows() + 1)
    throw DimensionError("Trajectory: latent states must have T+1 rows");
}

EigenSpectrum::EigenSpectrum(std::vector<std::complex<double>> values)
    : values_(std::move(values)) {
  std::sort(values_.begin(), values_.end(),
            [](const std::complex<double>& l, const std::complex<double>& r) {
              if (l.real() != r.real()) return l.real() < r.real();
              return l.imag() < r.imag();
            });
}

bool EigenSpectrum::is_real(const std::complex<double>& z) {
  return std::abs(z.imag()) <= kRealTol * std::max(1.0, std::abs(z));
}

int EigenSpectrum::real_count() const {
  return static_cast<int>(std::count_if(values_.begin(), values_.end(), is_real));
}

double EigenSpectrum::spectral_radius() const {
  double r = 0.0;
  for (const auto& v : values_) r = std::max(r, std::abs(v));
  return r;
}

bool EigenSpectrum::conjugate_closed(double tol) const {
  std::vector<bool> used(values_.size(), false);
  for (size_t i = 0; i < values_.size(); ++i) {
    if (used[i]) continue;
    if (is_real(values_[i])) {
      used[i] = true;
      continue;
    }
    bool found = false;
    for (size_t j = 0; j < values_.size(); ++j) {
      if (j == i || used[j]) continue;
      if (std::abs(values_[j] - std::conj(values_[i])) <= tol * std::max(1.0, std::abs(values_[i]))) {
        used[i] = used[j] = true;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

Trajectory simulate(const StateSpaceSystem& sys, const NoiseSpec& noise, const MatrixXd& u,
                    Rng& rng, SimulateOptions options) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  const int p = sys.output_dim();
  const auto T = u.rows();
  if (T < 1) throw DimensionError("simulate: T must be >= 1");
  if (u.cols() != m) throw DimensionError("simulate: input has wrong number of columns");
  if (noise.state_cov().rows() != n || noise.obs_cov().rows() != p)
    throw DimensionError("simulate: noise dimensions do not match the system");

  const MatrixXd Lq = psd_factor(noise.state_cov());
  const MatrixXd Lr = psd_factor(noise.obs_cov());
  Eigen::LLT<MatrixXd> p0(noise.initial_cov());
  if (p0.info() != Eigen::Success) throw std::invalid_argument("simulate: P0 is not SPD");

  MatrixXd x(T + 1, n);
  MatrixXd y(T, p);
  VectorXd state = p0.matrixL() * standard_normal_vector(rng, n);
  if (options.pin_initial_state) state.setZero();
  x.row(0) = state.transpose();
  for (Eigen::Index t = 1; t <= T; ++t) {
    VectorXd next = sys.A() * state + Lq * standard_normal_vector(rng, n);
    if (t >= 2) next += sys.B() * u.row(t - 2).transpose();
    state = std::move(next);
    x.row(t) = state.transpose();
    y.row(t - 1) = (sys.C() * state + sys.D() * u.row(t - 1).transpose() +
                    Lr * standard_normal_vector(rng, p))
                       .transpose();
  }
  return Trajectory(u, std::move(y), std::move(x));
}

Trajectory simulate(const StateSpaceSystem& sys, const NoiseSpec& noise, const MatrixXd& u,
                    std::uint64_t seed, SimulateOptions options) {
  Rng rng = make_rng(seed);
  return simulate(sys, noise, u, rng, options);
}

MatrixXd markov_parameter(const StateSpaceSystem& sys, int t) {
  if (t < 0) throw std::invalid_argument("markov_parameter: t must be >= 0");
  if (t == 0) return sys.D();
  MatrixXd v = sys.B();
  for (int k = 1; k < t; ++k) v = sys.A() * v;
  return sys.C() * v;
}

MatrixXd hankel_matrix(const StateSpaceSystem& sys, int p, int q) {
  if (p < 1 || q < 1) throw std::invalid_argument("hankel_matrix: p, q must be >= 1");
  const int dy = sys.output_dim();
  const int du = sys.input_dim();
  std::vector<MatrixXd> markov;
  markov.reserve(static_cast<size_t>(p + q));
  MatrixXd v = sys.B();
  markov.push_back(sys.D());
  for (int t = 1; t < p + q; ++t) {
    markov.push_back(sys.C() * v);
    v = sys.A() * v;
  }
  MatrixXd H(p * dy, q * du);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < q; ++j) H.block(i * dy, j * du, dy, du) = markov[static_cast<size_t>(i + j + 1)];
  return H;
}

MatrixXcd transfer_function(const StateSpaceSystem& sys, std::complex<double> z) {
  const int n = sys.state_dim();
  const MatrixXcd M = z * MatrixXcd::Identity(n, n) - sys.A().cast<std::complex<double>>();
  Eigen::PartialPivLU<MatrixXcd> lu(M);
  if (!(lu.rcond() > 1e-13))
    throw NearPoleError("transfer_function: z is numerically an eigenvalue of A");
  return sys.D().cast<std::complex<double>>() +
         sys.C().cast<std::complex<double>>() * lu.solve(sys.B().cast<std::complex<double>>());
}

EigenSpectrum eigenvalues(const MatrixXd& A) {
  if (A.rows() != A.cols()) throw DimensionError("eigenvalues: matrix must be square");
  if (!A.allFinite()) throw NumericalError("eigenvalues: non-finite matrix");
  Eigen::EigenSolver<MatrixXd> es(A, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalues: eigensolver failed");
  const Eigen::VectorXcd ev = es.eigenvalues();
  return EigenSpectrum(std::vector<std::complex<double>>(ev.data(), ev.data() + ev.size()));
}

std::vector<std::complex<double>> poly_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (size_t k = 0; k < c.size(); ++k) {
      next[k + 1] += c[k];
      next[k] -= r * c[k];
    }
    c = std::move(next);
  }
  return c;
}

VectorXd char_poly(const MatrixXd& A) {
  const EigenSpectrum spec = eigenvalues(A);
  const auto c = poly_from_roots(spec.values());
  const auto n = A.rows();
  VectorXd a(n);
  for (Eigen::Index k = 0; k < n; ++k) a(k) = c[static_cast<size_t>(k)].real();
  return a;
}

MatrixXd controllability_matrix(const StateSpaceSystem& sys) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  MatrixXd K(n, n * m);
  MatrixXd v = sys.B();
  for (int k = 0; k < n; ++k) {
    K.middleCols(k * m, m) = v;
    v = sys.A() * v;
  }
  return K;
}

MatrixXd observability_matrix(const StateSpaceSystem& sys) {
  const int n = sys.state_dim();
  const int p = sys.output_dim();
  MatrixXd O(n * p, n);
  MatrixXd v = sys.C();
  for (int k = 0; k < n; ++k) {
    O.middleRows(k * p, p) = v;
    v = v * sys.A();
  }
  return O;
}

int numerical_rank(const MatrixXd& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

MinimalityReport is_minimal(const StateSpaceSystem& sys, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("is_minimal: tol must be > 0");
  MinimalityReport report;
  report.controllability_rank = numerical_rank(controllability_matrix(sys), tol);
  report.observability_rank = numerical_rank(observability_matrix(sys), tol);
  report.minimal = report.controllability_rank == sys.state_dim() &&
                   report.observability_rank == sys.state_dim();
  return report;
}

bool is_stable(const MatrixXd& A, double margin) {
  return eigenvalues(A).spectral_radius() < 1.0 - margin;
}

MatrixXd solve_discrete_lyapunov(const MatrixXd& A, const MatrixXd& Q) {
  const auto n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n)
    throw DimensionError("solve_discrete_lyapunov: A and Q must be square and of equal size");
  if (!is_stable(A)) throw NumericalError("solve_discrete_lyapunov: A is not stable");
  MatrixXd W;
  if (n <= 12) {
    const MatrixXd I = MatrixXd::Identity(n * n, n * n);
    const MatrixXd K = I - Eigen::kroneckerProduct(A, A).eval();
    const VectorXd q = Eigen::Map<const VectorXd>(Q.data(), n * n);
    const VectorXd w = K.partialPivLu().solve(q);
    W = Eigen::Map<const MatrixXd>(w.data(), n, n);
  } else {
    // Squared Smith iteration: W_{k+1} = W_k + A_k W_k A_k^T, A_{k+1} = A_k^2.
    MatrixXd Ak = A;
    W = Q;
    for (int it = 0; it < 100; ++it) {
      const MatrixXd step = Ak * W * Ak.transpose();
      W += step;
      Ak = Ak * Ak;
      if (step.norm() <= 1e-16 * W.norm()) break;
    }
  }
  return 0.5 * (W + W.transpose());
}

Gramians gramians(const StateSpaceSystem& sys) {
  Gramians g;
  g.controllability = solve_discrete_lyapunov(sys.A(), sys.B() * sys.B().transpose());
  g.observability =
      solve_discrete_lyapunov(sys.A().transpose(), sys.C().transpose() * sys.C());
  return g;
}

MatrixXd symmetric_sqrt(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("symmetric_sqrt: eigensolver failed");
  const VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

double condition_number(const MatrixXd& M) {
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double lo = s(s.size() - 1);
  return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

StateSpaceSystem apply_similarity(const StateSpaceSystem& sys, const MatrixXd& T,
                                  double max_condition) {
  const int n = sys.state_dim();
  if (T.rows() != n || T.cols() != n)
    throw DimensionError("apply_similarity: T must be d_x x d_x");
  const double cond = condition_number(T);
  if (!(cond <= max_condition))
    throw NumericalError("apply_similarity: T is singular or ill-conditioned (cond=" +
                         std::to_string(cond) + ")");
  const Eigen::PartialPivLU<MatrixXd> lu(T);
  return StateSpaceSystem(lu.solve(sys.A() * T), lu.solve(sys.B()), sys.C() * T, sys.D());
}

std::pair<StateSpaceSystem, NoiseSpec> apply_similarity(const StateSpaceSystem& sys,
                                                        const NoiseSpec& noise,
                                                        const MatrixXd& T,
                                                        double max_condition) {
  StateSpaceSystem out = apply_similarity(sys, T, max_condition);
  const MatrixXd Tinv = T.partialPivLu().inverse();
  auto congruence = [&](const MatrixXd& X) {
    const MatrixXd Y = Tinv * X * Tinv.transpose();
    return MatrixXd(0.5 * (Y + Y.transpose()));
  };
  NoiseSpec noise_out(congruence(noise.state_cov()), noise.obs_cov(),
                      congruence(noise.initial_cov()));
  return {std::move(out), std::move(noise_out)};
}

}  // namespace canon_lti
