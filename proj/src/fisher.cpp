#include "canon_lti/fisher.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <limits>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

#include "canon_lti/errors.hpp"
#include "canon_lti/likelihood.hpp"

namespace canon_lti {

namespace {

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

std::vector<ModelDerivative> canonical_directions(const CanonicalSiso& c, bool include_d0) {
  ParamLayout layout = ParamLayout::canonical(c.state_dim(), include_d0);
  layout.form = c.form;
  return model_derivatives(layout, encode_canonical(layout, c, 0.0, layout.sigma_obs));
}

std::vector<ModelDerivative> standard_directions(const StateSpaceSystem& sys, bool include_d) {
  const ParamLayout layout =
      ParamLayout::standard(sys.state_dim(), sys.input_dim(), sys.output_dim(), include_d);
  return model_derivatives(layout, encode_standard(layout, sys, 0.0, layout.sigma_obs));
}

MatrixXd fim_noiseless(const StateSpaceSystem& sys, const std::vector<ModelDerivative>& dirs,
                       const MatrixXd& u, double sigma_obs) {
  if (!(sigma_obs > 0.0)) throw std::invalid_argument("fim_noiseless: sigma_obs must be > 0");
  if (u.cols() != sys.input_dim()) throw DimensionError("fim_noiseless: bad input width");
  const int n = sys.state_dim(), p = sys.output_dim();
  const int q = static_cast<int>(dirs.size());
  VectorXd x = VectorXd::Zero(n);
  MatrixXd dx = MatrixXd::Zero(n, q);
  MatrixXd g(p, q);
  MatrixXd F = MatrixXd::Zero(q, q);
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    const VectorXd ut = u.row(t).transpose();
    for (int i = 0; i < q; ++i) {
      const auto& d = dirs[static_cast<size_t>(i)];
      g.col(i) = d.dC * x + sys.C() * dx.col(i) + d.dD * ut;
    }
    F.noalias() += g.transpose() * g;
    MatrixXd dx_next(n, q);
    for (int i = 0; i < q; ++i) {
      const auto& d = dirs[static_cast<size_t>(i)];
      dx_next.col(i) = d.dA * x + sys.A() * dx.col(i) + d.dB * ut;
    }
    dx = std::move(dx_next);
    x = sys.A() * x + sys.B() * ut;
  }
  return symmetrize(F) / (sigma_obs * sigma_obs);
}

FimResult fim_noiseless(const CanonicalSiso& c, const MatrixXd& u, double sigma_obs,
                        bool include_d0) {
  FimResult r;
  r.matrix = fim_noiseless(canonical_to_statespace(c), canonical_directions(c, include_d0), u,
                           sigma_obs);
  r.method = FimMethod::NoiselessRecursive;
  r.T = static_cast<int>(u.rows());
  return r;
}

FimResult fim_standard_noiseless(const StateSpaceSystem& sys, const MatrixXd& u, double sigma_obs,
                                 bool include_d) {
  FimResult r;
  r.matrix = fim_noiseless(sys, standard_directions(sys, include_d), u, sigma_obs);
  r.method = FimMethod::NoiselessRecursive;
  r.T = static_cast<int>(u.rows());
  return r;
}

FimResult fim_kalman(const CanonicalSiso& c, const MatrixXd& u, const NoiseSpec& noise,
                     bool include_d0) {
  FimResult r;
  const StateSpaceSystem sys = canonical_to_statespace(c);
  auto dirs = canonical_directions(c, include_d0);
  for (auto& d : dirs) {
    d.dSigma = MatrixXd::Zero(sys.state_dim(), sys.state_dim());
    d.dGamma = MatrixXd::Zero(1, 1);
  }
  r.matrix = kalman_expected_fim(sys, noise, u, dirs);
  r.method = FimMethod::KalmanSensitivity;
  r.T = static_cast<int>(u.rows());
  return r;
}

FimResult fim_kalman(const ParamLayout& layout, const VectorXd& theta, const MatrixXd& u) {
  const DecodedParams d = decode(layout, theta);
  FimResult r;
  r.matrix = kalman_expected_fim(d.system, d.noise, u, model_derivatives(layout, theta));
  r.method = FimMethod::KalmanSensitivity;
  r.T = static_cast<int>(u.rows());
  return r;
}

FimResult fim_numeric_expected(const ParamLayout& layout, const VectorXd& theta_hat,
                               const StateSpaceSystem& truth, const NoiseSpec& truth_noise,
                               const MatrixXd& u, const std::vector<std::uint64_t>& seeds,
                               int n_threads, double h) {
  if (seeds.size() < 2) throw std::invalid_argument("fim_numeric_expected: need M >= 2");
  const auto dirs_at = [&](const VectorXd& th) { return model_derivatives(layout, th); };
  std::vector<MatrixXd> observed(seeds.size());
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&]() {
    for (size_t k = next++; k < seeds.size(); k = next++) {
      try {
        const Trajectory traj = simulate(truth, truth_noise, u, seeds[k]);
        auto grad = [&](const VectorXd& th) {
          const DecodedParams d = decode(layout, th);
          return kalman_loglik_gradient(d.system, d.noise, traj, dirs_at(th)).grad;
        };
        observed[k] = -fd_hessian_from_gradient(grad, theta_hat, h);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int k = std::max(1, std::min<int>(n_threads, static_cast<int>(seeds.size())));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  FimResult r;
  r.matrix = MatrixXd::Zero(theta_hat.size(), theta_hat.size());
  for (const auto& m : observed) r.matrix += m;  // summed in seed order for determinism
  r.matrix = symmetrize(r.matrix / static_cast<double>(seeds.size()));
  r.method = FimMethod::NumericExpected;
  r.realizations = static_cast<int>(seeds.size());
  r.T = static_cast<int>(u.rows());
  return r;
}

FimResult fim_numeric_expected(const ParamLayout& layout, const VectorXd& theta_hat,
                               const StateSpaceSystem& truth, const NoiseSpec& truth_noise,
                               const MatrixXd& u, int M, std::uint64_t seed, int n_threads) {
  if (M < 2) throw std::invalid_argument("fim_numeric_expected: need M >= 2");
  std::vector<std::uint64_t> seeds;
  Rng rng = make_rng(seed, 0xF15);
  for (int i = 0; i < M; ++i) seeds.push_back(rng());
  return fim_numeric_expected(layout, theta_hat, truth, truth_noise, u, seeds, n_threads);
}

MatrixXd observed_information_fd(const ParamLayout& layout, const VectorXd& theta,
                                 const Trajectory& traj, double h) {
  auto f = [&](const VectorXd& th) {
    const DecodedParams d = decode(layout, th);
    return kalman_loglik(d.system, d.noise, traj);
  };
  return -symmetrize(fd_hessian(f, theta, h));
}

int count_small_eigenvalues(const MatrixXd& F, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(F), Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  int count = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < rel_tol * top) ++count;
  return count;
}

EllipsoidVolume ellipsoid_log_volume_radius(const MatrixXd& F, double r2, double rel_tol) {
  if (F.rows() != F.cols() || F.rows() < 1)
    throw DimensionError("ellipsoid_log_volume: F must be square and non-empty");
  if (!(r2 > 0.0)) throw std::invalid_argument("ellipsoid_log_volume: radius must be > 0");
  EllipsoidVolume out;
  if (count_small_eigenvalues(F, rel_tol) > 0) {
    out.singular = true;
    out.log_volume = std::numeric_limits<double>::infinity();
    return out;
  }
  const double d = static_cast<double>(F.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(F), Eigen::EigenvaluesOnly);
  const double logdet = es.eigenvalues().array().log().sum();
  const double log_unit_ball = 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d + 1.0);
  out.log_volume = log_unit_ball + 0.5 * d * std::log(r2) - 0.5 * logdet;
  return out;
}

EllipsoidVolume ellipsoid_log_volume(const MatrixXd& F, double confidence, double rel_tol) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("ellipsoid_log_volume: confidence must lie in (0, 1)");
  const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(F.rows()));
  return ellipsoid_log_volume_radius(F, boost::math::quantile(chi2, confidence), rel_tol);
}

BvmReport bvm_report(const MatrixXd& draws, const MatrixXd& F, const VectorXd& truth) {
  const auto k = F.rows();
  if (F.cols() != k || truth.size() != k || draws.cols() < k)
    throw DimensionError("bvm_report: dimension mismatch");
  if (draws.rows() <= k) throw NumericalError("bvm_report: too few draws for a covariance");
  if (count_small_eigenvalues(F) > 0) throw NumericalError("bvm_report: singular information matrix");
  const MatrixXd X = draws.leftCols(k);
  const VectorXd mean = X.colwise().mean().transpose();
  const MatrixXd centered = X.rowwise() - mean.transpose();
  const MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  Eigen::LLT<MatrixXd> cov_llt(cov);
  if (cov_llt.info() != Eigen::Success || count_small_eigenvalues(cov, 1e-12) > 0)
    throw NumericalError("bvm_report: posterior sample covariance is rank deficient");
  Eigen::LLT<MatrixXd> f_llt(F);
  if (f_llt.info() != Eigen::Success) throw NumericalError("bvm_report: F is not positive definite");
  const double logdet_cov = 2.0 * cov_llt.matrixLLT().diagonal().array().log().sum();
  const double logdet_f = 2.0 * f_llt.matrixLLT().diagonal().array().log().sum();

  BvmReport r;
  r.log_volume_ratio = logdet_cov + logdet_f;
  const MatrixXd Finv = f_llt.solve(MatrixXd::Identity(k, k));
  const VectorXd err = mean - truth;
  r.z_scores = err.cwiseQuotient(Finv.diagonal().cwiseSqrt());
  r.mahalanobis = std::sqrt(err.dot(F * err));
  return r;
}

BvmReport bvm_report(const PosteriorSamples& samples, const MatrixXd& F, const VectorXd& truth) {
  if (samples.layout.mode != ParamMode::Canonical)
    throw std::invalid_argument("bvm_report: canonical samples required");
  return bvm_report(samples.pooled(), F, truth);
}

CurvatureResult expected_posterior_curvature(const PosteriorSamples& samples,
                                             const Posterior& posterior, int thin, double h) {
  if (thin < 1) throw std::invalid_argument("expected_posterior_curvature: thin must be >= 1");
  const MatrixXd all = samples.pooled();
  const auto d = all.cols();
  CurvatureResult out;
  out.matrix = MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < all.rows(); i += thin) {
    const VectorXd x = all.row(i).transpose();
    bool ok = true;
    auto grad = [&](const VectorXd& th) {
      VectorXd g;
      if (!std::isfinite(posterior.log_posterior(th, g))) {
        ok = false;
        return VectorXd(VectorXd::Zero(d));
      }
      return g;
    };
    const MatrixXd H = fd_hessian_from_gradient(grad, x, h);
    if (!ok || !H.allFinite()) {
      ++out.skipped;
      continue;
    }
    out.matrix -= H;
    ++out.used;
  }
  if (out.used > 0) out.matrix /= static_cast<double>(out.used);
  return out;
}

double excitation_min_eigenvalue(const VectorXd& u, int order) {
  const auto T = u.size();
  if (order < 1 || T <= order) throw std::invalid_argument("excitation_min_eigenvalue: bad order");
  MatrixXd R(order, order);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j) {
      const int lag = std::abs(i - j);
      double s = 0.0;
      for (Eigen::Index t = lag; t < T; ++t) s += u(t) * u(t - lag);
      R(i, j) = s / static_cast<double>(T);
    }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(R, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace canon_lti
