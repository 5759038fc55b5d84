#include <doctest.h>

#include "canon_lti/likelihood.hpp"
#include "canon_lti/params.hpp"
#include "canon_lti/posterior.hpp"
#include "helpers.hpp"

using namespace canon_lti;

namespace {

StateSpaceSystem scalar(double a) {
  return StateSpaceSystem(MatrixXd::Constant(1, 1, a), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                          MatrixXd::Zero(1, 1));
}

double log_normal(double x, double var) {
  return -0.5 * (std::log(2 * std::numbers::pi * var) + x * x / var);
}

}  // namespace

TEST_CASE("hand-rolled scalar filter") {
  // the filter adds a fixed nugget to the innovation variance
  const double a = 0.5, q = 0.09, r = 0.25 + kInnovationNugget, p0 = 1.0;
  const double u[3] = {1, 0, 0}, y[3] = {0.1, 0.9, 0.4};
  double m = 0.0, P = p0, ll = 0.0, u_prev = 0.0;
  for (int t = 0; t < 3; ++t) {
    const double mp = a * m + u_prev, Pp = a * a * P + q;
    const double S = Pp + r, e = y[t] - mp;
    ll += log_normal(e, S);
    const double K = Pp / S;
    m = mp + K * e;
    P = (1 - K) * Pp;
    u_prev = u[t];
  }
  const Trajectory tr((MatrixXd(3, 1) << 1, 0, 0).finished(), (MatrixXd(3, 1) << 0.1, 0.9, 0.4).finished());
  const auto res = kalman_filter(scalar(a), NoiseSpec::isotropic(0.3, 0.5, 1, 1, p0), tr);
  CHECK(std::abs(res.loglik - ll) < 1e-12);
  CHECK(res.steps.size() == 3);
  CHECK(res.steps.back().mean(0) == doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("iid limit") {
  const StateSpaceSystem zero(MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1),
                              MatrixXd::Zero(1, 1));
  Rng rng = make_rng(1);
  const MatrixXd y = standard_normal_matrix(rng, 30, 1);
  double ref = 0.0;
  for (int t = 0; t < 30; ++t) ref += log_normal(y(t, 0), 0.49);
  const double ll = kalman_loglik(zero, NoiseSpec::isotropic(0.0, 0.7, 1, 1, 1e-18),
                                  Trajectory(MatrixXd::Zero(30, 1), y));
  CHECK(std::abs(ll - ref) < 1e-6);
}

TEST_CASE("likelihood is invariant under similarity") {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = testing::random_siso(3, rng);
    const auto noise = NoiseSpec::isotropic(0.3, 0.5, 3);
    const auto tr = simulate(sys, noise, standard_normal_matrix(rng, 200, 1), rng);
    const auto [s2, n2] = apply_similarity(sys, noise, testing::random_similarity(rng, 3));
    const double l1 = kalman_loglik(sys, noise, tr), l2 = kalman_loglik(s2, n2, tr);
    CHECK(std::abs(l1 - l2) < 1e-8 * std::abs(l1));
  }
}

TEST_CASE("smoother") {
  Rng rng = make_rng(3);
  const auto sys = testing::random_siso(2, rng);
  const auto noise = NoiseSpec::isotropic(0.3, 0.5, 2);
  const auto tr = simulate(sys, noise, standard_normal_matrix(rng, 40, 1), rng);
  const auto filt = kalman_filter(sys, noise, tr);
  const auto sm = kalman_smoother(sys, noise, tr);
  REQUIRE(sm.size() == 41);
  CHECK((sm.back().mean - filt.steps.back().mean).norm() < 1e-12);
  for (int t = 1; t <= 40; ++t) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(filt.steps[static_cast<size_t>(t - 1)].cov - sm[static_cast<size_t>(t)].cov);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
  const Trajectory one(tr.u().topRows(1), tr.y().topRows(1));
  const auto sm1 = kalman_smoother(sys, noise, one);
  const auto f1 = kalman_filter(sys, noise, one);
  CHECK((sm1[1].mean - f1.steps[0].mean).norm() < 1e-12);
  CHECK((sm1[1].cov - f1.steps[0].cov).norm() < 1e-12);

  // Deterministic regime: the smoother recovers the simulated states.
  const auto quiet = NoiseSpec::isotropic(0.0, 0.5, 2, 1, 1e-18);
  const auto det = simulate(sys, quiet, standard_normal_matrix(rng, 40, 1), rng);
  const auto sd = kalman_smoother(sys, quiet, det);
  for (int t = 0; t <= 40; ++t) CHECK((sd[static_cast<size_t>(t)].mean - det.x()->row(t).transpose()).norm() < 1e-6);
  const MatrixXd draw = sample_smoothed_states(sys, quiet, det, rng);
  CHECK((draw - *det.x()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("analytic gradient matches finite differences") {
  Rng rng = make_rng(4);
  for (bool standard : {false, true}) {
    ParamLayout layout = standard ? ParamLayout::standard(2, 1, 1, true) : ParamLayout::canonical(2, true);
    layout.infer_sigma_state = layout.infer_sigma_obs = true;
    const auto sys = testing::random_siso(2, rng);
    const auto tr = simulate(sys, NoiseSpec::isotropic(0.3, 0.5, 2), standard_normal_matrix(rng, 60, 1), rng);
    VectorXd theta = standard ? encode_standard(layout, sys, 0.3, 0.5)
                              : encode_canonical(layout, to_controller_form(sys).first, 0.3, 0.5);
    theta += 0.05 * standard_normal_vector(rng, theta.size());
    auto f = [&](const VectorXd& th) {
      const auto d = decode(layout, th);
      return kalman_loglik(d.system, d.noise, tr);
    };
    const auto d = decode(layout, theta);
    const auto g = kalman_loglik_gradient(d.system, d.noise, tr, model_derivatives(layout, theta));
    CHECK(g.loglik == doctest::Approx(f(theta)).epsilon(1e-12));
    const VectorXd fd = fd_gradient(f, theta, 1e-6);
    CHECK((g.grad - fd).norm() < 1e-5 * fd.norm());
  }
}

TEST_CASE("posterior decomposition") {
  Rng rng = make_rng(5);
  const auto sys = testing::random_siso(2, rng);
  const auto tr = simulate(sys, NoiseSpec::isotropic(0.0, 0.5, 2), standard_normal_matrix(rng, 30, 1), rng);
  ParamLayout layout = ParamLayout::canonical(2);
  ParamPriorSpec prior;
  prior.eigen = EigenPriorSpec::uniform_stable_coeffs(2);
  const Posterior post(layout, prior, tr);
  const VectorXd theta = encode_canonical(layout, to_controller_form(sys).first, 0.0, 0.5);
  const double b2 = theta.tail(2).squaredNorm();
  CHECK(post.log_posterior(theta) ==
        doctest::Approx(post.log_likelihood(theta) + std::log(0.25) - std::log(2 * std::numbers::pi) - 0.5 * b2));
  VectorXd bad = theta;
  bad(0) = 2.0;
  CHECK(post.log_posterior(bad) == -std::numeric_limits<double>::infinity());

  VectorXd zero = VectorXd::Zero(4);
  zero(0) = 0.1;
  const double lp0 = log_prior_full(prior, layout, zero);
  CHECK(lp0 == doctest::Approx(std::log(0.25) - std::log(2 * std::numbers::pi)));

  // zero-data toy: gradient of the Gaussian part is -b / sigma^2
  prior.b_std = 2.0;
  const VectorXd g = grad_log_prior_full(prior, layout, (VectorXd(4) << 0.1, 0.2, 0.6, -1.0).finished());
  CHECK(g(2) == doctest::Approx(-0.6 / 4.0));
  CHECK(g(3) == doctest::Approx(1.0 / 4.0));
}
