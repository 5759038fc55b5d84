#include <doctest.h>

#include "canon_lti/errors.hpp"
#include "canon_lti/lti_core.hpp"
#include "helpers.hpp"

using namespace canon_lti;

namespace {

StateSpaceSystem scalar(double a, double b = 1.0, double c = 1.0, double d = 0.0) {
  return StateSpaceSystem(MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b),
                          MatrixXd::Constant(1, 1, c), MatrixXd::Constant(1, 1, d));
}

// Faddeev-LeVerrier recursion, independent of any eigen-decomposition.
VectorXd faddeev_leverrier(const MatrixXd& A) {
  const auto n = A.rows();
  VectorXd c(n + 1);  // c(k) multiplies lambda^k
  c(n) = 1.0;
  MatrixXd M = MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    M = A * M + c(n - k + 1) * MatrixXd::Identity(n, n);
    c(n - k) = -(A * M).trace() / static_cast<double>(k);
  }
  return c.head(n);
}

}  // namespace

TEST_CASE("construction validates dimensions and values") {
  CHECK_THROWS_AS(StateSpaceSystem(MatrixXd::Zero(2, 2), MatrixXd::Zero(3, 1), MatrixXd::Zero(1, 2),
                                   MatrixXd::Zero(1, 1)),
                  DimensionError);
  MatrixXd A = MatrixXd::Zero(1, 1);
  A(0, 0) = std::nan("");
  CHECK_THROWS(scalar(std::nan("")));
  CHECK_THROWS(NoiseSpec::isotropic(0.1, 0.0, 2));
  CHECK_THROWS(NoiseSpec::isotropic(-0.1, 1.0, 2));
  CHECK_THROWS(Trajectory(MatrixXd::Zero(3, 1), MatrixXd::Zero(2, 1)));
}

TEST_CASE("simulate unrolls the recursion") {
  MatrixXd u(3, 1);
  u << 1, 0, 0;
  const auto noise = NoiseSpec::isotropic(0.0, 1e-150, 1, 1, 1.0);
  const Trajectory tr = simulate(scalar(0.5), noise, u, 7, {.pin_initial_state = true});
  CHECK(tr.y()(0, 0) == doctest::Approx(0.0));
  CHECK(tr.y()(1, 0) == doctest::Approx(1.0));
  CHECK(tr.y()(2, 0) == doctest::Approx(0.5));
  REQUIRE(tr.x().has_value());
  CHECK(tr.x()->rows() == 4);
}

TEST_CASE("zero dynamics give pure observation noise") {
  const int T = 20000;
  const auto noise = NoiseSpec::isotropic(0.0, 0.7, 1);
  const Trajectory tr = simulate(scalar(0.0, 0.0), noise, MatrixXd::Zero(T, 1), 11);
  const VectorXd y = tr.y().col(0);
  const double var = (y.array() - y.mean()).square().sum() / (T - 1);
  CHECK(std::abs(var - 0.49) < 4 * 0.49 * std::sqrt(2.0 / T));
}

TEST_CASE("simulate is reproducible from the seed") {
  Rng rng = make_rng(3);
  const auto sys = testing::random_siso(3, rng);
  const auto noise = NoiseSpec::isotropic(0.3, 0.5, 3);
  const MatrixXd u = standard_normal_matrix(rng, 50, 1);
  const auto a = simulate(sys, noise, u, 99), b = simulate(sys, noise, u, 99);
  CHECK(a.y() == b.y());
  CHECK(*a.x() == *b.x());
}

TEST_CASE("markov parameters, hankel and transfer function") {
  CHECK(markov_parameter(scalar(0.5, 1, 2), 3)(0, 0) == doctest::Approx(0.5));
  CHECK(markov_parameter(scalar(0.5, 1, 2, 0.7), 0)(0, 0) == 0.7);
  MatrixXd H = hankel_matrix(scalar(0.5), 2, 2);
  CHECK(H(0, 0) == doctest::Approx(1.0));
  CHECK(H(0, 1) == doctest::Approx(0.5));
  CHECK(H(1, 1) == doctest::Approx(0.25));
  CHECK(transfer_function(scalar(0.5), {1.0, 0.0})(0, 0).real() == doctest::Approx(2.0));
  CHECK_THROWS_AS(transfer_function(scalar(0.5), {0.5, 0.0}), NearPoleError);

  Rng rng = make_rng(5);
  const auto sys = testing::random_siso(3, rng);
  // impulse response of a noiseless simulation
  MatrixXd u = MatrixXd::Zero(12, 1);
  u(0, 0) = 1.0;
  const auto tr = simulate(sys, NoiseSpec::isotropic(0.0, 1e-150, 3), u, 1, {.pin_initial_state = true});
  for (int t = 0; t < 12; ++t) {
    const double m = markov_parameter(sys, t)(0, 0);
    CHECK(std::abs(tr.y()(t, 0) - m) <= 1e-12 * std::max(1.0, std::abs(m)));
  }
  // series oracle at |z| = 2
  const std::complex<double> z = std::polar(2.0, 0.7);
  std::complex<double> series = sys.D()(0, 0);
  for (int t = 1; t <= 200; ++t) series += markov_parameter(sys, t)(0, 0) * std::pow(z, -t);
  CHECK(std::abs(transfer_function(sys, z)(0, 0) - series) < 1e-10 * std::abs(series));
  CHECK(std::abs(transfer_function(sys, {1e8, 0})(0, 0) - sys.D()(0, 0)) < 1e-6);

  const MatrixXd H3 = hankel_matrix(sys, 4, 4);
  Eigen::JacobiSVD<MatrixXd> svd(H3);
  CHECK(svd.singularValues()(3) < 1e-10 * svd.singularValues()(0));
  CHECK(numerical_rank(hankel_matrix(sys, 3, 3)) == 3);
}

TEST_CASE("eigenvalues and characteristic polynomial") {
  MatrixXd D = MatrixXd::Zero(2, 2);
  D.diagonal() << 0.3, -0.7;
  EigenSpectrum s = eigenvalues(D);
  CHECK(s[0].real() == doctest::Approx(-0.7));
  CHECK(s[1].real() == doctest::Approx(0.3));
  MatrixXd R(2, 2);
  R << 0, -0.5, 0.5, 0;
  s = eigenvalues(R);
  CHECK(s.real_count() == 0);
  CHECK(std::abs(s[0].imag()) == doctest::Approx(0.5));
  D.diagonal() << 0.5, 0.2;
  VectorXd a = char_poly(D);
  CHECK(a(0) == doctest::Approx(0.1));
  CHECK(a(1) == doctest::Approx(-0.7));

  Rng rng = make_rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd A = 0.3 * standard_normal_matrix(rng, 5, 5);
    const VectorXd cp = char_poly(A);
    CHECK((cp - faddeev_leverrier(A)).cwiseAbs().maxCoeff() < 1e-10);
    const EigenSpectrum spec = eigenvalues(A);
    for (const auto& lam : spec.values()) {
      std::complex<double> p = 1.0;
      for (int k = 4; k >= 0; --k) p = p * lam + cp(k);
      CHECK(std::abs(p) < 1e-8);
    }
  }
}

TEST_CASE("controllability, observability, minimality, stability") {
  MatrixXd A = MatrixXd::Zero(2, 2);
  A.diagonal() << 0.5, 0.2;
  const StateSpaceSystem unreachable(A, (MatrixXd(2, 1) << 1, 0).finished(),
                                     MatrixXd::Ones(1, 2), MatrixXd::Zero(1, 1));
  const auto rep = is_minimal(unreachable);
  CHECK_FALSE(rep.minimal);
  CHECK(rep.controllability_rank == 1);
  CHECK(rep.observability_rank == 2);
  CHECK(is_minimal(scalar(0.3)).minimal);
  const StateSpaceSystem blind(A, MatrixXd::Ones(2, 1), MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 1));
  CHECK(observability_matrix(blind).isZero());
  CHECK(numerical_rank(observability_matrix(blind)) == 0);

  A.diagonal() << 0.98, -0.9;
  CHECK(is_stable(A));
  CHECK_FALSE(is_stable(A, 0.1));
  CHECK_FALSE(is_stable(MatrixXd::Constant(1, 1, -1.5)));
}

TEST_CASE("gramians solve the Lyapunov equations") {
  CHECK(gramians(scalar(0.5)).controllability(0, 0) == doctest::Approx(4.0 / 3.0));
  Rng rng = make_rng(9);
  for (int n : {2, 4, 7}) {
    const auto sys = testing::random_siso(n, rng);
    const Gramians g = gramians(sys);
    const MatrixXd& W = g.controllability;
    CHECK((W - sys.A() * W * sys.A().transpose() - sys.B() * sys.B().transpose()).norm() < 1e-10);
    const MatrixXd& V = g.observability;
    CHECK((V - sys.A().transpose() * V * sys.A() - sys.C().transpose() * sys.C()).norm() < 1e-10);
  }
  // larger than the Kronecker cut-off exercises the doubling iteration
  MatrixXd A = 0.2 * standard_normal_matrix(rng, 14, 14);
  const MatrixXd Q = MatrixXd::Identity(14, 14);
  if (is_stable(A)) {
    const MatrixXd W = solve_discrete_lyapunov(A, Q);
    CHECK((W - A * W * A.transpose() - Q).norm() < 1e-9);
  }
  CHECK_THROWS_AS(solve_discrete_lyapunov(MatrixXd::Constant(1, 1, 1.1), Q.topLeftCorner(1, 1)),
                  NumericalError);
}

TEST_CASE("similarity transforms") {
  Rng rng = make_rng(10);
  const auto sys = testing::random_siso(3, rng);
  const auto noise = NoiseSpec::isotropic(0.3, 0.5, 3);
  auto [same, same_noise] = apply_similarity(sys, noise, MatrixXd::Identity(3, 3));
  CHECK(same.A().isApprox(sys.A()));
  CHECK(same_noise.state_cov().isApprox(noise.state_cov()));
  const StateSpaceSystem doubled = apply_similarity(sys, 2.0 * MatrixXd::Identity(3, 3));
  CHECK(doubled.A().isApprox(sys.A()));
  CHECK(doubled.B().isApprox(0.5 * sys.B()));
  CHECK(doubled.C().isApprox(2.0 * sys.C()));
  const MatrixXd T = testing::random_similarity(rng, 3);
  CHECK(testing::max_rel_diff(hankel_matrix(apply_similarity(sys, T), 4, 4), hankel_matrix(sys, 4, 4)) <
        1e-10);
  CHECK_THROWS_AS(apply_similarity(sys, MatrixXd::Zero(3, 3)), NumericalError);
}
