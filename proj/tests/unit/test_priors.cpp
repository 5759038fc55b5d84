#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "canon_lti/errors.hpp"
#include "canon_lti/posterior.hpp"
#include "canon_lti/priors.hpp"
#include "helpers.hpp"

using namespace canon_lti;

TEST_CASE("root-space densities") {
  const EigenSpectrum real_pair({{0.5, 0}, {-0.5, 0}});
  CHECK(log_prior_eigen(EigenPriorSpec::uniform_real(2), real_pair) == doctest::Approx(2 * std::log(0.5)));
  const EigenSpectrum cplx({{0.4, -0.3}, {0.4, 0.3}});
  CHECK(log_prior_eigen(EigenPriorSpec::uniform_stable_coeffs(2), cplx) ==
        doctest::Approx(std::log(1.0 / (3.0 * std::numbers::pi))));
  const EigenSpectrum outside({{1.2, 0}, {0.1, 0}});
  for (auto spec : {EigenPriorSpec::uniform_real(2), EigenPriorSpec::restricted_real(2),
                    EigenPriorSpec::polar_uniform(2), EigenPriorSpec::uniform_stable_coeffs(2)})
    CHECK(log_prior_eigen(spec, outside) == -std::numeric_limits<double>::infinity());
  CHECK(log_prior_eigen(EigenPriorSpec::restricted_real(2), real_pair) ==
        -std::numeric_limits<double>::infinity());
  CHECK_THROWS(EigenPriorSpec::restricted_real(2, 0.5, 0.2).validate());
}

TEST_CASE("coefficient densities on the stability triangle") {
  const auto spec = EigenPriorSpec::uniform_stable_coeffs(2);
  CHECK(log_prior_coeffs(spec, (VectorXd(2) << 0.1, -0.7).finished()) == doctest::Approx(std::log(0.25)));
  CHECK(log_prior_coeffs(spec, (VectorXd(2) << 0.5, 1.6).finished()) ==
        -std::numeric_limits<double>::infinity());

  // The triangle has area 4; its real-root part (below the parabola a1^2 = 4 a0)
  // has area 4/3.
  using boost::math::quadrature::gauss_kronrod;
  const double real_area = gauss_kronrod<double, 31>::integrate(
      [](double a1) { return a1 * a1 / 4.0 - (std::abs(a1) - 1.0); }, -2.0, 2.0);
  CHECK(real_area == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("uniform-real pushforward integrates to one") {
  // Real roots in (-1,1) <=> |a1| - 1 < a0 < a1^2/4. The density has an
  // inverse-square-root singularity on the parabola; a0 = a1^2/4 - s^2 removes it.
  const auto spec = EigenPriorSpec::uniform_real(2);
  using boost::math::quadrature::gauss_kronrod;
  auto inner = [&](double a1) {
    const double lo = std::abs(a1) - 1.0, hi = a1 * a1 / 4.0;
    if (!(hi > lo)) return 0.0;
    return gauss_kronrod<double, 61>::integrate(
        [&](double s) {
          const VectorXd a = (VectorXd(2) << hi - s * s, a1).finished();
          try {
            return 2.0 * s * std::exp(log_prior_coeffs(spec, a));
          } catch (const DegenerateSpectrumError&) {
            return 0.0;  // within 1e-8 of the parabola; negligible mass
          }
        },
        0.0, std::sqrt(hi - lo), 10, 1e-10);
  };
  const double total = gauss_kronrod<double, 61>::integrate(inner, -2.0, 0.0, 10, 1e-9) +
                       gauss_kronrod<double, 61>::integrate(inner, 0.0, 2.0, 10, 1e-9);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sampling") {
  Rng rng = make_rng(12);
  for (int i = 0; i < 2000; ++i) {
    const auto r = sample_eigen_prior(EigenPriorSpec::restricted_real(3), rng);
    CHECK(r.real_count() == 3);
    for (const auto& z : r.values()) CHECK((z.real() > 0.0 && z.real() <= 0.9));
  }
  const int N = 100000;
  double rho2 = 0.0;
  int pairs = 0;
  for (int i = 0; i < N; ++i) {
    const auto r = sample_eigen_prior(EigenPriorSpec::polar_uniform(2, {1.0, 0.0, 0.0}), rng);
    rho2 += std::norm(r[0]);
    ++pairs;
  }
  CHECK(std::abs(rho2 / pairs - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / pairs));

  // exact real fraction of the uniform stable-coefficient law is (4/3)/4
  int real = 0;
  const int M = 200000;
  for (int i = 0; i < M; ++i)
    real += sample_eigen_prior(EigenPriorSpec::uniform_stable_coeffs(2), rng).real_count() == 2;
  const double p = 1.0 / 3.0;
  CHECK(std::abs(static_cast<double>(real) / M - p) < 4.0 * std::sqrt(p * (1 - p) / M));

  for (int i = 0; i < 1000; ++i) CHECK(schur_stable(sample_stable_coeffs(4, rng)));
  const auto w = estimate_real_count_weights(3, 20000, rng);
  CHECK(w[0] == 0.0);
  CHECK(w[2] == 0.0);
  CHECK(w[1] + w[3] == doctest::Approx(1.0));
}

TEST_CASE("Vandermonde gradient matches finite differences") {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto roots = sample_eigen_prior(EigenPriorSpec::polar_uniform(4), rng);
    bool separated = true;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) separated &= std::abs(roots[i] - roots[j]) > 0.1;
    if (!separated) continue;
    const VectorXd a = vieta_forward(roots);
    const VectorXd fd = fd_gradient(
        [](const VectorXd& x) { return vandermonde_log_abs_det(vieta_inverse(x)); }, a, 1e-6);
    CHECK((grad_log_vandermonde(a) - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("noise-scale priors") {
  const NoisePrior hc{NoisePriorKind::HalfCauchy, 1.0};
  CHECK(log_prior_noise_scale(hc, 0.0) == doctest::Approx(std::log(2.0 / std::numbers::pi) - std::log(2.0)));
  const NoisePrior hn{NoisePriorKind::HalfNormal, 0.7};
  for (const auto& p : {hc, hn})
    for (double l : {-2.0, 0.0, 1.3}) {
      const double h = 1e-6;
      const double fd = (log_prior_noise_scale(p, l + h) - log_prior_noise_scale(p, l - h)) / (2 * h);
      CHECK(grad_log_prior_noise_scale(p, l) == doctest::Approx(fd).epsilon(1e-7));
    }
  // integrates to one in sigma
  using boost::math::quadrature::tanh_sinh;
  tanh_sinh<double> q;
  for (const auto& p : {hc, hn}) {
    const double total = q.integrate([&](double s) { return std::exp(log_prior_noise_scale(p, std::log(s))) / s; },
                                     0.0, std::numeric_limits<double>::infinity());
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  }
}
