#include <doctest.h>

#include <algorithm>

#include "canon_lti/canonical.hpp"
#include "canon_lti/errors.hpp"
#include "helpers.hpp"

using namespace canon_lti;

namespace {

bool same_roots(const EigenSpectrum& a, const EigenSpectrum& b, double tol) {
  if (a.size() != b.size()) return false;
  std::vector<bool> used(static_cast<size_t>(b.size()), false);
  for (const auto& z : a.values()) {
    bool hit = false;
    for (int j = 0; j < b.size() && !hit; ++j)
      if (!used[static_cast<size_t>(j)] && std::abs(z - b[j]) < tol) hit = used[static_cast<size_t>(j)] = true;
    if (!hit) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("controller form template") {
  const CanonicalSiso c((VectorXd(2) << 0.1, -0.7).finished(), (VectorXd(2) << 1, 0).finished());
  const StateSpaceSystem s = canonical_to_statespace(c);
  MatrixXd A(2, 2);
  A << 0, 1, -0.1, 0.7;
  CHECK(s.A().isApprox(A));
  CHECK(s.B()(0, 0) == 0.0);
  CHECK(s.B()(1, 0) == 1.0);
  CHECK(s.C()(0, 0) == 1.0);
  CHECK(s.C()(0, 1) == 0.0);
  CHECK(same_roots(eigenvalues(s.A()), vieta_inverse(c.a), 1e-12));

  Rng rng = make_rng(1);
  for (int i = 0; i < 100; ++i) {
    const CanonicalSiso r(standard_normal_vector(rng, 4), standard_normal_vector(rng, 4));
    CHECK(numerical_rank(controllability_matrix(canonical_to_statespace(r))) == 4);
  }
}

TEST_CASE("observer form carries the Markov parameters") {
  Rng rng = make_rng(2);
  const auto sys = testing::random_siso(3, rng);
  const auto [obs, w] = to_observer_form(sys);
  for (int t = 1; t <= 3; ++t)
    CHECK(obs.b(t - 1) == doctest::Approx(markov_parameter(sys, t)(0, 0)).epsilon(1e-9));
  const StateSpaceSystem back = canonical_to_statespace(obs);
  CHECK(back.C()(0, 0) == 1.0);
  for (int t = 0; t <= 10; ++t)
    CHECK(std::abs(markov_parameter(back, t)(0, 0) - markov_parameter(sys, t)(0, 0)) < 1e-8);
}

TEST_CASE("to_controller_form fixed point and round trip") {
  const CanonicalSiso c((VectorXd(3) << 0.05, -0.2, 0.3).finished(),
                        (VectorXd(3) << 1.0, -0.5, 0.25).finished(), 0.4);
  const auto [same, w] = to_controller_form(canonical_to_statespace(c));
  CHECK((same.a - c.a).norm() < 1e-10);
  CHECK((same.b - c.b).norm() < 1e-10);
  CHECK(same.d0 == doctest::Approx(0.4));
  CHECK((w.T - MatrixXd::Identity(3, 3)).norm() < 1e-10);

  Rng rng = make_rng(3);
  for (int i = 0; i < 20; ++i) {
    const MatrixXd T = testing::random_similarity(rng, 3);
    const auto [rec, wit] = to_controller_form(apply_similarity(canonical_to_statespace(c), T));
    CHECK((rec.a - c.a).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((rec.b - c.b).cwiseAbs().maxCoeff() < 1e-7);
    // the witness maps the input realization onto the canonical one
    const StateSpaceSystem mapped = apply_similarity(apply_similarity(canonical_to_statespace(c), T), wit.T_inv);
    CHECK(testing::max_rel_diff(mapped.A(), canonical_to_statespace(rec).A()) < 1e-8);
  }
  const auto sys = testing::random_siso(3, rng);
  const auto [cf, wit] = to_controller_form(sys);
  for (int t = 0; t <= 10; ++t)
    CHECK(std::abs(markov_parameter(canonical_to_statespace(cf), t)(0, 0) - markov_parameter(sys, t)(0, 0)) <
          1e-8 * std::max(1.0, std::abs(markov_parameter(sys, t)(0, 0))));

  MatrixXd A = MatrixXd::Zero(2, 2);
  A.diagonal() << 0.5, 0.2;
  const StateSpaceSystem unreachable(A, (MatrixXd(2, 1) << 1, 0).finished(), MatrixXd::Ones(1, 2),
                                     MatrixXd::Zero(1, 1));
  CHECK_THROWS_AS(to_controller_form(unreachable), NotControllableError);
}

TEST_CASE("Vieta maps") {
  VectorXd a = vieta_forward(EigenSpectrum({{0.5, 0}, {0.2, 0}}));
  CHECK(a(0) == doctest::Approx(0.1));
  CHECK(a(1) == doctest::Approx(-0.7));
  const auto z = std::polar(0.8, std::numbers::pi / 3);
  a = vieta_forward(EigenSpectrum({z, std::conj(z)}));
  CHECK(a(0) == doctest::Approx(0.64));
  CHECK(a(1) == doctest::Approx(-0.8));
  CHECK_THROWS(vieta_forward(EigenSpectrum({z, {0.1, 0}})));

  EigenSpectrum r = vieta_inverse((VectorXd(2) << 0.1, -0.7).finished());
  CHECK(r[0].real() == doctest::Approx(0.2));
  CHECK(r[1].real() == doctest::Approx(0.5));
  r = vieta_inverse((VectorXd(2) << 0.25, 0.0).finished());
  CHECK(r.real_count() == 0);
  CHECK(std::abs(r[0]) == doctest::Approx(0.5));

  Rng rng = make_rng(4);
  for (int i = 0; i < 200; ++i) {
    const VectorXd c = (VectorXd(2) << 4 * std::uniform_real_distribution<>(-0.5, 0.5)(rng),
                        std::uniform_real_distribution<>(-3, 3)(rng))
                           .finished();
    const bool triangle = std::abs(c(0)) < 1 && std::abs(c(1)) < 1 + c(0);
    CHECK(triangle == (vieta_inverse(c).spectral_radius() < 1.0));
    CHECK(triangle == schur_stable(c));
  }
}

TEST_CASE("Vandermonde determinant") {
  CHECK(vandermonde_log_abs_det(EigenSpectrum({{0.5, 0}, {0.2, 0}})) == doctest::Approx(std::log(0.3)));
  CHECK(std::abs(vandermonde_log_abs_det(EigenSpectrum({{0.5, 0}, {-0.5, 0}}))) < 1e-14);
  CHECK_THROWS_AS(vandermonde_log_abs_det(EigenSpectrum({{0.5, 0}, {0.5, 0}})), DegenerateSpectrumError);
}

TEST_CASE("statistical isomorphism") {
  Rng rng = make_rng(5);
  const auto sys = testing::random_siso(3, rng);
  const auto noise = NoiseSpec::isotropic(0.3, 0.5, 3);
  const auto [sys2, noise2] = apply_similarity(sys, noise, testing::random_similarity(rng, 3));
  CHECK(check_statistical_isomorphism(sys, noise, sys2, noise2));

  auto [c, w] = to_controller_form(sys);
  c.a(0) += 0.1;
  CHECK_FALSE(check_statistical_isomorphism(sys, noise, canonical_to_statespace(c), noise2));
  const NoiseSpec louder(noise2.state_cov(), 4.0 * noise2.obs_cov(), noise2.initial_cov());
  CHECK_FALSE(check_statistical_isomorphism(sys, noise, sys2, louder));
}
