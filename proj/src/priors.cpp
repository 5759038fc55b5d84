#include "canon_lti/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "canon_lti/canonical.hpp"
#include "canon_lti/errors.hpp"

namespace canon_lti {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int pair_count(const EigenSpectrum& roots) { return (roots.size() - roots.real_count()) / 2; }

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<double> normalized_real_count_weights(const EigenPriorSpec& spec) {
  std::vector<double> w(static_cast<size_t>(spec.n + 1), 0.0);
  if (spec.real_count_weights.empty()) {
    int admissible = 0;
    for (int r = spec.n % 2; r <= spec.n; r += 2) ++admissible;
    for (int r = spec.n % 2; r <= spec.n; r += 2) w[static_cast<size_t>(r)] = 1.0 / admissible;
    return w;
  }
  double total = 0.0;
  for (double v : spec.real_count_weights) total += v;
  for (size_t r = 0; r < w.size(); ++r) w[r] = spec.real_count_weights[r] / total;
  return w;
}

}  // namespace

EigenPriorSpec EigenPriorSpec::restricted_real(int n, double lo, double hi) {
  EigenPriorSpec s;
  s.kind = EigenPriorKind::RestrictedReal;
  s.n = n;
  s.lo = lo;
  s.hi = hi;
  s.validate();
  return s;
}

EigenPriorSpec EigenPriorSpec::uniform_real(int n) {
  EigenPriorSpec s;
  s.kind = EigenPriorKind::UniformReal;
  s.n = n;
  s.validate();
  return s;
}

EigenPriorSpec EigenPriorSpec::polar_uniform(int n, std::vector<double> weights) {
  EigenPriorSpec s;
  s.kind = EigenPriorKind::PolarUniform;
  s.n = n;
  s.real_count_weights = std::move(weights);
  s.validate();
  return s;
}

EigenPriorSpec EigenPriorSpec::uniform_stable_coeffs(int n) {
  EigenPriorSpec s;
  s.kind = EigenPriorKind::UniformStableCoeffs;
  s.n = n;
  s.validate();
  return s;
}

void EigenPriorSpec::validate() const {
  if (n < 1) throw std::invalid_argument("EigenPriorSpec: n must be >= 1");
  if (kind == EigenPriorKind::RestrictedReal && !(-1.0 <= lo && lo < hi && hi <= 1.0))
    throw std::invalid_argument("EigenPriorSpec: RestrictedReal needs -1 <= lo < hi <= 1");
  if (kind == EigenPriorKind::PolarUniform && !real_count_weights.empty()) {
    if (real_count_weights.size() != static_cast<size_t>(n + 1))
      throw std::invalid_argument("EigenPriorSpec: real_count_weights must have n+1 entries");
    double total = 0.0;
    for (size_t r = 0; r < real_count_weights.size(); ++r) {
      const double v = real_count_weights[r];
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("EigenPriorSpec: weights must be finite and >= 0");
      if (v > 0.0 && (static_cast<int>(r) % 2) != (n % 2))
        throw std::invalid_argument("EigenPriorSpec: weight on a real-root count of wrong parity");
      total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("EigenPriorSpec: weights sum to zero");
  }
}

void ParamPriorSpec::validate() const {
  eigen.validate();
  if (!(b_std > 0.0) || !(d0_std > 0.0))
    throw std::invalid_argument("ParamPriorSpec: b_std and d0_std must be > 0");
  if (noise.kind != NoisePriorKind::Fixed && !(noise.scale > 0.0))
    throw std::invalid_argument("ParamPriorSpec: noise prior scale must be > 0");
  if (noise.kind == NoisePriorKind::Fixed && (infer_sigma_state || infer_sigma_obs))
    throw std::invalid_argument("ParamPriorSpec: a Fixed noise prior cannot be inferred");
}

double log_prior_eigen(const EigenPriorSpec& spec, const EigenSpectrum& roots) {
  if (roots.size() != spec.n)
    throw DimensionError("log_prior_eigen: spectrum size " + std::to_string(roots.size()) +
                         " does not match n = " + std::to_string(spec.n));
  if (spec.kind == EigenPriorKind::UniformStableCoeffs && spec.n != 2)
    throw std::invalid_argument(
        "log_prior_eigen: UniformStableCoeffs has a root-space density only for n = 2; "
        "use log_prior_coeffs");
  if (!(roots.spectral_radius() < 1.0)) return kNegInf;
  const int r = roots.real_count();
  const int m = pair_count(roots);

  switch (spec.kind) {
    case EigenPriorKind::UniformReal:
      if (r != spec.n) return kNegInf;
      return spec.n * std::log(0.5);
    case EigenPriorKind::RestrictedReal:
      if (r != spec.n) return kNegInf;
      for (const auto& z : roots.values())
        if (!(z.real() > spec.lo && z.real() <= spec.hi)) return kNegInf;
      return -spec.n * std::log(spec.hi - spec.lo);
    case EigenPriorKind::PolarUniform: {
      const double w = normalized_real_count_weights(spec)[static_cast<size_t>(r)];
      if (!(w > 0.0)) return kNegInf;
      return std::log(w) + r * std::log(0.5) + m * std::log(2.0 / std::numbers::pi);
    }
    case EigenPriorKind::UniformStableCoeffs:
      if (r == 2) return std::log(2.0 / 3.0 * 0.25);
      return std::log(1.0 / 3.0 / std::numbers::pi);
  }
  return kNegInf;
}

double log_prior_coeffs(const EigenPriorSpec& spec, const VectorXd& a) {
  if (a.size() != spec.n)
    throw DimensionError("log_prior_coeffs: expected " + std::to_string(spec.n) +
                         " coefficients, got " + std::to_string(a.size()));
  if (!a.allFinite()) return kNegInf;

  if (spec.kind == EigenPriorKind::UniformStableCoeffs) {
    if (spec.n == 1) return std::abs(a(0)) < 1.0 ? std::log(0.5) : kNegInf;
    if (spec.n == 2)
      return (std::abs(a(0)) < 1.0 && std::abs(a(1)) < 1.0 + a(0)) ? std::log(0.25) : kNegInf;
    return vieta_inverse(a).spectral_radius() < 1.0 ? 0.0 : kNegInf;
  }

  const EigenSpectrum roots = vieta_inverse(a);
  const double le = log_prior_eigen(spec, roots);
  if (le == kNegInf) return kNegInf;
  const int r = roots.real_count();
  const int m = pair_count(roots);
  return le + std::lgamma(r + 1.0) + std::lgamma(m + 1.0) - m * std::log(2.0) -
         vandermonde_log_abs_det(roots);
}

VectorXd grad_log_vandermonde(const VectorXd& a) {
  const int n = static_cast<int>(a.size());
  const EigenSpectrum roots = vieta_inverse(a);
  using cd = std::complex<double>;
  // d lambda_i / d a_k = -lambda_i^k / p'(lambda_i), p'(lambda_i) = prod_{j != i} (lambda_i - lambda_j).
  std::vector<std::vector<cd>> dl(static_cast<size_t>(n), std::vector<cd>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i) {
    cd dp = 1.0;
    for (int j = 0; j < n; ++j)
      if (j != i) dp *= roots[i] - roots[j];
    if (std::abs(dp) < kRootCoincidenceTol)
      throw DegenerateSpectrumError("grad_log_vandermonde: near-coincident roots", std::abs(dp));
    cd power = 1.0;
    for (int k = 0; k < n; ++k) {
      dl[static_cast<size_t>(i)][static_cast<size_t>(k)] = -power / dp;
      power *= roots[i];
    }
  }
  VectorXd g = VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        s += ((dl[static_cast<size_t>(i)][static_cast<size_t>(k)] -
               dl[static_cast<size_t>(j)][static_cast<size_t>(k)]) /
              (roots[i] - roots[j]))
                 .real();
    g(k) = s;
  }
  return g;
}

VectorXd grad_log_prior_coeffs(const EigenPriorSpec& spec, const VectorXd& a) {
  if (spec.kind == EigenPriorKind::UniformStableCoeffs) return VectorXd::Zero(a.size());
  return -grad_log_vandermonde(a);
}

bool schur_stable(const VectorXd& a) {
  const auto n = a.size();
  // c holds the polynomial coefficients, lowest degree first.
  std::vector<double> c(static_cast<size_t>(n + 1));
  for (Eigen::Index k = 0; k < n; ++k) c[static_cast<size_t>(k)] = a(k);
  c[static_cast<size_t>(n)] = 1.0;
  for (auto m = static_cast<size_t>(n); m >= 1; --m) {
    if (!std::isfinite(c[0]) || !std::isfinite(c[m]) || c[m] == 0.0) return false;
    const double k = c[0] / c[m];
    if (!(std::abs(k) < 1.0)) return false;
    std::vector<double> next(m);
    for (size_t j = 0; j < m; ++j) next[j] = c[m] * c[j + 1] - c[0] * c[m - j - 1];
    c = std::move(next);
  }
  return true;
}

VectorXd sample_stable_coeffs(int n, Rng& rng, long max_tries) {
  if (n < 1) throw std::invalid_argument("sample_stable_coeffs: n must be >= 1");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  VectorXd a(n);
  for (long tries = 0; tries < max_tries; ++tries) {
    for (int k = 0; k < n; ++k) a(k) = binomial(n, k) * unit(rng);
    if (schur_stable(a)) return a;
  }
  throw NumericalError("sample_stable_coeffs: rejection budget exhausted");
}

EigenSpectrum sample_eigen_prior(const EigenPriorSpec& spec, Rng& rng, long max_tries) {
  spec.validate();
  std::vector<std::complex<double>> roots;
  roots.reserve(static_cast<size_t>(spec.n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (spec.kind) {
    case EigenPriorKind::RestrictedReal: {
      std::uniform_real_distribution<double> d(spec.lo, spec.hi);
      for (int i = 0; i < spec.n; ++i) roots.emplace_back(d(rng), 0.0);
      break;
    }
    case EigenPriorKind::UniformReal: {
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (int i = 0; i < spec.n; ++i) roots.emplace_back(d(rng), 0.0);
      break;
    }
    case EigenPriorKind::PolarUniform: {
      const auto w = normalized_real_count_weights(spec);
      std::discrete_distribution<int> pick(w.begin(), w.end());
      const int r = pick(rng);
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (int i = 0; i < r; ++i) roots.emplace_back(d(rng), 0.0);
      for (int i = 0; i < (spec.n - r) / 2; ++i) {
        const double rho = std::sqrt(unit(rng));
        const double theta = std::numbers::pi * unit(rng);
        const auto z = std::polar(rho, theta);
        roots.push_back(z);
        roots.push_back(std::conj(z));
      }
      break;
    }
    case EigenPriorKind::UniformStableCoeffs:
      return vieta_inverse(sample_stable_coeffs(spec.n, rng, max_tries));
  }
  return EigenSpectrum(std::move(roots));
}

EigenSpectrum sample_eigen_prior(const EigenPriorSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_eigen_prior(spec, rng);
}

std::vector<double> estimate_real_count_weights(int n, long draws, Rng& rng) {
  if (draws < 1) throw std::invalid_argument("estimate_real_count_weights: draws must be >= 1");
  std::vector<double> counts(static_cast<size_t>(n + 1), 0.0);
  for (long i = 0; i < draws; ++i)
    counts[static_cast<size_t>(vieta_inverse(sample_stable_coeffs(n, rng)).real_count())] += 1.0;
  for (double& c : counts) c /= static_cast<double>(draws);
  return counts;
}

double log_prior_noise_scale(const NoisePrior& prior, double log_sigma) {
  const double sigma = std::exp(log_sigma);
  const double s = prior.scale;
  switch (prior.kind) {
    case NoisePriorKind::HalfCauchy:
      return std::log(2.0 / (std::numbers::pi * s)) - std::log1p((sigma / s) * (sigma / s)) +
             log_sigma;
    case NoisePriorKind::HalfNormal:
      return std::log(2.0 / s) - 0.5 * std::log(2.0 * std::numbers::pi) -
             0.5 * (sigma / s) * (sigma / s) + log_sigma;
    case NoisePriorKind::Fixed:
      return 0.0;
  }
  return 0.0;
}

double grad_log_prior_noise_scale(const NoisePrior& prior, double log_sigma) {
  const double sigma = std::exp(log_sigma);
  const double s = prior.scale;
  switch (prior.kind) {
    case NoisePriorKind::HalfCauchy:
      return 1.0 - 2.0 * sigma * sigma / (s * s + sigma * sigma);
    case NoisePriorKind::HalfNormal:
      return 1.0 - sigma * sigma / (s * s);
    case NoisePriorKind::Fixed:
      return 0.0;
  }
  return 0.0;
}

}  // namespace canon_lti
