#include "canon_lti/posterior.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "canon_lti/errors.hpp"
#include "canon_lti/likelihood.hpp"

namespace canon_lti {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal(double x, double sd) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * (x / sd) * (x / sd);
}

void check_layout(const ParamLayout& layout, const VectorXd& theta) {
  if (theta.size() != layout.dim())
    throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                         ", layout expects " + std::to_string(layout.dim()));
}

double noise_terms(const ParamPriorSpec& spec, const ParamLayout& layout, const VectorXd& theta) {
  double lp = 0.0;
  if (layout.infer_sigma_state)
    lp += log_prior_noise_scale(spec.noise, theta(layout.log_sigma_state_offset()));
  if (layout.infer_sigma_obs)
    lp += log_prior_noise_scale(spec.noise, theta(layout.log_sigma_obs_offset()));
  return lp;
}

}  // namespace

double log_prior_full(const ParamPriorSpec& spec, const ParamLayout& layout, const VectorXd& theta) {
  check_layout(layout, theta);
  if (!theta.allFinite()) return kNegInf;
  double lp = 0.0;
  if (layout.mode == ParamMode::Canonical) {
    const int n = layout.state_dim;
    if (spec.eigen.n != n)
      throw DimensionError("log_prior_full: eigen prior size does not match the layout");
    lp = log_prior_coeffs(spec.eigen, theta.head(n));
    if (lp == kNegInf) return kNegInf;
    for (int i = 0; i < n; ++i) lp += log_normal(theta(n + i), spec.b_std);
    if (layout.include_feedthrough) lp += log_normal(theta(layout.d0_offset()), spec.d0_std);
  } else {
    for (int i = 0; i < layout.dynamic_dim(); ++i) lp += log_normal(theta(i), 1.0);
  }
  return lp + noise_terms(spec, layout, theta);
}

VectorXd grad_log_prior_full(const ParamPriorSpec& spec, const ParamLayout& layout,
                             const VectorXd& theta) {
  check_layout(layout, theta);
  VectorXd g = VectorXd::Zero(theta.size());
  if (layout.mode == ParamMode::Canonical) {
    const int n = layout.state_dim;
    g.head(n) = grad_log_prior_coeffs(spec.eigen, theta.head(n));
    g.segment(n, n) = -theta.segment(n, n) / (spec.b_std * spec.b_std);
    if (layout.include_feedthrough)
      g(layout.d0_offset()) = -theta(layout.d0_offset()) / (spec.d0_std * spec.d0_std);
  } else {
    g.head(layout.dynamic_dim()) = -theta.head(layout.dynamic_dim());
  }
  if (layout.infer_sigma_state)
    g(layout.log_sigma_state_offset()) =
        grad_log_prior_noise_scale(spec.noise, theta(layout.log_sigma_state_offset()));
  if (layout.infer_sigma_obs)
    g(layout.log_sigma_obs_offset()) =
        grad_log_prior_noise_scale(spec.noise, theta(layout.log_sigma_obs_offset()));
  return g;
}

Posterior::Posterior(ParamLayout layout, ParamPriorSpec prior, Trajectory traj)
    : layout_(std::move(layout)), prior_(std::move(prior)), traj_(std::move(traj)) {
  layout_.validate();
  prior_.validate();
  if (layout_.mode == ParamMode::Canonical && prior_.eigen.n != layout_.state_dim)
    throw DimensionError("Posterior: eigen prior size does not match the state dimension");
  if (layout_.infer_sigma_state != prior_.infer_sigma_state ||
      layout_.infer_sigma_obs != prior_.infer_sigma_obs)
    throw std::invalid_argument("Posterior: layout and prior disagree on inferred noise scales");
  if (traj_.u().cols() != layout_.input_dim || traj_.y().cols() != layout_.output_dim)
    throw DimensionError("Posterior: trajectory does not match the layout dimensions");
}

double Posterior::log_prior(const VectorXd& theta) const {
  try {
    return log_prior_full(prior_, layout_, theta);
  } catch (const NumericalError&) {
    ++failures_;
    return kNegInf;
  }
}

double Posterior::log_likelihood(const VectorXd& theta) const {
  try {
    const DecodedParams d = decode(layout_, theta);
    const double ll = kalman_loglik(d.system, d.noise, traj_);
    return std::isfinite(ll) ? ll : kNegInf;
  } catch (const NumericalError&) {
    ++failures_;
    return kNegInf;
  }
}

double Posterior::log_posterior(const VectorXd& theta) const {
  const double lp = log_prior(theta);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(theta);
}

double Posterior::log_posterior(const VectorXd& theta, VectorXd& grad) const {
  const double lp = log_prior(theta);
  if (lp == kNegInf) return kNegInf;
  try {
    const DecodedParams d = decode(layout_, theta);
    const LoglikGradient lg =
        kalman_loglik_gradient(d.system, d.noise, traj_, model_derivatives(layout_, theta));
    if (!std::isfinite(lg.loglik) || !lg.grad.allFinite()) return kNegInf;
    grad = lg.grad + grad_log_prior_full(prior_, layout_, theta);
    return lp + lg.loglik;
  } catch (const NumericalError&) {
    ++failures_;
    return kNegInf;
  }
}

LogDensityFn Posterior::as_function() const {
  return [this](const VectorXd& theta, VectorXd& grad) { return log_posterior(theta, grad); };
}

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + hi;
    xm(i) = x(i) - hi;
    g(i) = (f(xp) - f(xm)) / (2.0 * hi);
    xp(i) = xm(i) = x(i);
  }
  return g;
}

MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  const auto d = x.size();
  MatrixXd H(d, d);
  VectorXd hs(d);
  for (Eigen::Index i = 0; i < d; ++i) hs(i) = h * std::max(1.0, std::abs(x(i)));
  const double f0 = f(x);
  VectorXd z = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    z(i) = x(i) + hs(i);
    const double fp = f(z);
    z(i) = x(i) - hs(i);
    const double fm = f(z);
    z(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (hs(i) * hs(i));
    for (Eigen::Index j = i + 1; j < d; ++j) {
      double acc = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          z(i) = x(i) + si * hs(i);
          z(j) = x(j) + sj * hs(j);
          acc += si * sj * f(z);
        }
      z(i) = x(i);
      z(j) = x(j);
      H(i, j) = H(j, i) = acc / (4.0 * hs(i) * hs(j));
    }
  }
  return H;
}

MatrixXd fd_hessian_from_gradient(const std::function<VectorXd(const VectorXd&)>& grad,
                                  const VectorXd& x, double h) {
  const auto d = x.size();
  MatrixXd H(d, d);
  VectorXd z = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double hi = h * std::max(1.0, std::abs(x(i)));
    z(i) = x(i) + hi;
    const VectorXd gp = grad(z);
    z(i) = x(i) - hi;
    const VectorXd gm = grad(z);
    z(i) = x(i);
    H.col(i) = (gp - gm) / (2.0 * hi);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace canon_lti
