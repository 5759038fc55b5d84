#pragma once

#include <atomic>
#include <functional>

#include <Eigen/Dense>

#include "canon_lti/lti_core.hpp"
#include "canon_lti/params.hpp"
#include "canon_lti/priors.hpp"

namespace canon_lti {

/// log p(theta) for the layout: the coefficient prior plus Gaussian terms on
/// b and d0 in canonical mode, iid N(0, 1) on every matrix entry in standard
/// mode, and the noise-scale prior (with log Jacobian) for inferred scales.
double log_prior_full(const ParamPriorSpec& spec, const ParamLayout& layout, const VectorXd& theta);

/// Gradient of log_prior_full; only valid where it is finite.
VectorXd grad_log_prior_full(const ParamPriorSpec& spec, const ParamLayout& layout,
                             const VectorXd& theta);

/// Log density with gradient, the interface the sampler works against.
/// Returns -inf (gradient left unspecified) outside the support.
using LogDensityFn = std::function<double(const VectorXd& theta, VectorXd& grad)>;

class Posterior {
 public:
  Posterior(ParamLayout layout, ParamPriorSpec prior, Trajectory traj);

  const ParamLayout& layout() const { return layout_; }
  const ParamPriorSpec& prior() const { return prior_; }
  const Trajectory& trajectory() const { return traj_; }
  int dim() const { return layout_.dim(); }

  double log_prior(const VectorXd& theta) const;
  double log_likelihood(const VectorXd& theta) const;

  /// -inf short-circuits the likelihood. Coincident roots and filter failures
  /// map to -inf and are counted.
  double log_posterior(const VectorXd& theta) const;
  double log_posterior(const VectorXd& theta, VectorXd& grad) const;

  LogDensityFn as_function() const;

  /// Evaluations mapped to -inf because of a numerical exception.
  long numerical_failures() const { return failures_.load(); }

 private:
  ParamLayout layout_;
  ParamPriorSpec prior_;
  Trajectory traj_;
  mutable std::atomic<long> failures_{0};
};

/// Central finite differences with step h * max(1, |theta_i|).
VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                     double h = 1e-6);

/// Central second differences of function values, step h * max(1, |theta_i|).
MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                    double h = 1e-4);

/// Central differences of an analytic gradient, symmetrized.
MatrixXd fd_hessian_from_gradient(const std::function<VectorXd(const VectorXd&)>& grad,
                                  const VectorXd& x, double h = 1e-5);

}  // namespace canon_lti
