#pragma once

// No-U-Turn sampler with multinomial trajectory sampling, a diagonal or dense
// metric, dual-averaging step-size adaptation and windowed metric adaptation.

#include <vector>

#include <Eigen/Dense>

#include "canon_lti/posterior.hpp"
#include "canon_lti/random.hpp"

namespace canon_lti {

struct NutsConfig {
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double max_delta_h = 1000.0;  // energy error that marks a divergence
  double init_step_size = 1.0;
  // Warm-up windows (shrunk proportionally when the warm-up is short).
  int init_buffer = 75;
  int term_buffer = 50;
  int base_window = 25;
  // Full covariance metric instead of per-coordinate variances. Worth it when
  // the posterior is strongly correlated and the dimension is small.
  bool dense_metric = false;
};

struct NutsChainResult {
  MatrixXd draws;       // n_samples x dim (post warm-up)
  VectorXd log_post;    // per kept draw
  VectorXd accept_stat;
  std::vector<int> divergent;   // 0/1 per kept draw
  std::vector<int> tree_depth;
  std::vector<int> n_leapfrog;
  int warmup_divergences = 0;
  int sampling_divergences = 0;
  double step_size = 0.0;
  VectorXd inv_metric;        // diagonal of the inverse metric
  MatrixXd dense_inv_metric;  // dense runs only
};

/// Runs one chain from init (which must have finite log density).
/// Throws NumericalError if every warm-up transition diverged.
NutsChainResult run_nuts_chain(const LogDensityFn& log_density, const VectorXd& init,
                               int n_warmup, int n_samples, const NutsConfig& config, Rng& rng);

}  // namespace canon_lti
