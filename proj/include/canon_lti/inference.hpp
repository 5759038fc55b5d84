#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "canon_lti/nuts.hpp"
#include "canon_lti/params.hpp"
#include "canon_lti/posterior.hpp"
#include "canon_lti/priors.hpp"

namespace canon_lti {

// HoKalman starts every chain at a jittered Ho-Kalman estimate from the data
// (canonical mode only), falling back to a prior draw if that has zero density.
// It keeps chains out of far-away local modes of long-record likelihoods.
enum class InitStrategy { Prior, Provided, HoKalman };

struct SamplerConfig {
  int n_chains = 4;
  int n_steps = 20000;  // total transitions per chain, warm-up included
  int n_warmup = 5000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  bool dense_metric = false;
  std::uint64_t seed = 0;
  InitStrategy init_strategy = InitStrategy::Prior;
  std::vector<VectorXd> initial_points;  // one per chain when Provided
  int n_threads = 1;

  void validate() const;
  int n_kept() const { return n_steps - n_warmup; }
};

struct PosteriorSamples {
  ParamLayout layout;
  std::vector<std::string> names;
  std::vector<MatrixXd> draws;     // per chain: n_kept x dim
  std::vector<VectorXd> log_post;  // per chain: n_kept
  std::vector<std::vector<int>> divergent;
  std::vector<int> divergence_count;  // post warm-up, per chain
  std::vector<int> warmup_divergence_count;
  std::vector<double> step_size;
  std::vector<VectorXd> inv_metric;
  int warmup_len = 0;
  VectorXd ess;
  VectorXd rhat;
  bool high_divergence = false;  // more than 5% of kept transitions diverged

  int n_chains() const { return static_cast<int>(draws.size()); }
  int n_kept() const { return draws.empty() ? 0 : static_cast<int>(draws.front().rows()); }
  int dim() const { return draws.empty() ? 0 : static_cast<int>(draws.front().cols()); }
  /// All draws stacked chain by chain.
  MatrixXd pooled() const;
};

/// Initial point per the Prior strategy: a from the coefficients of an
/// eigenvalue-prior draw, b and d0 from N(0, 0.1^2), noise logs at 0. Standard
/// mode uses N(0, 0.1^2) for every matrix entry.
VectorXd initial_point(const Posterior& posterior, Rng& rng);

/// Canonical parameters of the Ho-Kalman realization of the posterior's data
/// (default HKE settings, noise logs at 0), or nullopt if the realization fails.
std::optional<VectorXd> hokalman_point(const Posterior& posterior);

/// Runs the chains (concurrently up to n_threads) and fills in diagnostics.
PosteriorSamples sample_posterior(const SamplerConfig& config, const Posterior& posterior);

/// NUTS on an arbitrary log density; chain c uses make_rng(seed, c).
PosteriorSamples sample_log_density(const SamplerConfig& config, const LogDensityFn& log_density,
                                    const std::vector<VectorXd>& initial_points,
                                    const ParamLayout& layout, std::vector<std::string> names);

struct Diagnostics {
  VectorXd ess;
  VectorXd rhat;
};

/// Requires at least 2 chains and 100 kept draws.
Diagnostics diagnostics(const PosteriorSamples& samples);

struct PointEstimates {
  VectorXd pme;
  VectorXd map;
  int map_chain = 0;
  int map_index = 0;
};

/// PME is the mean of all draws; MAP is the draw with the largest stored log
/// posterior, ties going to the lowest chain, then the lowest index.
PointEstimates point_estimates(const PosteriorSamples& samples);

enum class QoiKind { Eigenvalues, Hankel, TransferAt, MarkovUpTo };

struct QoiSpec {
  QoiKind kind = QoiKind::Eigenvalues;
  int p = 2, q = 2;                 // Hankel block counts
  std::complex<double> z{2.0, 0.0}; // TransferAt
  int k = 10;                       // MarkovUpTo
};

/// One row per pooled draw. Complex values are stored as (re, im) pairs,
/// matrices column-major.
MatrixXd pushforward_qoi(const PosteriorSamples& samples, const QoiSpec& qoi);
VectorXd qoi_of(const ParamLayout& layout, const VectorXd& theta, const QoiSpec& qoi);

/// Maps every canonical draw through a fresh Haar orthogonal similarity and
/// returns the standard-layout parameter vectors (one row per pooled draw).
MatrixXd orthogonal_pushforward(const PosteriorSamples& samples, std::uint64_t seed);

/// For n_draws parameter draws picked uniformly from the pooled samples, one
/// state path from the smoothing distribution. Each entry is (T+1) x d_x.
std::vector<MatrixXd> posterior_predictive_states(const PosteriorSamples& samples,
                                                  const Trajectory& traj, int n_draws,
                                                  std::uint64_t seed);

}  // namespace canon_lti
