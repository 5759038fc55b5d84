#pragma once

// Accuracy-comparison cells shared by the command-line experiment grid and
// the acceptance checks: one ground-truth system, one data length, several
// estimators scored in canonical coordinates.

#include <cstdint>
#include <string>
#include <vector>

#include "canon_lti/baselines.hpp"
#include "canon_lti/canonical.hpp"
#include "canon_lti/inference.hpp"
#include "canon_lti/lti_core.hpp"
#include "canon_lti/priors.hpp"

namespace canon_lti {

/// iid N(0,1) input and one simulated trajectory; both derived from seed.
Trajectory experiment_data(const StateSpaceSystem& truth, const NoiseSpec& noise, int T,
                           std::uint64_t seed);

struct EstimateError {
  bool ok = false;
  double param_mse = 0.0;     // mean squared error over (a, b) in controller form
  double hankel_error = 0.0;  // Frobenius norm of the Hankel difference
  std::string failure;
};

EstimateError score_estimate(const CanonicalSiso& truth, const CanonicalSiso& estimate,
                             int hankel_blocks);

struct BayesCell {
  EstimateError pme;
  EstimateError map;
  double max_rhat = 0.0;
  int divergences = 0;
};

/// Canonical-mode posterior sampling with the given prior and scoring of PME/MAP.
BayesCell run_bayes_cell(const CanonicalSiso& truth, const Trajectory& traj,
                         const ParamLayout& layout, const ParamPriorSpec& prior,
                         const SamplerConfig& sampler, int hankel_blocks);

/// Ho-Kalman estimate mapped to controller form and scored; failures are
/// reported in the result rather than thrown.
EstimateError run_hke_cell(const CanonicalSiso& truth, const Trajectory& traj,
                           const HoKalmanConfig& cfg, int hankel_blocks);

struct Percentiles {
  double median = 0.0, p05 = 0.0, p95 = 0.0;
  int n = 0;
};

/// Linear-interpolation percentiles of the finite values; n = 0 when none.
Percentiles percentiles(std::vector<double> values);

}  // namespace canon_lti
