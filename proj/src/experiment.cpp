#include "canon_lti/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "canon_lti/errors.hpp"

namespace canon_lti {

Trajectory experiment_data(const StateSpaceSystem& truth, const NoiseSpec& noise, int T,
                           std::uint64_t seed) {
  Rng input_rng = make_rng(seed, 1);
  const MatrixXd u = standard_normal_matrix(input_rng, T, truth.input_dim());
  Rng noise_rng = make_rng(seed, 2);
  return simulate(truth, noise, u, noise_rng);
}

EstimateError score_estimate(const CanonicalSiso& truth, const CanonicalSiso& estimate,
                             int hankel_blocks) {
  EstimateError e;
  if (truth.state_dim() != estimate.state_dim()) {
    e.failure = "state dimension mismatch";
    return e;
  }
  const int n = truth.state_dim();
  e.param_mse = ((estimate.a - truth.a).squaredNorm() + (estimate.b - truth.b).squaredNorm()) /
                (2.0 * n);
  e.hankel_error = (hankel_matrix(canonical_to_statespace(estimate), hankel_blocks, hankel_blocks) -
                    hankel_matrix(canonical_to_statespace(truth), hankel_blocks, hankel_blocks))
                       .norm();
  e.ok = std::isfinite(e.param_mse) && std::isfinite(e.hankel_error);
  if (!e.ok) e.failure = "non-finite error";
  return e;
}

BayesCell run_bayes_cell(const CanonicalSiso& truth, const Trajectory& traj,
                         const ParamLayout& layout, const ParamPriorSpec& prior,
                         const SamplerConfig& sampler, int hankel_blocks) {
  const Posterior posterior(layout, prior, traj);
  const PosteriorSamples samples = sample_posterior(sampler, posterior);
  const PointEstimates pe = point_estimates(samples);
  BayesCell cell;
  cell.pme = score_estimate(truth, decode_canonical(layout, pe.pme), hankel_blocks);
  cell.map = score_estimate(truth, decode_canonical(layout, pe.map), hankel_blocks);
  cell.max_rhat = samples.rhat.size() > 0 ? samples.rhat.maxCoeff() : 0.0;
  for (int d : samples.divergence_count) cell.divergences += d;
  return cell;
}

EstimateError run_hke_cell(const CanonicalSiso& truth, const Trajectory& traj,
                           const HoKalmanConfig& cfg, int hankel_blocks) {
  try {
    return score_estimate(truth, hke_in_canonical(traj, cfg), hankel_blocks);
  } catch (const std::exception& ex) {
    EstimateError e;
    e.failure = ex.what();
    return e;
  }
}

Percentiles percentiles(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  Percentiles out;
  out.n = static_cast<int>(values.size());
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  out.median = at(0.5);
  out.p05 = at(0.05);
  out.p95 = at(0.95);
  return out;
}

}  // namespace canon_lti
