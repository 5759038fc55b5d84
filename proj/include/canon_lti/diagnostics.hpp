#pragma once

// Convergence diagnostics on rank-normalized split chains.

#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace canon_lti {

/// Each entry is one chain of draws of a scalar quantity.
using ScalarChains = std::vector<Eigen::VectorXd>;

/// max(bulk, tail) rank-normalized split R-hat. Returns +inf when any split
/// chain is constant.
double split_rhat(const ScalarChains& chains);

/// Bulk effective sample size (rank-normalized split chains, Geyer initial
/// monotone sequence), capped at the total number of draws. Returns 0 when
/// any chain is constant.
double bulk_ess(const ScalarChains& chains);

/// ESS of the raw (non rank-normalized) split chains.
double ess_basic(const ScalarChains& chains);

/// Plain potential scale reduction of the given chains, without splitting or
/// rank normalization.
double rhat_basic(const ScalarChains& chains);

/// Normal scores (r - 3/8) / (S + 1/4) of average ranks over the pooled draws.
ScalarChains rank_normalize(const ScalarChains& chains);

ScalarChains split_chains(const ScalarChains& chains);

}  // namespace canon_lti
