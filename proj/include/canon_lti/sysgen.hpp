#pragma once

// Ground-truth system generators.

#include <cstdint>

#include "canon_lti/lti_core.hpp"
#include "canon_lti/priors.hpp"

namespace canon_lti {

/// Largest Gramian eigenvalue over its trace, maximized over both Gramians.
double gramian_dominance(const StateSpaceSystem& sys);

struct GeneratedSystem {
  StateSpaceSystem system;
  int rejections = 0;
};

/// Eigenvalues from the prior, realized as a companion matrix conjugated by a
/// Haar orthogonal Q; B and C entries iid N(0, 1); D = 0. Draws whose
/// dominance exceeds max_dominance, or which are not minimal, are rejected.
/// Throws NumericalError after max_rejects rejections.
GeneratedSystem random_stable_system(int n, const EigenPriorSpec& prior, std::uint64_t seed,
                                     int max_rejects = 10000, double max_dominance = 0.99);

/// Deterministic n-state system with eigenvalues linspace(-0.98, 0.9, n), an
/// identity controllability Gramian and a unit-norm output row.
StateSpaceSystem balanced_system(int n);

struct EasyHardPair {
  StateSpaceSystem easy;
  StateSpaceSystem hard;
  int hard_rejections = 0;
};

/// easy = balanced_system(2); hard = 2-state draw with dominance > 0.95.
EasyHardPair easy_hard_pair(std::uint64_t seed, int max_rejects = 100000);

}  // namespace canon_lti
