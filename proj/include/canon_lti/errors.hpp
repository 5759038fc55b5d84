#pragma once

#include <stdexcept>
#include <string>

namespace canon_lti {

/// Inconsistent matrix or sequence dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two roots closer than the coincidence tolerance; root-space Jacobians are
/// undefined there.
class DegenerateSpectrumError : public NumericalError {
 public:
  DegenerateSpectrumError(const std::string& what, double gap)
      : NumericalError(what), gap_(gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

/// Evaluation point (numerically) coincides with a pole.
class NearPoleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// (A, B) is not controllable to numerical precision.
class NotControllableError : public NumericalError {
 public:
  NotControllableError(const std::string& what, int rank)
      : NumericalError(what), rank_(rank) {}
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

}  // namespace canon_lti
