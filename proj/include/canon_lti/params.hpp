#pragma once

// Flat parameter vectors and their ordering contract.
//
// Canonical mode: [a_0..a_{n-1}, b_0..b_{n-1}, (d0), (log_sigma_state), (log_sigma_obs)]
// Standard mode:  [vec(A), vec(B), vec(C), (vec(D)), (log_sigma_state), (log_sigma_obs)]
// where vec() stacks columns. Noise scales that are not inferred take the
// fixed values stored in the layout.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "canon_lti/canonical.hpp"
#include "canon_lti/lti_core.hpp"

namespace canon_lti {

enum class ParamMode { Canonical, Standard };

struct ParamLayout {
  ParamMode mode = ParamMode::Canonical;
  CanonicalForm form = CanonicalForm::Controller;
  int state_dim = 2;
  int input_dim = 1;   // standard mode only; canonical mode is SISO
  int output_dim = 1;
  bool include_feedthrough = false;
  bool infer_sigma_state = false;
  bool infer_sigma_obs = false;
  double sigma_state = 0.0;  // used when not inferred
  double sigma_obs = 0.5;
  double p0_scale = 1.0;

  static ParamLayout canonical(int state_dim, bool include_d0 = false);
  static ParamLayout standard(int state_dim, int input_dim = 1, int output_dim = 1,
                              bool include_d = false);

  void validate() const;

  int dim() const;
  /// Number of entries before the noise block.
  int dynamic_dim() const;
  int a_offset() const { return 0; }
  int b_offset() const { return state_dim; }
  int d0_offset() const;          // -1 if absent
  int log_sigma_state_offset() const;  // -1 if absent
  int log_sigma_obs_offset() const;    // -1 if absent

  std::vector<std::string> names() const;
};

struct DecodedParams {
  StateSpaceSystem system;
  NoiseSpec noise;
  double sigma_state;
  double sigma_obs;
};

/// Throws DimensionError when theta has the wrong length.
DecodedParams decode(const ParamLayout& layout, const VectorXd& theta);

CanonicalSiso decode_canonical(const ParamLayout& layout, const VectorXd& theta);

VectorXd encode_canonical(const ParamLayout& layout, const CanonicalSiso& c,
                          double sigma_state, double sigma_obs);
VectorXd encode_standard(const ParamLayout& layout, const StateSpaceSystem& sys,
                         double sigma_state, double sigma_obs);

/// Derivative of (A, B, C, D, Sigma, Gamma) with respect to one parameter.
struct ModelDerivative {
  MatrixXd dA, dB, dC, dD, dSigma, dGamma;
};

/// One ModelDerivative per entry of theta, in layout order.
std::vector<ModelDerivative> model_derivatives(const ParamLayout& layout, const VectorXd& theta);

}  // namespace canon_lti
