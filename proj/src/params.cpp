#include "canon_lti/params.hpp"

#include <cmath>

#include "canon_lti/errors.hpp"

namespace canon_lti {

ParamLayout ParamLayout::canonical(int state_dim, bool include_d0) {
  ParamLayout l;
  l.mode = ParamMode::Canonical;
  l.state_dim = state_dim;
  l.include_feedthrough = include_d0;
  l.validate();
  return l;
}

ParamLayout ParamLayout::standard(int state_dim, int input_dim, int output_dim, bool include_d) {
  ParamLayout l;
  l.mode = ParamMode::Standard;
  l.state_dim = state_dim;
  l.input_dim = input_dim;
  l.output_dim = output_dim;
  l.include_feedthrough = include_d;
  l.validate();
  return l;
}

void ParamLayout::validate() const {
  if (state_dim < 1) throw std::invalid_argument("ParamLayout: state_dim must be >= 1");
  if (mode == ParamMode::Canonical && (input_dim != 1 || output_dim != 1))
    throw std::invalid_argument("ParamLayout: canonical mode is SISO only");
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("ParamLayout: input/output dims must be >= 1");
  if (!(sigma_obs > 0.0) && !infer_sigma_obs)
    throw std::invalid_argument("ParamLayout: fixed sigma_obs must be > 0");
  if (!(sigma_state >= 0.0)) throw std::invalid_argument("ParamLayout: sigma_state must be >= 0");
  if (!(p0_scale > 0.0)) throw std::invalid_argument("ParamLayout: p0_scale must be > 0");
}

int ParamLayout::dynamic_dim() const {
  const int n = state_dim;
  if (mode == ParamMode::Canonical) return 2 * n + (include_feedthrough ? 1 : 0);
  return n * n + n * input_dim + n * output_dim +
         (include_feedthrough ? input_dim * output_dim : 0);
}

int ParamLayout::dim() const {
  return dynamic_dim() + (infer_sigma_state ? 1 : 0) + (infer_sigma_obs ? 1 : 0);
}

int ParamLayout::d0_offset() const {
  if (!include_feedthrough) return -1;
  if (mode == ParamMode::Canonical) return 2 * state_dim;
  return state_dim * (state_dim + input_dim + output_dim);
}

int ParamLayout::log_sigma_state_offset() const {
  return infer_sigma_state ? dynamic_dim() : -1;
}

int ParamLayout::log_sigma_obs_offset() const {
  return infer_sigma_obs ? dynamic_dim() + (infer_sigma_state ? 1 : 0) : -1;
}

std::vector<std::string> ParamLayout::names() const {
  std::vector<std::string> out;
  const int n = state_dim;
  if (mode == ParamMode::Canonical) {
    for (int i = 0; i < n; ++i) out.push_back("a" + std::to_string(i));
    for (int i = 0; i < n; ++i) out.push_back("b" + std::to_string(i));
    if (include_feedthrough) out.push_back("d0");
  } else {
    auto add = [&](const char* tag, int rows, int cols) {
      for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
          out.push_back(std::string(tag) + "_" + std::to_string(i) + "_" + std::to_string(j));
    };
    add("A", n, n);
    add("B", n, input_dim);
    add("C", output_dim, n);
    if (include_feedthrough) add("D", output_dim, input_dim);
  }
  if (infer_sigma_state) out.emplace_back("log_sigma_state");
  if (infer_sigma_obs) out.emplace_back("log_sigma_obs");
  return out;
}

namespace {

void check_length(const ParamLayout& layout, const VectorXd& theta) {
  if (theta.size() != layout.dim())
    throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                         ", layout expects " + std::to_string(layout.dim()));
}

void noise_scales(const ParamLayout& layout, const VectorXd& theta, double& ss, double& so) {
  ss = layout.infer_sigma_state ? std::exp(theta(layout.log_sigma_state_offset()))
                                : layout.sigma_state;
  so = layout.infer_sigma_obs ? std::exp(theta(layout.log_sigma_obs_offset())) : layout.sigma_obs;
}

void write_noise(const ParamLayout& layout, VectorXd& theta, double ss, double so) {
  if (layout.infer_sigma_state) {
    if (!(ss > 0.0)) throw std::invalid_argument("inferred sigma_state must be > 0");
    theta(layout.log_sigma_state_offset()) = std::log(ss);
  }
  if (layout.infer_sigma_obs) {
    if (!(so > 0.0)) throw std::invalid_argument("inferred sigma_obs must be > 0");
    theta(layout.log_sigma_obs_offset()) = std::log(so);
  }
}

}  // namespace

CanonicalSiso decode_canonical(const ParamLayout& layout, const VectorXd& theta) {
  if (layout.mode != ParamMode::Canonical)
    throw std::invalid_argument("decode_canonical: layout is not canonical");
  check_length(layout, theta);
  const int n = layout.state_dim;
  const double d0 = layout.include_feedthrough ? theta(layout.d0_offset()) : 0.0;
  return CanonicalSiso(theta.head(n), theta.segment(n, n), d0, layout.form);
}

DecodedParams decode(const ParamLayout& layout, const VectorXd& theta) {
  check_length(layout, theta);
  double ss = 0.0, so = 0.0;
  noise_scales(layout, theta, ss, so);
  const int n = layout.state_dim;
  const int m = layout.input_dim;
  const int p = layout.output_dim;
  NoiseSpec noise = NoiseSpec::isotropic(ss, so, n, p, layout.p0_scale);
  if (layout.mode == ParamMode::Canonical)
    return {canonical_to_statespace(decode_canonical(layout, theta)), std::move(noise), ss, so};

  int off = 0;
  auto take = [&](int rows, int cols) {
    MatrixXd M = Eigen::Map<const MatrixXd>(theta.data() + off, rows, cols);
    off += rows * cols;
    return M;
  };
  MatrixXd A = take(n, n);
  MatrixXd B = take(n, m);
  MatrixXd C = take(p, n);
  MatrixXd D = layout.include_feedthrough ? take(p, m) : MatrixXd::Zero(p, m);
  return {StateSpaceSystem(std::move(A), std::move(B), std::move(C), std::move(D)),
          std::move(noise), ss, so};
}

VectorXd encode_canonical(const ParamLayout& layout, const CanonicalSiso& c, double sigma_state,
                          double sigma_obs) {
  if (layout.mode != ParamMode::Canonical)
    throw std::invalid_argument("encode_canonical: layout is not canonical");
  if (c.state_dim() != layout.state_dim)
    throw DimensionError("encode_canonical: state dimension does not match the layout");
  if (c.form != layout.form) throw std::invalid_argument("encode_canonical: form mismatch");
  VectorXd theta(layout.dim());
  const int n = layout.state_dim;
  theta.head(n) = c.a;
  theta.segment(n, n) = c.b;
  if (layout.include_feedthrough) theta(layout.d0_offset()) = c.d0;
  write_noise(layout, theta, sigma_state, sigma_obs);
  return theta;
}

VectorXd encode_standard(const ParamLayout& layout, const StateSpaceSystem& sys,
                         double sigma_state, double sigma_obs) {
  if (layout.mode != ParamMode::Standard)
    throw std::invalid_argument("encode_standard: layout is not standard");
  if (sys.state_dim() != layout.state_dim || sys.input_dim() != layout.input_dim ||
      sys.output_dim() != layout.output_dim)
    throw DimensionError("encode_standard: system dimensions do not match the layout");
  VectorXd theta(layout.dim());
  int off = 0;
  auto put = [&](const MatrixXd& M) {
    Eigen::Map<MatrixXd>(theta.data() + off, M.rows(), M.cols()) = M;
    off += static_cast<int>(M.size());
  };
  put(sys.A());
  put(sys.B());
  put(sys.C());
  if (layout.include_feedthrough) put(sys.D());
  write_noise(layout, theta, sigma_state, sigma_obs);
  return theta;
}

std::vector<ModelDerivative> model_derivatives(const ParamLayout& layout, const VectorXd& theta) {
  check_length(layout, theta);
  const int n = layout.state_dim;
  const int m = layout.input_dim;
  const int p = layout.output_dim;
  double ss = 0.0, so = 0.0;
  noise_scales(layout, theta, ss, so);

  const ModelDerivative zero{MatrixXd::Zero(n, n), MatrixXd::Zero(n, m), MatrixXd::Zero(p, n),
                             MatrixXd::Zero(p, m), MatrixXd::Zero(n, n), MatrixXd::Zero(p, p)};
  std::vector<ModelDerivative> out(static_cast<size_t>(layout.dim()), zero);
  size_t k = 0;
  if (layout.mode == ParamMode::Canonical) {
    for (int i = 0; i < n; ++i) out[k++].dA(n - 1, i) = -1.0;
    for (int i = 0; i < n; ++i) {
      if (layout.form == CanonicalForm::Controller)
        out[k++].dC(0, i) = 1.0;
      else
        out[k++].dB(i, 0) = 1.0;
    }
    if (layout.include_feedthrough) out[k++].dD(0, 0) = 1.0;
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out[k++].dA(i, j) = 1.0;
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < n; ++i) out[k++].dB(i, j) = 1.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < p; ++i) out[k++].dC(i, j) = 1.0;
    if (layout.include_feedthrough)
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < p; ++i) out[k++].dD(i, j) = 1.0;
  }
  if (layout.infer_sigma_state) out[k++].dSigma = 2.0 * ss * ss * MatrixXd::Identity(n, n);
  if (layout.infer_sigma_obs) out[k++].dGamma = 2.0 * so * so * MatrixXd::Identity(p, p);
  return out;
}

}  // namespace canon_lti
