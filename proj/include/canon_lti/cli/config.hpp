#pragma once

// JSON configuration schemas for the command-line tool. Every reader rejects
// unknown keys and reports the offending field by its JSON path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "canon_lti/baselines.hpp"
#include "canon_lti/canonical.hpp"
#include "canon_lti/inference.hpp"
#include "canon_lti/lti_core.hpp"
#include "canon_lti/params.hpp"
#include "canon_lti/priors.hpp"

namespace canon_lti::cli {

using json = nlohmann::json;

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Typed access to one JSON object. Call finish() once all keys are read to
/// reject leftovers.
class Fields {
 public:
  Fields(const json& j, std::string path);

  bool has(const std::string& key) const;
  const json& raw(const std::string& key) const;
  std::string path_of(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key) const;
  int integer(const std::string& key, int fallback) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  VectorXd vector(const std::string& key) const;
  MatrixXd matrix(const std::string& key) const;  // array of rows
  std::vector<int> int_list(const std::string& key) const;
  std::vector<std::string> string_list(const std::string& key) const;
  Fields object(const std::string& key) const;

  void finish() const;

 private:
  const json& at(const std::string& key) const;
  const json& j_;
  std::string path_;
  mutable std::vector<std::string> seen_;
};

struct SystemSpec {
  StateSpaceSystem system;
  std::optional<CanonicalSiso> canonical;  // when given in canonical form
  int rejections = 0;
  std::string kind;
};

/// kind: canonical | state_space | random | balanced.
SystemSpec read_system(const Fields& f, std::uint64_t seed);

struct NoiseConfig {
  double sigma_state = 0.3;
  double sigma_obs = 0.5;
  double p0_scale = 1.0;
  NoiseSpec spec(int state_dim, int output_dim) const {
    return NoiseSpec::isotropic(sigma_state, sigma_obs, state_dim, output_dim, p0_scale);
  }
};

NoiseConfig read_noise(const Fields& f);

struct InputConfig {
  std::string kind = "gaussian";  // gaussian | impulse | zeros
  int T = 100;
  double std = 1.0;
};

InputConfig read_input(const Fields& f);
MatrixXd make_input(const InputConfig& cfg, int input_dim, std::uint64_t seed);

EigenPriorSpec read_eigen_prior(const Fields& f, int n);
ParamPriorSpec read_param_prior(const Fields& f, int n);
SamplerConfig read_sampler(const Fields& f, std::uint64_t seed, int n_threads);
HoKalmanConfig read_hokalman(const Fields& f, int state_dim);

/// 64-bit FNV-1a of the compact dump of the effective configuration, as hex.
std::string config_hash(const json& effective);

/// Parse a config file; syntax errors become SchemaError.
json load_config(const std::filesystem::path& path);

/// Stable seed for a grid coordinate.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace canon_lti::cli
