#include "canon_lti/cli/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "canon_lti/sysgen.hpp"

namespace canon_lti::cli {

Fields::Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw SchemaError(path_ + ": expected an object");
}

bool Fields::has(const std::string& key) const {
  if (!j_.contains(key)) return false;
  seen_.push_back(key);
  return true;
}

const json& Fields::at(const std::string& key) const {
  if (!j_.contains(key)) throw SchemaError(path_of(key) + ": required field is missing");
  seen_.push_back(key);
  return j_.at(key);
}

const json& Fields::raw(const std::string& key) const { return at(key); }

double Fields::number(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_number()) throw SchemaError(path_of(key) + ": expected a number");
  return v.get<double>();
}

double Fields::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

int Fields::integer(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_number_integer()) throw SchemaError(path_of(key) + ": expected an integer");
  return v.get<int>();
}

int Fields::integer(const std::string& key, int fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::uint64_t Fields::u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_number_unsigned()) throw SchemaError(path_of(key) + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool Fields::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_boolean()) throw SchemaError(path_of(key) + ": expected true or false");
  return v.get<bool>();
}

std::string Fields::string(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_string()) throw SchemaError(path_of(key) + ": expected a string");
  return v.get<std::string>();
}

std::string Fields::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

VectorXd Fields::vector(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_array()) throw SchemaError(path_of(key) + ": expected an array of numbers");
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw SchemaError(path_of(key) + "[" + std::to_string(i) + "]: expected a number");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

MatrixXd Fields::matrix(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_array() || v.empty() || !v[0].is_array())
    throw SchemaError(path_of(key) + ": expected a non-empty array of rows");
  const size_t cols = v[0].size();
  MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols)
      throw SchemaError(path_of(key) + "[" + std::to_string(i) + "]: rows must have equal length");
    for (size_t k = 0; k < cols; ++k) {
      if (!v[i][k].is_number())
        throw SchemaError(path_of(key) + "[" + std::to_string(i) + "][" + std::to_string(k) +
                          "]: expected a number");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i][k].get<double>();
    }
  }
  return out;
}

std::vector<int> Fields::int_list(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_array() || v.empty()) throw SchemaError(path_of(key) + ": expected a non-empty array");
  std::vector<int> out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer())
      throw SchemaError(path_of(key) + "[" + std::to_string(i) + "]: expected an integer");
    out.push_back(v[i].get<int>());
  }
  return out;
}

std::vector<std::string> Fields::string_list(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_array()) throw SchemaError(path_of(key) + ": expected an array of strings");
  std::vector<std::string> out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string())
      throw SchemaError(path_of(key) + "[" + std::to_string(i) + "]: expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

Fields Fields::object(const std::string& key) const { return Fields(at(key), path_of(key)); }

void Fields::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it)
    if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
      throw SchemaError(path_of(it.key()) + ": unknown field");
}

namespace {

// Library argument checks become schema errors with the field path attached.
template <class F>
auto checked(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

CanonicalForm read_form(const Fields& f) {
  const std::string form = f.string("form", "controller");
  if (form == "controller") return CanonicalForm::Controller;
  if (form == "observer") return CanonicalForm::Observer;
  throw SchemaError(f.path_of("form") + ": expected \"controller\" or \"observer\"");
}

}  // namespace

SystemSpec read_system(const Fields& f, std::uint64_t seed) {
  const std::string kind = f.string("kind");
  if (kind == "canonical") {
    const VectorXd a = f.vector("a"), b = f.vector("b");
    const double d0 = f.number("d0", 0.0);
    const CanonicalForm form = read_form(f);
    f.finish();
    const CanonicalSiso c = checked(f.path_of("a"), [&] { return CanonicalSiso(a, b, d0, form); });
    return {canonical_to_statespace(c), c, 0, kind};
  }
  if (kind == "state_space") {
    const MatrixXd A = f.matrix("A"), B = f.matrix("B"), C = f.matrix("C");
    const MatrixXd D = f.has("D") ? f.matrix("D") : MatrixXd::Zero(C.rows(), B.cols());
    f.finish();
    return {checked(f.path_of("A"), [&] { return StateSpaceSystem(A, B, C, D); }), std::nullopt, 0,
            kind};
  }
  if (kind == "random") {
    const int n = f.integer("state_dim");
    if (n < 1 || n > 12) throw SchemaError(f.path_of("state_dim") + ": must lie in [1, 12]");
    const EigenPriorSpec prior =
        f.has("eigen_prior") ? read_eigen_prior(f.object("eigen_prior"), n)
                             : EigenPriorSpec::uniform_stable_coeffs(n);
    const std::uint64_t s = f.u64("seed", seed);
    const int max_rejects = f.integer("max_rejects", 10000);
    f.finish();
    auto g = random_stable_system(n, prior, s, max_rejects);
    return {std::move(g.system), std::nullopt, g.rejections, kind};
  }
  if (kind == "balanced") {
    const int n = f.integer("state_dim");
    f.finish();
    return {checked(f.path_of("state_dim"), [&] { return balanced_system(n); }), std::nullopt, 0,
            kind};
  }
  throw SchemaError(f.path_of("kind") +
                    ": expected one of canonical, state_space, random, balanced");
}

NoiseConfig read_noise(const Fields& f) {
  NoiseConfig n;
  n.sigma_state = f.number("sigma_state", n.sigma_state);
  n.sigma_obs = f.number("sigma_obs", n.sigma_obs);
  n.p0_scale = f.number("p0_scale", n.p0_scale);
  f.finish();
  if (!(n.sigma_state >= 0.0)) throw SchemaError(f.path_of("sigma_state") + ": must be >= 0");
  if (!(n.sigma_obs > 0.0)) throw SchemaError(f.path_of("sigma_obs") + ": must be > 0");
  if (!(n.p0_scale > 0.0)) throw SchemaError(f.path_of("p0_scale") + ": must be > 0");
  return n;
}

InputConfig read_input(const Fields& f) {
  InputConfig c;
  c.kind = f.string("kind", c.kind);
  c.T = f.integer("T", c.T);
  c.std = f.number("std", c.std);
  f.finish();
  if (c.kind != "gaussian" && c.kind != "impulse" && c.kind != "zeros")
    throw SchemaError(f.path_of("kind") + ": expected gaussian, impulse or zeros");
  if (c.T < 1) throw SchemaError(f.path_of("T") + ": must be >= 1");
  if (!(c.std > 0.0)) throw SchemaError(f.path_of("std") + ": must be > 0");
  return c;
}

MatrixXd make_input(const InputConfig& cfg, int input_dim, std::uint64_t seed) {
  if (cfg.kind == "zeros") return MatrixXd::Zero(cfg.T, input_dim);
  if (cfg.kind == "impulse") {
    MatrixXd u = MatrixXd::Zero(cfg.T, input_dim);
    u(0, 0) = 1.0;
    return u;
  }
  Rng rng = make_rng(seed, 1);
  return cfg.std * standard_normal_matrix(rng, cfg.T, input_dim);
}

EigenPriorSpec read_eigen_prior(const Fields& f, int n) {
  const std::string kind = f.string("kind");
  EigenPriorSpec spec;
  if (kind == "restricted_real") {
    spec = EigenPriorSpec::restricted_real(n, f.number("lo", 0.0), f.number("hi", 0.9));
  } else if (kind == "uniform_real") {
    spec = EigenPriorSpec::uniform_real(n);
  } else if (kind == "polar_uniform") {
    std::vector<double> w;
    if (f.has("real_count_weights")) {
      const VectorXd v = f.vector("real_count_weights");
      w.assign(v.data(), v.data() + v.size());
    }
    spec = EigenPriorSpec::polar_uniform(n, w);
  } else if (kind == "uniform_stable_coeffs") {
    spec = EigenPriorSpec::uniform_stable_coeffs(n);
  } else {
    throw SchemaError(f.path_of("kind") +
                      ": expected restricted_real, uniform_real, polar_uniform or "
                      "uniform_stable_coeffs");
  }
  f.finish();
  checked(f.path_of("kind"), [&] {
    spec.validate();
    return 0;
  });
  return spec;
}

ParamPriorSpec read_param_prior(const Fields& f, int n) {
  ParamPriorSpec p;
  p.eigen = f.has("eigen") ? read_eigen_prior(f.object("eigen"), n)
                           : EigenPriorSpec::uniform_stable_coeffs(n);
  p.b_std = f.number("b_std", p.b_std);
  p.d0_std = f.number("d0_std", p.d0_std);
  if (f.has("noise")) {
    const Fields nf = f.object("noise");
    const std::string kind = nf.string("kind", "half_cauchy");
    if (kind == "half_cauchy") p.noise.kind = NoisePriorKind::HalfCauchy;
    else if (kind == "half_normal") p.noise.kind = NoisePriorKind::HalfNormal;
    else if (kind == "fixed") p.noise.kind = NoisePriorKind::Fixed;
    else throw SchemaError(nf.path_of("kind") + ": expected half_cauchy, half_normal or fixed");
    p.noise.scale = nf.number("scale", p.noise.scale);
    nf.finish();
  }
  f.finish();
  if (!(p.b_std > 0.0)) throw SchemaError(f.path_of("b_std") + ": must be > 0");
  if (!(p.d0_std > 0.0)) throw SchemaError(f.path_of("d0_std") + ": must be > 0");
  return p;
}

SamplerConfig read_sampler(const Fields& f, std::uint64_t seed, int n_threads) {
  SamplerConfig s;
  s.n_chains = f.integer("n_chains", s.n_chains);
  s.n_steps = f.integer("n_steps", s.n_steps);
  s.n_warmup = f.integer("n_warmup", s.n_warmup);
  s.target_accept = f.number("target_accept", s.target_accept);
  s.max_tree_depth = f.integer("max_tree_depth", s.max_tree_depth);
  const std::string metric = f.string("metric", "diag");
  if (metric != "diag" && metric != "dense")
    throw SchemaError(f.path_of("metric") + ": expected \"diag\" or \"dense\"");
  s.dense_metric = metric == "dense";
  const std::string init = f.string("init", "prior");
  if (init != "prior" && init != "hokalman")
    throw SchemaError(f.path_of("init") + ": expected \"prior\" or \"hokalman\"");
  s.init_strategy = init == "prior" ? InitStrategy::Prior : InitStrategy::HoKalman;
  s.seed = seed;
  s.n_threads = n_threads;
  f.finish();
  checked(f.path_of("n_steps"), [&] {
    s.validate();
    return 0;
  });
  return s;
}

HoKalmanConfig read_hokalman(const Fields& f, int state_dim) {
  HoKalmanConfig c;
  c.state_dim = f.integer("state_dim", state_dim);
  c.p = f.integer("p", 0);
  c.q = f.integer("q", 0);
  c.window = f.integer("window", 0);
  c.gap_warning = f.number("gap_warning", c.gap_warning);
  const std::string est = f.string("markov_estimation", "least_squares");
  if (est == "least_squares") c.markov_estimation = MarkovEstimation::LeastSquares;
  else if (est == "impulse_direct") c.markov_estimation = MarkovEstimation::ImpulseDirect;
  else throw SchemaError(f.path_of("markov_estimation") + ": expected least_squares or impulse_direct");
  f.finish();
  checked(f.path_of("p"), [&] {
    c.validate();
    return 0;
  });
  return c;
}

std::string config_hash(const json& effective) {
  const std::string text = effective.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("config " + path.string() + ": " + e.what());
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c), 0x51edu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace canon_lti::cli
