#include "canon_lti/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "canon_lti/baselines.hpp"
#include "canon_lti/cli/config.hpp"
#include "canon_lti/cli/io.hpp"
#include "canon_lti/diagnostics.hpp"
#include "canon_lti/errors.hpp"
#include "canon_lti/experiment.hpp"
#include "canon_lti/fisher.hpp"
#include "canon_lti/sysgen.hpp"

namespace canon_lti::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  json cfg;
  fs::path base;  // directory of the config file
  fs::path out;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool strict = false;
  bool allow_standard = false;
  Provenance prov;
  std::ostream* log = nullptr;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  }
  void wrote(const fs::path& p) const { *log << "wrote " << p.string() << "\n"; }
};

template <class Task>
void parallel_for(int n_tasks, int n_threads, Task&& task) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex m;
  auto worker = [&]() {
    for (int i = next++; i < n_tasks; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int k = std::max(1, std::min(n_threads, n_tasks));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

json system_json(const StateSpaceSystem& sys) {
  return {{"A", matrix_json(sys.A())},
          {"B", matrix_json(sys.B())},
          {"C", matrix_json(sys.C())},
          {"D", matrix_json(sys.D())}};
}

json canonical_json(const CanonicalSiso& c) {
  return {{"form", c.form == CanonicalForm::Controller ? "controller" : "observer"},
          {"a", vector_json(c.a)},
          {"b", vector_json(c.b)},
          {"d0", c.d0}};
}

std::optional<CanonicalSiso> try_canonical(const StateSpaceSystem& sys, CanonicalForm form) {
  if (!sys.is_siso()) return std::nullopt;
  try {
    return form == CanonicalForm::Controller ? to_controller_form(sys).first
                                             : to_observer_form(sys).first;
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

CanonicalForm parse_form(const Fields& f) {
  const std::string s = f.string("form", "controller");
  if (s == "controller") return CanonicalForm::Controller;
  if (s == "observer") return CanonicalForm::Observer;
  throw SchemaError(f.path_of("form") + ": expected \"controller\" or \"observer\"");
}

// Observed data, either from a file or simulated inline.
struct DataSource {
  Trajectory traj;
  std::optional<SystemSpec> system;
  std::optional<NoiseConfig> noise;
};

DataSource read_data(const Fields& f, const Context& ctx) {
  if (f.has("trajectory")) {
    const std::string path = f.string("trajectory");
    f.finish();
    return {read_trajectory_csv(ctx.resolve(path)), std::nullopt, std::nullopt};
  }
  SystemSpec sys = read_system(f.object("system"), ctx.seed);
  const NoiseConfig noise = f.has("noise") ? read_noise(f.object("noise")) : NoiseConfig{};
  const InputConfig input = f.has("input") ? read_input(f.object("input")) : InputConfig{};
  SimulateOptions opts;
  opts.pin_initial_state = f.boolean("pin_initial_state", false);
  f.finish();
  const MatrixXd u = make_input(input, sys.system.input_dim(), ctx.seed);
  Rng rng = make_rng(ctx.seed, 2);
  Trajectory traj = simulate(sys.system,
                             noise.spec(sys.system.state_dim(), sys.system.output_dim()), u, rng,
                             opts);
  return {std::move(traj), std::move(sys), noise};
}

ParamPriorSpec default_prior(int n) {
  ParamPriorSpec p;
  p.eigen = EigenPriorSpec::uniform_stable_coeffs(n);
  return p;
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return s;
}

double hankel_distance(const StateSpaceSystem& a, const StateSpaceSystem& b, int blocks) {
  return (hankel_matrix(a, blocks, blocks) - hankel_matrix(b, blocks, blocks)).norm();
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Context& ctx) {
  const Fields root(ctx.cfg, "$");
  root.has("seed");
  const SystemSpec sys = read_system(root.object("system"), ctx.seed);
  const NoiseConfig noise = root.has("noise") ? read_noise(root.object("noise")) : NoiseConfig{};
  const InputConfig input = root.has("input") ? read_input(root.object("input")) : InputConfig{};
  SimulateOptions opts;
  opts.pin_initial_state = root.boolean("pin_initial_state", false);
  const bool include_states = root.boolean("include_states", true);
  root.finish();

  const StateSpaceSystem& S = sys.system;
  const MatrixXd u = make_input(input, S.input_dim(), ctx.seed);
  Rng rng = make_rng(ctx.seed, 2);
  const NoiseSpec ns = noise.spec(S.state_dim(), S.output_dim());
  const Trajectory traj = simulate(S, ns, u, rng, opts);

  CsvTable t;
  t.header = {"t"};
  auto names = [](const std::string& base, int k) {
    std::vector<std::string> v;
    if (k == 1 && base != "x") return std::vector<std::string>{base};
    for (int i = 1; i <= k; ++i) v.push_back(base + "_" + std::to_string(i));
    return v;
  };
  for (auto& s : names("u", S.input_dim())) t.header.push_back(s);
  for (auto& s : names("y", S.output_dim())) t.header.push_back(s);
  if (include_states)
    for (auto& s : names("x", S.state_dim())) t.header.push_back(s);
  for (int r = 0; r < traj.length(); ++r) {
    std::vector<std::string> row{std::to_string(r + 1)};
    for (int k = 0; k < S.input_dim(); ++k) row.push_back(format_double(traj.u()(r, k)));
    for (int k = 0; k < S.output_dim(); ++k) row.push_back(format_double(traj.y()(r, k)));
    if (include_states)
      for (int k = 0; k < S.state_dim(); ++k) row.push_back(format_double((*traj.x())(r + 1, k)));
    t.rows.push_back(std::move(row));
  }
  const fs::path csv = ctx.out / "trajectory.csv";
  write_csv(csv, t, ctx.prov);
  ctx.wrote(csv);

  json doc;
  doc["kind"] = sys.kind;
  doc["system"] = system_json(S);
  doc["rejections"] = sys.rejections;
  doc["eigenvalues"] = spectrum_json(eigenvalues(S.A()));
  if (auto c = try_canonical(S, CanonicalForm::Controller)) doc["canonical"] = canonical_json(*c);
  doc["noise"] = {{"sigma_state", noise.sigma_state},
                  {"sigma_obs", noise.sigma_obs},
                  {"p0_scale", noise.p0_scale}};
  doc["input"] = {{"kind", input.kind}, {"T", input.T}, {"std", input.std}};
  doc["initial_state"] = vector_json((*traj.x()).row(0).transpose());
  doc["rng_streams"] = {{"input", 1}, {"noise", 2}};
  const fs::path js = ctx.out / "system.json";
  write_json(js, doc, ctx.prov);
  ctx.wrote(js);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_infer(const Context& ctx) {
  const Fields root(ctx.cfg, "$");
  root.has("seed");
  const DataSource data = read_data(root.object("data"), ctx);
  std::optional<SystemSpec> truth = data.system;
  if (root.has("truth")) truth = read_system(root.object("truth"), ctx.seed);

  const std::string mode = root.string("mode", "canonical");
  if (mode != "canonical" && mode != "standard")
    throw SchemaError("$.mode: expected \"canonical\" or \"standard\"");
  if (mode == "standard" && !ctx.allow_standard)
    throw SchemaError(
        "$.mode: standard mode is not identifiable (similar realizations share the likelihood); "
        "pass --allow-standard to run it anyway");
  int n = 0;
  if (root.has("state_dim")) n = root.integer("state_dim");
  else if (truth) n = truth->system.state_dim();
  else throw SchemaError("$.state_dim: required when no truth system is given");
  if (n < 1 || n > 12) throw SchemaError("$.state_dim: must lie in [1, 12]");
  const CanonicalForm form = parse_form(root);
  const bool feedthrough = root.boolean("include_feedthrough", false);

  NoiseConfig nm = data.noise.value_or(NoiseConfig{});
  bool infer_state = false, infer_obs = false;
  if (root.has("noise_model")) {
    const Fields f = root.object("noise_model");
    nm.sigma_state = f.number("sigma_state", nm.sigma_state);
    nm.sigma_obs = f.number("sigma_obs", nm.sigma_obs);
    nm.p0_scale = f.number("p0_scale", nm.p0_scale);
    infer_state = f.boolean("infer_sigma_state", false);
    infer_obs = f.boolean("infer_sigma_obs", false);
    f.finish();
  }
  ParamPriorSpec prior = root.has("prior") ? read_param_prior(root.object("prior"), n)
                                           : default_prior(n);
  SamplerConfig sampler = root.has("sampler") ? read_sampler(root.object("sampler"), ctx.seed, ctx.jobs)
                                              : read_sampler(Fields(json::object(), "$.sampler"),
                                                             ctx.seed, ctx.jobs);
  int hankel_blocks = 2;
  if (root.has("qoi")) {
    const Fields f = root.object("qoi");
    hankel_blocks = f.integer("hankel_blocks", 2);
    f.finish();
    if (hankel_blocks < 1) throw SchemaError("$.qoi.hankel_blocks: must be >= 1");
  }
  root.finish();

  const Trajectory& traj = data.traj;
  ParamLayout layout = mode == "canonical"
                           ? ParamLayout::canonical(n, feedthrough)
                           : ParamLayout::standard(n, static_cast<int>(traj.u().cols()),
                                                   static_cast<int>(traj.y().cols()), feedthrough);
  if (mode == "canonical" && (traj.u().cols() != 1 || traj.y().cols() != 1))
    throw SchemaError("$.mode: canonical mode needs single-input single-output data");
  layout.form = form;
  layout.sigma_state = nm.sigma_state;
  layout.sigma_obs = nm.sigma_obs;
  layout.p0_scale = nm.p0_scale;
  layout.infer_sigma_state = infer_state;
  layout.infer_sigma_obs = infer_obs;
  prior.infer_sigma_state = infer_state;
  prior.infer_sigma_obs = infer_obs;
  try {
    layout.validate();
    prior.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("$: ") + e.what());
  }

  const Posterior posterior(layout, prior, traj);
  const PosteriorSamples samples = sample_posterior(sampler, posterior);
  const PointEstimates pe = point_estimates(samples);

  const fs::path csv = ctx.out / "samples.csv";
  write_csv(csv, samples_table(samples), ctx.prov);
  ctx.wrote(csv);

  std::optional<VectorXd> truth_theta;
  if (truth) {
    if (mode == "canonical") {
      if (auto c = try_canonical(truth->system, form); c && c->state_dim() == n) {
        c->d0 = truth->system.D()(0, 0);
        truth_theta = encode_canonical(layout, *c, nm.sigma_state, nm.sigma_obs);
      }
    }
  }

  const MatrixXd pooled = samples.pooled();
  json params = json::array();
  for (int j = 0; j < samples.dim(); ++j) {
    std::vector<double> col(pooled.col(j).data(), pooled.col(j).data() + pooled.rows());
    const Percentiles pc = percentiles(col);
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    auto quant = [&](double q) {
      const double pos = q * static_cast<double>(sorted.size() - 1);
      const auto lo = static_cast<size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, sorted.size() - 1);
      return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    json p = {{"name", samples.names[static_cast<size_t>(j)]},
              {"pme", pe.pme(j)},
              {"map", pe.map(j)},
              {"ess", samples.ess.size() ? samples.ess(j) : 0.0},
              {"rhat", samples.rhat.size() ? samples.rhat(j) : 0.0},
              {"median", pc.median},
              {"q025", quant(0.025)},
              {"q975", quant(0.975)}};
    if (truth_theta) {
      p["truth"] = (*truth_theta)(j);
      p["truth_in_95"] = (*truth_theta)(j) >= quant(0.025) && (*truth_theta)(j) <= quant(0.975);
    }
    params.push_back(std::move(p));
  }

  json doc;
  doc["mode"] = mode;
  doc["state_dim"] = n;
  doc["T"] = traj.length();
  doc["sampler"] = {{"n_chains", sampler.n_chains},
                    {"n_steps", sampler.n_steps},
                    {"n_warmup", sampler.n_warmup},
                    {"target_accept", sampler.target_accept},
                    {"max_tree_depth", sampler.max_tree_depth},
                    {"metric", sampler.dense_metric ? "dense" : "diag"},
                    {"init", sampler.init_strategy == InitStrategy::HoKalman ? "hokalman" : "prior"}};
  doc["parameters"] = params;
  doc["map_location"] = {{"chain", pe.map_chain}, {"index", pe.map_index}};

  const StateSpaceSystem pme_sys = decode(layout, pe.pme).system;
  const StateSpaceSystem map_sys = decode(layout, pe.map).system;
  json eig = {{"pme", spectrum_json(eigenvalues(pme_sys.A()))},
              {"map", spectrum_json(eigenvalues(map_sys.A()))}};
  // Spectral radius is label-free, so its pushforward summarizes cleanly.
  std::vector<double> radius;
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    radius.push_back(eigenvalues(decode(layout, pooled.row(i).transpose()).system.A())
                         .spectral_radius());
  const Percentiles rp = percentiles(radius);
  eig["spectral_radius"] = {{"median", rp.median}, {"p05", rp.p05}, {"p95", rp.p95}};
  if (truth) eig["truth"] = spectrum_json(eigenvalues(truth->system.A()));
  doc["eigenvalues"] = eig;

  if (truth && truth->system.input_dim() == pme_sys.input_dim() &&
      truth->system.output_dim() == pme_sys.output_dim()) {
    std::vector<double> errs;
    for (Eigen::Index i = 0; i < pooled.rows(); ++i)
      errs.push_back(hankel_distance(decode(layout, pooled.row(i).transpose()).system,
                                     truth->system, hankel_blocks));
    const Percentiles hp = percentiles(errs);
    doc["hankel_error"] = {{"blocks", hankel_blocks},
                           {"pme", hankel_distance(pme_sys, truth->system, hankel_blocks)},
                           {"map", hankel_distance(map_sys, truth->system, hankel_blocks)},
                           {"posterior_median", hp.median},
                           {"posterior_p05", hp.p05},
                           {"posterior_p95", hp.p95}};
  }

  int total_div = 0;
  for (int d : samples.divergence_count) total_div += d;
  doc["divergences"] = {{"total", total_div},
                        {"per_chain", samples.divergence_count},
                        {"warmup_per_chain", samples.warmup_divergence_count},
                        {"high", samples.high_divergence}};
  const double max_rhat = samples.rhat.size() ? samples.rhat.maxCoeff() : 0.0;
  const double min_ess = samples.ess.size() ? samples.ess.minCoeff() : 0.0;
  const bool converged = samples.rhat.size() > 0 && max_rhat <= 1.1;
  doc["convergence"] = {{"max_rhat", max_rhat},
                        {"min_ess", min_ess},
                        {"rhat_threshold", 1.1},
                        {"converged", converged}};
  doc["numerical_failures"] = posterior.numerical_failures();

  const fs::path js = ctx.out / "summary.json";
  write_json(js, doc, ctx.prov);
  ctx.wrote(js);
  if (ctx.strict && !converged) {
    *ctx.log << "not converged: max rhat " << max_rhat << " > 1.1\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

const char* method_tag(FimMethod m) {
  switch (m) {
    case FimMethod::NoiselessRecursive: return "noiseless";
    case FimMethod::KalmanSensitivity: return "kalman";
    case FimMethod::NumericExpected: return "numeric";
  }
  return "?";
}

int cmd_fim(const Context& ctx) {
  const Fields root(ctx.cfg, "$");
  root.has("seed");
  const SystemSpec sys = read_system(root.object("system"), ctx.seed);
  const NoiseConfig noise = root.has("noise") ? read_noise(root.object("noise")) : NoiseConfig{};
  const InputConfig input = root.has("input") ? read_input(root.object("input")) : InputConfig{};
  const std::string mode = root.string("mode", "canonical");
  if (mode != "canonical" && mode != "standard")
    throw SchemaError("$.mode: expected \"canonical\" or \"standard\"");
  const CanonicalForm form = parse_form(root);
  const bool feedthrough = root.boolean("include_feedthrough", false);
  std::vector<std::string> methods = {"noiseless", "kalman"};
  if (root.has("methods")) methods = root.string_list("methods");
  if (methods.empty()) throw SchemaError("$.methods: must not be empty");
  for (size_t i = 0; i < methods.size(); ++i)
    if (methods[i] != "noiseless" && methods[i] != "kalman" && methods[i] != "numeric")
      throw SchemaError("$.methods[" + std::to_string(i) + "]: expected noiseless, kalman or numeric");
  const int M = root.integer("M", 100);
  if (M < 1) throw SchemaError("$.M: must be >= 1");
  const double confidence = root.number("confidence", 0.95);
  if (!(confidence > 0.0 && confidence < 1.0)) throw SchemaError("$.confidence: must lie in (0, 1)");
  std::optional<VectorXd> theta_hat;
  if (root.has("theta_hat")) theta_hat = root.vector("theta_hat");
  std::optional<std::string> samples_path;
  if (root.has("samples")) samples_path = root.string("samples");
  const std::string bvm_method = root.string("bvm_method", methods.front());
  if (std::find(methods.begin(), methods.end(), bvm_method) == methods.end())
    throw SchemaError("$.bvm_method: must be one of the requested methods");
  root.finish();

  const StateSpaceSystem& S = sys.system;
  const int n = S.state_dim();
  const MatrixXd u = make_input(input, S.input_dim(), ctx.seed);
  const NoiseSpec ns = noise.spec(n, S.output_dim());

  ParamLayout layout;
  VectorXd theta0;
  std::optional<CanonicalSiso> c;
  if (mode == "canonical") {
    c = try_canonical(S, form);
    if (!c) throw SchemaError("$.system: canonical FIM needs a controllable/observable SISO system");
    c->d0 = S.D()(0, 0);
    layout = ParamLayout::canonical(n, feedthrough);
    layout.form = form;
  } else {
    layout = ParamLayout::standard(n, S.input_dim(), S.output_dim(), feedthrough);
  }
  layout.sigma_state = noise.sigma_state;
  layout.sigma_obs = noise.sigma_obs;
  layout.p0_scale = noise.p0_scale;
  theta0 = c ? encode_canonical(layout, *c, noise.sigma_state, noise.sigma_obs)
             : encode_standard(layout, S, noise.sigma_state, noise.sigma_obs);
  if (theta_hat && theta_hat->size() != theta0.size())
    throw SchemaError("$.theta_hat: expected " + std::to_string(theta0.size()) + " entries");
  const VectorXd at = theta_hat.value_or(theta0);

  json doc;
  doc["mode"] = mode;
  doc["T"] = input.T;
  doc["state_dim"] = n;
  doc["confidence"] = confidence;
  doc["parameter_names"] = layout.names();
  doc["evaluation_point"] = vector_json(at);

  std::map<std::string, MatrixXd> mats;
  std::map<std::string, EllipsoidVolume> vols;
  json entries = json::array();
  for (const auto& m : methods) {
    FimResult r;
    if (m == "noiseless") {
      r = c ? fim_noiseless(decode_canonical(layout, at), u, noise.sigma_obs, feedthrough)
            : fim_standard_noiseless(decode(layout, at).system, u, noise.sigma_obs, feedthrough);
    } else if (m == "kalman") {
      r = fim_kalman(layout, at, u);
    } else {
      r = fim_numeric_expected(layout, at, S, ns, u, M, ctx.seed, ctx.jobs);
    }
    const MatrixXd F = 0.5 * (r.matrix + r.matrix.transpose());
    const EllipsoidVolume v = ellipsoid_log_volume(F, confidence);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(F, Eigen::EigenvaluesOnly);
    json e = {{"method", method_tag(r.method)},
              {"matrix", matrix_json(F)},
              {"eigenvalues", vector_json(es.eigenvalues())},
              {"small_eigenvalues", count_small_eigenvalues(F)},
              {"singular", v.singular},
              {"log_volume", v.singular ? json(nullptr) : json(v.log_volume)}};
    if (r.method == FimMethod::NumericExpected) e["realizations"] = r.realizations;
    entries.push_back(std::move(e));
    mats[m] = F;
    vols[m] = v;
  }
  doc["methods"] = entries;
  json ratios = json::array();
  for (size_t i = 0; i < methods.size(); ++i)
    for (size_t j = i + 1; j < methods.size(); ++j) {
      const auto &a = vols[methods[i]], &b = vols[methods[j]];
      ratios.push_back({{"methods", {methods[i], methods[j]}},
                        {"log_ratio", a.singular || b.singular
                                          ? json(nullptr)
                                          : json(a.log_volume - b.log_volume)}});
    }
  doc["log_volume_ratios"] = ratios;

  if (samples_path) {
    const SampleFile sf = read_samples_csv(ctx.resolve(*samples_path));
    const MatrixXd& F = mats[bvm_method];
    const auto d = static_cast<size_t>(F.rows());
    if (sf.names.size() < d ||
        !std::equal(sf.names.begin(), sf.names.begin() + static_cast<long>(d), layout.names().begin()))
      throw SchemaError("$.samples: parameter columns do not match the FIM layout");
    MatrixXd pooled(0, F.rows());
    for (const auto& dr : sf.draws) {
      pooled.conservativeResize(pooled.rows() + dr.rows(), Eigen::NoChange);
      pooled.bottomRows(dr.rows()) = dr.leftCols(F.rows());
    }
    try {
      const BvmReport b = bvm_report(pooled, F, theta0.head(F.rows()));
      doc["bvm"] = {{"fim_method", bvm_method},
                    {"draws", pooled.rows()},
                    {"log_volume_ratio", b.log_volume_ratio},
                    {"z_scores", vector_json(b.z_scores)},
                    {"mahalanobis", b.mahalanobis}};
    } catch (const NumericalError& e) {
      doc["bvm"] = {{"fim_method", bvm_method}, {"singular", true}, {"error", e.what()}};
    }
  }

  const fs::path js = ctx.out / "fim.json";
  write_json(js, doc, ctx.prov);
  ctx.wrote(js);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_hokalman(const Context& ctx) {
  const Fields root(ctx.cfg, "$");
  root.has("seed");
  const DataSource data = read_data(root.object("data"), ctx);
  std::optional<SystemSpec> truth = data.system;
  if (root.has("truth")) truth = read_system(root.object("truth"), ctx.seed);
  int n = 0;
  if (root.has("state_dim")) n = root.integer("state_dim");
  else if (truth) n = truth->system.state_dim();
  else throw SchemaError("$.state_dim: required when no truth system is given");
  const HoKalmanConfig cfg = root.has("hokalman") ? read_hokalman(root.object("hokalman"), n)
                                                  : read_hokalman(Fields(json::object(), "$.hokalman"), n);
  root.finish();

  const HoKalmanResult r = ho_kalman_from_data(data.traj, cfg);
  json doc;
  doc["T"] = data.traj.length();
  doc["state_dim"] = cfg.state_dim;
  doc["block_rows"] = cfg.rows();
  doc["block_cols"] = cfg.cols();
  doc["markov_estimation"] =
      cfg.markov_estimation == MarkovEstimation::LeastSquares ? "least_squares" : "impulse_direct";
  doc["system"] = system_json(r.system);
  doc["singular_values"] = vector_json(r.singular_values);
  doc["order_ambiguous"] = r.order_ambiguous;
  doc["eigenvalues"] = spectrum_json(eigenvalues(r.system.A()));
  if (auto c = try_canonical(r.system, CanonicalForm::Controller)) doc["canonical"] = canonical_json(*c);
  if (truth) {
    const int k = cfg.rows() + cfg.cols();
    double max_err = 0.0;
    for (int t = 0; t < k; ++t)
      max_err = std::max(max_err, (markov_parameter(r.system, t) - markov_parameter(truth->system, t))
                                      .cwiseAbs()
                                      .maxCoeff());
    doc["truth_comparison"] = {{"markov_max_abs_error", max_err},
                               {"markov_count", k},
                               {"hankel_error", hankel_distance(r.system, truth->system, cfg.rows())},
                               {"truth_eigenvalues", spectrum_json(eigenvalues(truth->system.A()))}};
  }
  const fs::path js = ctx.out / "hokalman.json";
  write_json(js, doc, ctx.prov);
  ctx.wrote(js);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct NamedPrior {
  std::string name;
  ParamPriorSpec prior;
};

int cmd_experiment(const Context& ctx) {
  const Fields root(ctx.cfg, "$");
  root.has("seed");

  std::vector<SystemSpec> systems;
  {
    const json& sj = root.raw("systems");
    if (sj.is_array()) {
      for (size_t i = 0; i < sj.size(); ++i)
        systems.push_back(read_system(Fields(sj[i], "$.systems[" + std::to_string(i) + "]"),
                                      derive_seed(ctx.seed, 0xC0DE, i)));
    } else {
      const Fields f(sj, "$.systems");
      const int count = f.integer("count");
      const int n = f.integer("state_dim");
      if (count < 1) throw SchemaError("$.systems.count: must be >= 1");
      if (n < 1 || n > 12) throw SchemaError("$.systems.state_dim: must lie in [1, 12]");
      const EigenPriorSpec ep = f.has("eigen_prior") ? read_eigen_prior(f.object("eigen_prior"), n)
                                                     : EigenPriorSpec::uniform_stable_coeffs(n);
      const int max_rejects = f.integer("max_rejects", 10000);
      f.finish();
      for (int i = 0; i < count; ++i) {
        auto g = random_stable_system(n, ep, derive_seed(ctx.seed, 0xC0DE, static_cast<std::uint64_t>(i)),
                                      max_rejects);
        systems.push_back({std::move(g.system), std::nullopt, g.rejections, "random"});
      }
    }
  }
  if (systems.empty()) throw SchemaError("$.systems: at least one system is required");
  const int n = systems.front().system.state_dim();
  for (size_t i = 0; i < systems.size(); ++i)
    if (!systems[i].system.is_siso() || systems[i].system.state_dim() != n)
      throw SchemaError("$.systems[" + std::to_string(i) +
                        "]: all systems must be SISO with the same state dimension");

  const std::vector<int> Ts = root.int_list("T");
  for (size_t i = 0; i < Ts.size(); ++i)
    if (Ts[i] < 1) throw SchemaError("$.T[" + std::to_string(i) + "]: must be >= 1");
  const NoiseConfig noise = root.has("noise") ? read_noise(root.object("noise")) : NoiseConfig{};
  std::vector<NamedPrior> priors;
  {
    const json& pj = root.raw("priors");
    if (!pj.is_array() || pj.empty()) throw SchemaError("$.priors: expected a non-empty array");
    for (size_t i = 0; i < pj.size(); ++i) {
      const std::string path = "$.priors[" + std::to_string(i) + "]";
      const Fields f(pj[i], path);
      NamedPrior np;
      np.name = f.string("name");
      np.prior = f.has("prior") ? read_param_prior(f.object("prior"), n)
                                : default_prior(n);
      f.finish();
      for (const auto& other : priors)
        if (other.name == np.name) throw SchemaError(path + ".name: duplicate prior name");
      priors.push_back(std::move(np));
    }
  }
  std::vector<std::string> methods = {"pme", "map", "hke"};
  if (root.has("methods")) methods = root.string_list("methods");
  for (size_t i = 0; i < methods.size(); ++i)
    if (methods[i] != "pme" && methods[i] != "map" && methods[i] != "hke")
      throw SchemaError("$.methods[" + std::to_string(i) + "]: expected pme, map or hke");
  const SamplerConfig sampler_base =
      root.has("sampler") ? read_sampler(root.object("sampler"), ctx.seed, 1)
                          : read_sampler(Fields(json::object(), "$.sampler"), ctx.seed, 1);
  HoKalmanConfig hk = root.has("hokalman") ? read_hokalman(root.object("hokalman"), n)
                                           : read_hokalman(Fields(json::object(), "$.hokalman"), n);
  hk.state_dim = n;
  const int hankel_blocks = root.integer("hankel_blocks", 2);
  if (hankel_blocks < 1) throw SchemaError("$.hankel_blocks: must be >= 1");
  const bool feedthrough = root.boolean("include_feedthrough", false);
  root.finish();

  const bool want_bayes = std::count(methods.begin(), methods.end(), "hke") <
                          static_cast<long>(methods.size());
  const bool want_hke = std::find(methods.begin(), methods.end(), "hke") != methods.end();

  const size_t S = systems.size(), NT = Ts.size(), NP = priors.size();
  std::vector<CanonicalSiso> truths;
  for (size_t i = 0; i < S; ++i) {
    auto c = try_canonical(systems[i].system, CanonicalForm::Controller);
    if (!c) throw SchemaError("$.systems[" + std::to_string(i) + "]: system is not controllable");
    c->d0 = systems[i].system.D()(0, 0);
    truths.push_back(*c);
  }

  // One data set per (system, T); the cells share it across priors and methods.
  struct BayesOut {
    bool ok = false;
    BayesCell cell;
    std::string failure;
  };
  std::vector<BayesOut> bayes(S * NT * NP);
  std::vector<EstimateError> hke(S * NT);
  auto data_for = [&](size_t i, size_t j) {
    return experiment_data(systems[i].system, noise.spec(n, 1), Ts[j],
                           derive_seed(ctx.seed, 0xDA7A, i, j));
  };

  const int n_bayes = want_bayes ? static_cast<int>(S * NT * NP) : 0;
  const int n_hke = want_hke ? static_cast<int>(S * NT) : 0;
  parallel_for(n_bayes + n_hke, ctx.jobs, [&](int task) {
    if (task < n_bayes) {
      const size_t k = static_cast<size_t>(task) % NP;
      const size_t j = (static_cast<size_t>(task) / NP) % NT;
      const size_t i = static_cast<size_t>(task) / (NP * NT);
      BayesOut& o = bayes[static_cast<size_t>(task)];
      try {
        ParamLayout layout = ParamLayout::canonical(n, feedthrough);
        layout.sigma_state = noise.sigma_state;
        layout.sigma_obs = noise.sigma_obs;
        layout.p0_scale = noise.p0_scale;
        SamplerConfig sc = sampler_base;
        sc.seed = derive_seed(ctx.seed, i, j, k + 1);
        o.cell = run_bayes_cell(truths[i], data_for(i, j), layout, priors[k].prior, sc,
                                hankel_blocks);
        o.ok = true;
      } catch (const std::exception& e) {
        o.failure = e.what();
      }
    } else {
      const size_t t = static_cast<size_t>(task - n_bayes);
      const size_t j = t % NT, i = t / NT;
      hke[t] = run_hke_cell(truths[i], data_for(i, j), hk, hankel_blocks);
    }
  });

  CsvTable cells;
  cells.header = {"system", "T",     "prior",     "method",      "status",
                  "param_mse", "hankel_error", "max_rhat", "divergences"};
  // (T index, prior index, method) -> errors, for the summary
  std::map<std::tuple<size_t, size_t, size_t>, std::pair<std::vector<double>, std::vector<double>>> agg;
  auto emit = [&](size_t i, size_t j, size_t k, size_t mi, const EstimateError& e,
                  const std::string& fail, double rhat, int div) {
    const bool ok = fail.empty() && e.ok;
    const std::string status = ok ? "ok" : "failed: " + sanitize(fail.empty() ? e.failure : fail);
    cells.rows.push_back({std::to_string(i), std::to_string(Ts[j]), priors[k].name, methods[mi], status,
                          ok ? format_double(e.param_mse) : "nan",
                          ok ? format_double(e.hankel_error) : "nan",
                          methods[mi] == "hke" ? "nan" : format_double(rhat), std::to_string(div)});
    auto& slot = agg[{j, k, mi}];
    if (ok) {
      slot.first.push_back(e.param_mse);
      slot.second.push_back(e.hankel_error);
    }
  };
  for (size_t i = 0; i < S; ++i)
    for (size_t j = 0; j < NT; ++j)
      for (size_t k = 0; k < NP; ++k)
        for (size_t mi = 0; mi < methods.size(); ++mi) {
          if (methods[mi] == "hke") {
            emit(i, j, k, mi, hke[i * NT + j], "", 0.0, 0);
          } else {
            const BayesOut& o = bayes[(i * NT + j) * NP + k];
            emit(i, j, k, mi, methods[mi] == "pme" ? o.cell.pme : o.cell.map, o.failure,
                 o.cell.max_rhat, o.cell.divergences);
          }
        }
  const fs::path cells_path = ctx.out / "experiment_cells.csv";
  write_csv(cells_path, cells, ctx.prov);
  ctx.wrote(cells_path);

  CsvTable summary;
  summary.header = {"T",          "prior",      "method",      "n_ok",        "n_cells",
                    "mse_median", "mse_p05",    "mse_p95",     "hankel_median", "hankel_p05",
                    "hankel_p95"};
  for (size_t j = 0; j < NT; ++j)
    for (size_t k = 0; k < NP; ++k)
      for (size_t mi = 0; mi < methods.size(); ++mi) {
        const auto& slot = agg[{j, k, mi}];
        const Percentiles pm = percentiles(slot.first), ph = percentiles(slot.second);
        auto num = [&](const Percentiles& p, double v) { return p.n ? format_double(v) : "nan"; };
        summary.rows.push_back({std::to_string(Ts[j]), priors[k].name, methods[mi],
                                std::to_string(pm.n), std::to_string(S), num(pm, pm.median),
                                num(pm, pm.p05), num(pm, pm.p95), num(ph, ph.median),
                                num(ph, ph.p05), num(ph, ph.p95)});
      }
  const fs::path sum_path = ctx.out / "experiment_summary.csv";
  write_csv(sum_path, summary, ctx.prov);
  ctx.wrote(sum_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_diagnose(const Context& ctx) {
  const Fields root(ctx.cfg, "$");
  root.has("seed");
  const std::string path = root.string("samples");
  const double threshold = root.number("rhat_threshold", 1.1);
  root.finish();

  const SampleFile sf = read_samples_csv(ctx.resolve(path));
  if (sf.draws.front().rows() < 4) throw SchemaError("$.samples: need at least 4 draws per chain");
  json params = json::array();
  double max_rhat = 0.0, min_ess = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < sf.names.size(); ++j) {
    ScalarChains chains;
    for (const auto& d : sf.draws) chains.emplace_back(d.col(static_cast<Eigen::Index>(j)));
    const double r = split_rhat(chains), e = bulk_ess(chains);
    max_rhat = std::max(max_rhat, r);
    min_ess = std::min(min_ess, e);
    params.push_back({{"name", sf.names[j]}, {"rhat", r}, {"ess", e}});
  }
  json per_chain = json::array();
  int total = 0;
  for (const auto& dv : sf.divergent) {
    int c = 0;
    for (int v : dv) c += v != 0;
    per_chain.push_back(c);
    total += c;
  }
  const bool converged = max_rhat <= threshold;
  json doc = {{"chains", sf.draws.size()},
              {"draws_per_chain", sf.draws.front().rows()},
              {"parameters", params},
              {"divergences", {{"total", total}, {"per_chain", per_chain}}},
              {"convergence",
               {{"max_rhat", max_rhat},
                {"min_ess", min_ess},
                {"rhat_threshold", threshold},
                {"converged", converged}}}};
  const fs::path js = ctx.out / "diagnostics.json";
  write_json(js, doc, ctx.prov);
  ctx.wrote(js);
  if (ctx.strict && !converged) {
    *ctx.log << "not converged: max rhat " << max_rhat << " > " << threshold << "\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int jobs_from_env(int fallback) {
  const char* env = std::getenv("CANON_LTI_THREADS");
  if (!env || !*env) return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024)
    throw SchemaError(std::string("CANON_LTI_THREADS: expected a positive integer, got '") + env + "'");
  return static_cast<int>(v);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian identification of linear state-space systems", "canon-lti"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_flag;
  int jobs = 1;
  bool strict = false, allow_standard = false;
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed_flag, "master seed (overrides the config)");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--strict", strict, "exit with code 4 when chains have not converged");
  app.add_flag("--allow-standard", allow_standard,
               "allow inference in non-identifiable standard coordinates");

  using Handler = int (*)(const Context&);
  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> commands = {
      {"simulate", {"simulate a trajectory", cmd_simulate}},
      {"infer", {"sample the posterior", cmd_infer}},
      {"fim", {"Fisher information and ellipsoid volumes", cmd_fim}},
      {"hokalman", {"Ho-Kalman realization", cmd_hokalman}},
      {"experiment", {"estimator accuracy grid", cmd_experiment}},
      {"diagnose", {"convergence diagnostics of a samples file", cmd_diagnose}},
  };
  for (const auto& [name, info] : commands) app.add_subcommand(name, info.first);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitSchema;
  }

  try {
    Context ctx;
    const fs::path cfg_path(config_path);
    ctx.cfg = load_config(cfg_path);
    if (!ctx.cfg.is_object()) throw SchemaError("$: config must be a JSON object");
    ctx.base = cfg_path.has_parent_path() ? cfg_path.parent_path() : fs::path(".");
    ctx.out = out_dir;
    ctx.jobs = jobs_from_env(jobs);
    ctx.strict = strict;
    ctx.allow_standard = allow_standard;
    ctx.log = &out;
    if (seed_flag) {
      ctx.seed = *seed_flag;
    } else if (ctx.cfg.contains("seed")) {
      if (!ctx.cfg["seed"].is_number_unsigned())
        throw SchemaError("$.seed: expected a non-negative integer");
      ctx.seed = ctx.cfg["seed"].get<std::uint64_t>();
    }
    const std::string name = app.get_subcommands().front()->get_name();
    json effective = ctx.cfg;
    effective["seed"] = ctx.seed;
    effective["command"] = name;
    ctx.prov = {tool_version(), config_hash(effective), ctx.seed, name};
    for (const auto& [cmd, info] : commands)
      if (cmd == name) return info.second(ctx);
    return kExitFailure;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace canon_lti::cli
