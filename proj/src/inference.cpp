#include "canon_lti/inference.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "canon_lti/baselines.hpp"
#include "canon_lti/canonical.hpp"
#include "canon_lti/diagnostics.hpp"
#include "canon_lti/errors.hpp"
#include "canon_lti/likelihood.hpp"

namespace canon_lti {

void SamplerConfig::validate() const {
  if (n_chains < 1) throw std::invalid_argument("SamplerConfig: n_chains must be >= 1");
  if (n_warmup < 0 || n_warmup >= n_steps)
    throw std::invalid_argument("SamplerConfig: need 0 <= n_warmup < n_steps");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("SamplerConfig: target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw std::invalid_argument("SamplerConfig: max_tree_depth >= 1");
  if (init_strategy == InitStrategy::Provided &&
      initial_points.size() != static_cast<size_t>(n_chains))
    throw std::invalid_argument("SamplerConfig: provide one initial point per chain");
  if (n_threads < 1) throw std::invalid_argument("SamplerConfig: n_threads must be >= 1");
}

MatrixXd PosteriorSamples::pooled() const {
  MatrixXd out(n_chains() * n_kept(), dim());
  for (int c = 0; c < n_chains(); ++c) out.middleRows(c * n_kept(), n_kept()) = draws[c];
  return out;
}

VectorXd initial_point(const Posterior& posterior, Rng& rng) {
  const ParamLayout& layout = posterior.layout();
  std::normal_distribution<double> small(0.0, 0.1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    VectorXd theta = VectorXd::Zero(layout.dim());
    if (layout.mode == ParamMode::Canonical) {
      const int n = layout.state_dim;
      theta.head(n) = vieta_forward(sample_eigen_prior(posterior.prior().eigen, rng));
      for (int i = n; i < layout.dynamic_dim(); ++i) theta(i) = small(rng);
    } else {
      for (int i = 0; i < layout.dynamic_dim(); ++i) theta(i) = small(rng);
    }
    VectorXd grad;
    if (std::isfinite(posterior.log_posterior(theta, grad))) return theta;
  }
  throw NumericalError("initial_point: no finite-density start found in 100 attempts");
}

std::optional<VectorXd> hokalman_point(const Posterior& posterior) {
  const ParamLayout& layout = posterior.layout();
  if (layout.mode != ParamMode::Canonical) return std::nullopt;
  try {
    HoKalmanConfig cfg;
    cfg.state_dim = layout.state_dim;
    const StateSpaceSystem sys = ho_kalman_from_data(posterior.trajectory(), cfg).system;
    const CanonicalSiso c = layout.form == CanonicalForm::Controller ? to_controller_form(sys).first
                                                                     : to_observer_form(sys).first;
    VectorXd theta = encode_canonical(layout, c, 1.0, 1.0);
    if (!theta.allFinite()) return std::nullopt;
    return theta;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

namespace {

VectorXd jittered_start(const Posterior& posterior, const VectorXd& center, Rng& rng) {
  std::normal_distribution<double> jitter(0.0, 0.02);
  VectorXd grad;
  for (int attempt = 0; attempt < 100; ++attempt) {
    VectorXd theta = center;
    for (int i = 0; i < posterior.layout().dynamic_dim(); ++i) theta(i) += jitter(rng);
    if (std::isfinite(posterior.log_posterior(theta, grad))) return theta;
  }
  return initial_point(posterior, rng);
}

template <class Task>
void run_parallel(int n_tasks, int n_threads, Task&& task) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (int i = next++; i < n_tasks; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
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

}  // namespace

PosteriorSamples sample_log_density(const SamplerConfig& config, const LogDensityFn& log_density,
                                    const std::vector<VectorXd>& initial_points,
                                    const ParamLayout& layout, std::vector<std::string> names) {
  config.validate();
  if (initial_points.size() != static_cast<size_t>(config.n_chains))
    throw std::invalid_argument("sample_log_density: one initial point per chain required");
  NutsConfig nc;
  nc.target_accept = config.target_accept;
  nc.max_tree_depth = config.max_tree_depth;
  nc.dense_metric = config.dense_metric;

  std::vector<NutsChainResult> results(static_cast<size_t>(config.n_chains));
  run_parallel(config.n_chains, config.n_threads, [&](int c) {
    Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(c) + 1);
    results[static_cast<size_t>(c)] =
        run_nuts_chain(log_density, initial_points[static_cast<size_t>(c)], config.n_warmup,
                       config.n_kept(), nc, rng);
  });

  PosteriorSamples s;
  s.layout = layout;
  s.names = std::move(names);
  s.warmup_len = config.n_warmup;
  long total_div = 0;
  for (auto& r : results) {
    s.draws.push_back(std::move(r.draws));
    s.log_post.push_back(std::move(r.log_post));
    s.divergent.push_back(std::move(r.divergent));
    s.divergence_count.push_back(r.sampling_divergences);
    s.warmup_divergence_count.push_back(r.warmup_divergences);
    s.step_size.push_back(r.step_size);
    s.inv_metric.push_back(std::move(r.inv_metric));
    total_div += r.sampling_divergences;
  }
  s.high_divergence =
      static_cast<double>(total_div) > 0.05 * config.n_chains * static_cast<double>(config.n_kept());
  if (s.n_kept() >= 4) {
    const Diagnostics d = diagnostics(s);
    s.ess = d.ess;
    s.rhat = d.rhat;
  }
  return s;
}

PosteriorSamples sample_posterior(const SamplerConfig& config, const Posterior& posterior) {
  config.validate();
  std::vector<VectorXd> inits;
  if (config.init_strategy == InitStrategy::Provided) {
    inits = config.initial_points;
  } else {
    std::optional<VectorXd> center;
    if (config.init_strategy == InitStrategy::HoKalman) center = hokalman_point(posterior);
    for (int c = 0; c < config.n_chains; ++c) {
      Rng rng = make_rng(config.seed, 0x1000 + static_cast<std::uint64_t>(c));
      inits.push_back(center ? jittered_start(posterior, *center, rng) : initial_point(posterior, rng));
    }
  }
  for (const auto& v : inits) {
    VectorXd g;
    if (v.size() != posterior.dim() || !std::isfinite(posterior.log_posterior(v, g)))
      throw std::invalid_argument("sample_posterior: initial point has zero posterior density");
  }
  return sample_log_density(config, posterior.as_function(), inits, posterior.layout(),
                            posterior.layout().names());
}

Diagnostics diagnostics(const PosteriorSamples& samples) {
  if (samples.n_chains() < 1 || samples.n_kept() < 4)
    throw std::invalid_argument("diagnostics: not enough draws");
  Diagnostics d;
  d.ess.resize(samples.dim());
  d.rhat.resize(samples.dim());
  for (int j = 0; j < samples.dim(); ++j) {
    ScalarChains chains;
    for (const auto& c : samples.draws) chains.emplace_back(c.col(j));
    d.ess(j) = bulk_ess(chains);
    d.rhat(j) = split_rhat(chains);
  }
  return d;
}

PointEstimates point_estimates(const PosteriorSamples& samples) {
  if (samples.n_chains() < 1 || samples.n_kept() < 1)
    throw std::invalid_argument("point_estimates: no draws");
  PointEstimates pe;
  pe.pme = samples.pooled().colwise().mean().transpose();
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (int c = 0; c < samples.n_chains(); ++c)
    for (int i = 0; i < samples.n_kept(); ++i) {
      const double lp = samples.log_post[static_cast<size_t>(c)](i);
      if (!found || lp > best) {
        best = lp;
        pe.map_chain = c;
        pe.map_index = i;
        found = true;
      }
    }
  pe.map = samples.draws[static_cast<size_t>(pe.map_chain)].row(pe.map_index).transpose();
  return pe;
}

VectorXd qoi_of(const ParamLayout& layout, const VectorXd& theta, const QoiSpec& qoi) {
  const DecodedParams d = decode(layout, theta);
  const StateSpaceSystem& sys = d.system;
  switch (qoi.kind) {
    case QoiKind::Eigenvalues: {
      const EigenSpectrum spec = eigenvalues(sys.A());
      VectorXd out(2 * spec.size());
      for (int i = 0; i < spec.size(); ++i) {
        out(2 * i) = spec[i].real();
        out(2 * i + 1) = spec[i].imag();
      }
      return out;
    }
    case QoiKind::Hankel: {
      const MatrixXd H = hankel_matrix(sys, qoi.p, qoi.q);
      return Eigen::Map<const VectorXd>(H.data(), H.size());
    }
    case QoiKind::TransferAt: {
      const MatrixXcd G = transfer_function(sys, qoi.z);
      VectorXd out(2 * G.size());
      for (Eigen::Index i = 0; i < G.size(); ++i) {
        out(2 * i) = G(i).real();
        out(2 * i + 1) = G(i).imag();
      }
      return out;
    }
    case QoiKind::MarkovUpTo: {
      const int per = sys.output_dim() * sys.input_dim();
      VectorXd out(per * (qoi.k + 1));
      for (int t = 0; t <= qoi.k; ++t) {
        const MatrixXd M = markov_parameter(sys, t);
        out.segment(t * per, per) = Eigen::Map<const VectorXd>(M.data(), per);
      }
      return out;
    }
  }
  return {};
}

MatrixXd pushforward_qoi(const PosteriorSamples& samples, const QoiSpec& qoi) {
  const MatrixXd all = samples.pooled();
  MatrixXd out;
  for (Eigen::Index i = 0; i < all.rows(); ++i) {
    const VectorXd v = qoi_of(samples.layout, all.row(i).transpose(), qoi);
    if (i == 0) out.resize(all.rows(), v.size());
    out.row(i) = v.transpose();
  }
  return out;
}

MatrixXd orthogonal_pushforward(const PosteriorSamples& samples, std::uint64_t seed) {
  const ParamLayout& src = samples.layout;
  if (src.mode != ParamMode::Canonical)
    throw std::invalid_argument("orthogonal_pushforward: samples must be canonical");
  ParamLayout dst = ParamLayout::standard(src.state_dim, 1, 1, src.include_feedthrough);
  dst.infer_sigma_state = src.infer_sigma_state;
  dst.infer_sigma_obs = src.infer_sigma_obs;
  dst.sigma_state = src.sigma_state;
  dst.sigma_obs = src.sigma_obs;
  dst.p0_scale = src.p0_scale;
  Rng rng = make_rng(seed);
  const MatrixXd all = samples.pooled();
  MatrixXd out(all.rows(), dst.dim());
  for (Eigen::Index i = 0; i < all.rows(); ++i) {
    const DecodedParams d = decode(src, all.row(i).transpose());
    const MatrixXd Q = haar_orthogonal(rng, src.state_dim);
    const StateSpaceSystem rotated = apply_similarity(d.system, Q);
    out.row(i) = encode_standard(dst, rotated, d.sigma_state, d.sigma_obs).transpose();
  }
  return out;
}

std::vector<MatrixXd> posterior_predictive_states(const PosteriorSamples& samples,
                                                  const Trajectory& traj, int n_draws,
                                                  std::uint64_t seed) {
  if (n_draws < 1) throw std::invalid_argument("posterior_predictive_states: n_draws >= 1");
  const MatrixXd all = samples.pooled();
  if (all.rows() < 1) throw std::invalid_argument("posterior_predictive_states: no draws");
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, all.rows() - 1);
  std::vector<MatrixXd> out;
  out.reserve(static_cast<size_t>(n_draws));
  for (int k = 0; k < n_draws; ++k) {
    const DecodedParams d = decode(samples.layout, all.row(pick(rng)).transpose());
    out.push_back(sample_smoothed_states(d.system, d.noise, traj, rng));
  }
  return out;
}

}  // namespace canon_lti
