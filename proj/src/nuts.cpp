#include "canon_lti/nuts.hpp"

#include <cmath>
#include <limits>

#include "canon_lti/errors.hpp"

namespace canon_lti {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  VectorXd q, p, grad;
  double logp = -kInf;
};

// Dual averaging of log step size.
class StepSizeAdapter {
 public:
  void restart(double step) {
    mu_ = std::log(10.0 * step);
    counter_ = 0.0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double accept_stat, double delta) {
    counter_ += 1.0;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double mu_ = 0.0, counter_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
};

// Welford accumulator for the diagonal metric.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(Eigen::Index d) : mean_(VectorXd::Zero(d)), m2_(VectorXd::Zero(d)) {}
  void add(const VectorXd& q) {
    n_ += 1.0;
    const VectorXd delta = q - mean_;
    mean_ += delta / n_;
    m2_ += delta.cwiseProduct(q - mean_);
  }
  double count() const { return n_; }
  VectorXd variance() const { return m2_ / (n_ - 1.0); }
  void restart() {
    n_ = 0.0;
    mean_.setZero();
    m2_.setZero();
  }

 private:
  double n_ = 0.0;
  VectorXd mean_, m2_;
};

class CovarianceEstimator {
 public:
  explicit CovarianceEstimator(Eigen::Index d) : mean_(VectorXd::Zero(d)), m2_(MatrixXd::Zero(d, d)) {}
  void add(const VectorXd& q) {
    n_ += 1.0;
    const VectorXd delta = q - mean_;
    mean_ += delta / n_;
    m2_ += (q - mean_) * delta.transpose();
  }
  MatrixXd covariance() const { return m2_ / (n_ - 1.0); }
  void restart() {
    n_ = 0.0;
    mean_.setZero();
    m2_.setZero();
  }

 private:
  double n_ = 0.0;
  VectorXd mean_;
  MatrixXd m2_;
};

class Nuts {
 public:
  Nuts(const LogDensityFn& f, const NutsConfig& cfg, Rng& rng, Eigen::Index dim)
      : f_(f), cfg_(cfg), rng_(rng), inv_metric_(VectorXd::Ones(dim)) {
    if (cfg.dense_metric) set_dense_metric(MatrixXd::Identity(dim, dim));
  }

  // Returns false (metric unchanged) if the matrix is not positive definite.
  bool set_dense_metric(const MatrixXd& inv_metric) {
    Eigen::LLT<MatrixXd> llt(inv_metric);
    if (llt.info() != Eigen::Success) return false;
    dense_ = inv_metric;
    dense_chol_ = llt.matrixL();
    inv_metric_ = dense_.diagonal();
    return true;
  }
  const MatrixXd& dense_metric() const { return dense_; }

  void evaluate(PhasePoint& z) const {
    z.logp = f_(z.q, z.grad);
    if (std::isnan(z.logp)) z.logp = -kInf;
  }

  double hamiltonian(const PhasePoint& z) const {
    if (!(z.logp > -kInf)) return kInf;
    return -z.logp + 0.5 * z.p.dot(sharp(z));
  }

  void sample_momentum(PhasePoint& z) {
    if (cfg_.dense_metric) {
      // p ~ N(0, M) with M^{-1} = L L^T: p = L^{-T} xi.
      VectorXd xi(z.p.size());
      for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal_(rng_);
      z.p = dense_chol_.transpose().triangularView<Eigen::Upper>().solve(xi);
      return;
    }
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p(i) = normal_(rng_) / std::sqrt(inv_metric_(i));
  }

  void leapfrog(PhasePoint& z, double eps) const {
    if (!(z.logp > -kInf)) return;
    z.p += 0.5 * eps * z.grad;
    z.q += eps * sharp(z);
    evaluate(z);
    if (z.logp > -kInf) z.p += 0.5 * eps * z.grad;
  }

  VectorXd sharp(const PhasePoint& z) const {
    return cfg_.dense_metric ? VectorXd(dense_ * z.p) : VectorXd(inv_metric_.cwiseProduct(z.p));
  }

  static bool criterion(const VectorXd& p_sharp_minus, const VectorXd& p_sharp_plus,
                        const VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  double uniform() { return unif_(rng_); }

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, VectorXd& p_sharp_beg,
                  VectorXd& p_sharp_end, VectorXd& rho, VectorXd& p_beg, VectorXd& p_end,
                  double H0, double sign, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(z, sign * step_);
      ++n_leapfrog;
      double h = hamiltonian(z);
      if (std::isnan(h)) h = kInf;
      if (h - H0 > cfg_.max_delta_h) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, H0 - h);
      sum_metro_prob += H0 - h > 0.0 ? 1.0 : std::exp(H0 - h);
      z_propose = z;
      p_sharp_beg = sharp(z);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    const auto d = z.q.size();
    double log_sum_weight_init = -kInf;
    VectorXd p_init_end(d), p_sharp_init_end(d), rho_init = VectorXd::Zero(d);
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, H0, sign, n_leapfrog, log_sum_weight_init, sum_metro_prob))
      return false;

    PhasePoint z_propose_final = z;
    double log_sum_weight_final = -kInf;
    VectorXd p_final_beg(d), p_sharp_final_beg(d), rho_final = VectorXd::Zero(d);
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, H0, sign, n_leapfrog, log_sum_weight_final,
                    sum_metro_prob))
      return false;

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform() < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  struct Transition {
    double accept_stat = 0.0;
    int depth = 0;
    int n_leapfrog = 0;
    bool divergent = false;
  };

  Transition transition(PhasePoint& current) {
    PhasePoint z = current;
    sample_momentum(z);
    const double H0 = hamiltonian(z);
    PhasePoint z_fwd = z, z_bck = z, z_sample = z, z_propose = z;

    VectorXd p_fwd_fwd = z.p, p_sharp_fwd_fwd = sharp(z);
    VectorXd p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
    VectorXd p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
    VectorXd p_bck_bck = z.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
    VectorXd rho = z.p;

    double log_sum_weight = 0.0;
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    int depth = 0;
    divergent_ = false;
    const auto d = z.q.size();

    while (depth < cfg_.max_tree_depth) {
      VectorXd rho_fwd = VectorXd::Zero(d), rho_bck = VectorXd::Zero(d);
      bool valid = false;
      double log_sum_weight_subtree = -kInf;
      if (uniform() > 0.5) {
        PhasePoint zz = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, zz, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd,
                           p_fwd_bck, p_fwd_fwd, H0, 1.0, n_leapfrog, log_sum_weight_subtree,
                           sum_metro_prob);
        z_fwd = std::move(zz);
      } else {
        PhasePoint zz = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, zz, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck,
                           p_bck_fwd, p_bck_bck, H0, -1.0, n_leapfrog, log_sum_weight_subtree,
                           sum_metro_prob);
        z_bck = std::move(zz);
      }
      if (!valid) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    current = std::move(z_sample);
    Transition tr;
    tr.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    tr.depth = depth;
    tr.n_leapfrog = n_leapfrog;
    tr.divergent = divergent_;
    return tr;
  }

  // Heuristic: double or halve the step until the one-step acceptance crosses 0.8.
  void init_step_size(const PhasePoint& current) {
    if (!(step_ > 0.0) || step_ > 1e7 || std::isnan(step_)) return;
    auto delta_h = [&]() {
      PhasePoint z = current;
      sample_momentum(z);
      const double H0 = hamiltonian(z);
      leapfrog(z, step_);
      double h = hamiltonian(z);
      if (std::isnan(h)) h = kInf;
      return H0 - h;
    };
    const double log08 = std::log(0.8);
    const int direction = delta_h() > log08 ? 1 : -1;
    for (int iter = 0; iter < 200; ++iter) {
      const double dh = delta_h();
      if (direction == 1 && !(dh > log08)) break;
      if (direction == -1 && !(dh < log08)) break;
      step_ = direction == 1 ? 2.0 * step_ : 0.5 * step_;
      if (step_ > 1e7) throw NumericalError("NUTS: step size diverged to infinity; posterior may be improper");
      if (step_ == 0.0) throw NumericalError("NUTS: step size collapsed to zero");
    }
  }

  double step_ = 1.0;
  VectorXd& inv_metric() { return inv_metric_; }

 private:
  const LogDensityFn& f_;
  const NutsConfig& cfg_;
  Rng& rng_;
  VectorXd inv_metric_;
  MatrixXd dense_, dense_chol_;
  bool divergent_ = false;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

// Stan-style warm-up schedule: fast initial buffer, doubling slow windows for
// the metric, fast terminal buffer.
struct WarmupSchedule {
  int num_warmup = 0;
  int init_buffer = 0, term_buffer = 0, base_window = 0;
  bool adapt_metric = true;
  int window_size = 0;
  int next_window = 0;

  WarmupSchedule(int warmup, const NutsConfig& cfg) : num_warmup(warmup) {
    init_buffer = cfg.init_buffer;
    term_buffer = cfg.term_buffer;
    base_window = cfg.base_window;
    if (warmup < 20) {
      adapt_metric = false;
    } else if (init_buffer + base_window + term_buffer > warmup) {
      init_buffer = static_cast<int>(0.15 * warmup);
      term_buffer = static_cast<int>(0.1 * warmup);
      base_window = warmup - (init_buffer + term_buffer);
    }
    window_size = base_window;
    next_window = init_buffer + window_size - 1;
  }

  bool in_window(int counter) const {
    return counter >= init_buffer && counter < num_warmup - term_buffer && counter != num_warmup;
  }
  bool end_of_window(int counter) const {
    return counter == next_window && counter != num_warmup;
  }
  void compute_next_window(int counter) {
    if (next_window == num_warmup - term_buffer - 1) return;
    window_size *= 2;
    next_window = counter + window_size;
    if (next_window != num_warmup - term_buffer - 1) {
      const int boundary = next_window + 2 * window_size;
      if (boundary >= num_warmup - term_buffer) next_window = num_warmup - term_buffer - 1;
    }
  }
};

}  // namespace

NutsChainResult run_nuts_chain(const LogDensityFn& log_density, const VectorXd& init,
                               int n_warmup, int n_samples, const NutsConfig& config, Rng& rng) {
  if (n_warmup < 0 || n_samples < 1)
    throw std::invalid_argument("run_nuts_chain: need n_warmup >= 0 and n_samples >= 1");
  if (!(config.target_accept > 0.0 && config.target_accept < 1.0))
    throw std::invalid_argument("run_nuts_chain: target_accept must lie in (0, 1)");
  if (config.max_tree_depth < 1) throw std::invalid_argument("run_nuts_chain: max_tree_depth >= 1");

  const auto dim = init.size();
  Nuts nuts(log_density, config, rng, dim);
  nuts.step_ = config.init_step_size;

  PhasePoint current;
  current.q = init;
  current.p = VectorXd::Zero(dim);
  current.grad = VectorXd::Zero(dim);
  nuts.evaluate(current);
  if (!(current.logp > -kInf))
    throw NumericalError("run_nuts_chain: initial point has zero posterior density");

  NutsChainResult out;
  StepSizeAdapter adapter;
  WarmupSchedule schedule(n_warmup, config);
  VarianceEstimator estimator(dim);
  CovarianceEstimator cov_estimator(dim);
  if (n_warmup > 0) {
    nuts.init_step_size(current);
    adapter.restart(nuts.step_);
  }

  for (int it = 0; it < n_warmup; ++it) {
    const auto tr = nuts.transition(current);
    if (tr.divergent) ++out.warmup_divergences;
    nuts.step_ = adapter.learn(tr.accept_stat, config.target_accept);
    if (!schedule.adapt_metric) continue;
    if (schedule.in_window(it)) {
      estimator.add(current.q);
      if (config.dense_metric) cov_estimator.add(current.q);
    }
    if (schedule.end_of_window(it)) {
      schedule.compute_next_window(it);
      const double n = estimator.count();
      const double shrink = n / (n + 5.0), ridge = 1e-3 * (5.0 / (n + 5.0));
      if (config.dense_metric) {
        MatrixXd cov = shrink * cov_estimator.covariance();
        cov.diagonal().array() += ridge;
        if (cov.allFinite()) nuts.set_dense_metric(0.5 * (cov + cov.transpose()));
      } else {
        VectorXd var = shrink * estimator.variance() + ridge * VectorXd::Ones(dim);
        if (var.allFinite() && (var.array() > 0.0).all()) nuts.inv_metric() = var;
      }
      estimator.restart();
      cov_estimator.restart();
      nuts.init_step_size(current);
      adapter.restart(nuts.step_);
    }
  }
  if (n_warmup > 0) {
    if (out.warmup_divergences == n_warmup)
      throw NumericalError("run_nuts_chain: every warm-up transition diverged (" +
                           std::to_string(n_warmup) + " of " + std::to_string(n_warmup) + ")");
    nuts.step_ = adapter.final_step();
  }

  out.draws.resize(n_samples, dim);
  out.log_post.resize(n_samples);
  out.accept_stat.resize(n_samples);
  out.divergent.resize(static_cast<size_t>(n_samples));
  out.tree_depth.resize(static_cast<size_t>(n_samples));
  out.n_leapfrog.resize(static_cast<size_t>(n_samples));
  for (int it = 0; it < n_samples; ++it) {
    const auto tr = nuts.transition(current);
    out.draws.row(it) = current.q.transpose();
    out.log_post(it) = current.logp;
    out.accept_stat(it) = tr.accept_stat;
    out.divergent[static_cast<size_t>(it)] = tr.divergent ? 1 : 0;
    out.tree_depth[static_cast<size_t>(it)] = tr.depth;
    out.n_leapfrog[static_cast<size_t>(it)] = tr.n_leapfrog;
    if (tr.divergent) ++out.sampling_divergences;
  }
  out.step_size = nuts.step_;
  out.inv_metric = nuts.inv_metric();
  if (config.dense_metric) out.dense_inv_metric = nuts.dense_metric();
  return out;
}

}  // namespace canon_lti
