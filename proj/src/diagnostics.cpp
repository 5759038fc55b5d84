#include "canon_lti/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace canon_lti {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_chains(const ScalarChains& chains) {
  if (chains.empty()) throw std::invalid_argument("diagnostics: no chains");
  const auto n = chains.front().size();
  if (n < 4) throw std::invalid_argument("diagnostics: chains are too short");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("diagnostics: chains differ in length");
}

bool any_constant(const ScalarChains& chains) {
  for (const auto& c : chains)
    if (c.maxCoeff() == c.minCoeff()) return true;
  return false;
}

double variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

// Biased autocovariance at one lag.
double autocov(const Eigen::VectorXd& v, double mean, Eigen::Index lag) {
  const auto n = v.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i + lag < n; ++i) s += (v(i) - mean) * (v(i + lag) - mean);
  return s / static_cast<double>(n);
}

double median(std::vector<double> v) {
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    m = 0.5 * (m + lo);
  }
  return m;
}

}  // namespace

ScalarChains split_chains(const ScalarChains& chains) {
  check_chains(chains);
  const auto n = chains.front().size();
  const auto half = n / 2;
  ScalarChains out;
  out.reserve(chains.size() * 2);
  for (const auto& c : chains) {
    out.emplace_back(c.head(half));
    out.emplace_back(c.tail(half));  // drops the middle draw when n is odd
  }
  return out;
}

ScalarChains rank_normalize(const ScalarChains& chains) {
  std::vector<std::pair<double, size_t>> pooled;
  for (size_t c = 0; c < chains.size(); ++c)
    for (Eigen::Index i = 0; i < chains[c].size(); ++i)
      pooled.emplace_back(chains[c](i), pooled.size());
  const size_t S = pooled.size();
  std::vector<size_t> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return pooled[a].first < pooled[b].first; });
  std::vector<double> rank(S);
  for (size_t i = 0; i < S;) {
    size_t j = i;
    while (j + 1 < S && pooled[order[j + 1]].first == pooled[order[i]].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> normal;
  ScalarChains out;
  size_t k = 0;
  for (const auto& c : chains) {
    Eigen::VectorXd z(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i, ++k)
      z(i) = boost::math::quantile(normal, (rank[k] - 0.375) / (static_cast<double>(S) + 0.25));
    out.push_back(std::move(z));
  }
  return out;
}

double rhat_basic(const ScalarChains& chains) {
  check_chains(chains);
  if (any_constant(chains)) return kInf;
  const double n = static_cast<double>(chains.front().size());
  const auto m = chains.size();
  Eigen::VectorXd means(static_cast<Eigen::Index>(m));
  double w = 0.0;
  for (size_t c = 0; c < m; ++c) {
    means(static_cast<Eigen::Index>(c)) = chains[c].mean();
    w += variance(chains[c]);
  }
  w /= static_cast<double>(m);
  const double b_over_n = m > 1 ? variance(means) : 0.0;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double split_rhat(const ScalarChains& chains) {
  const ScalarChains split = split_chains(chains);
  if (any_constant(split)) return kInf;
  const double bulk = rhat_basic(rank_normalize(split));
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.data(), c.data() + c.size());
  const double med = median(all);
  ScalarChains folded;
  for (const auto& c : split) folded.emplace_back((c.array() - med).abs().matrix());
  const double tail = any_constant(folded) ? kInf : rhat_basic(rank_normalize(folded));
  return std::max(bulk, tail);
}

double ess_basic(const ScalarChains& input) {
  const ScalarChains chains = split_chains(input);
  if (any_constant(chains)) return 0.0;
  const auto m = chains.size();
  const auto n = chains.front().size();
  std::vector<double> means(m), acov0(m);
  double mean_var = 0.0;
  for (size_t c = 0; c < m; ++c) {
    means[c] = chains[c].mean();
    acov0[c] = autocov(chains[c], means[c], 0);
    mean_var += acov0[c] * static_cast<double>(n) / static_cast<double>(n - 1);
  }
  mean_var /= static_cast<double>(m);
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) {
    Eigen::Map<const Eigen::VectorXd> mv(means.data(), static_cast<Eigen::Index>(m));
    var_plus += variance(mv);
  }
  auto mean_acov = [&](Eigen::Index lag) {
    double s = 0.0;
    for (size_t c = 0; c < m; ++c) s += autocov(chains[c], means[c], lag);
    return s / static_cast<double>(m);
  };

  std::vector<double> rho(static_cast<size_t>(n), 0.0);
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  Eigen::Index s = 1;
  while (s < n - 4 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(s + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(s + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[static_cast<size_t>(s + 1)] = rho_even;
      rho[static_cast<size_t>(s + 2)] = rho_odd;
    }
    s += 2;
  }
  const Eigen::Index max_s = s;
  if (rho_even > 0.0) rho[static_cast<size_t>(max_s + 1)] = rho_even;
  for (Eigen::Index k = 1; k <= max_s - 3; k += 2) {
    const auto i = static_cast<size_t>(k);
    if (rho[i + 1] + rho[i + 2] > rho[i - 1] + rho[i]) {
      rho[i + 1] = 0.5 * (rho[i - 1] + rho[i]);
      rho[i + 2] = rho[i + 1];
    }
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < max_s; ++k) sum += rho[static_cast<size_t>(k)];
  const double tau = -1.0 + 2.0 * sum + rho[static_cast<size_t>(max_s + 1)];
  const double total = static_cast<double>(m * static_cast<size_t>(n));
  return std::min(total / tau, total);
}

double bulk_ess(const ScalarChains& chains) {
  check_chains(chains);
  if (any_constant(split_chains(chains))) return 0.0;
  // Rank normalization is applied to the split chains; splitting again inside
  // ess_basic would halve them twice, so normalize the unsplit chains jointly.
  return ess_basic(rank_normalize(chains));
}

}  // namespace canon_lti
