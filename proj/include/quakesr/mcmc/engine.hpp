#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/parallel.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/core/stats.hpp"
#include "quakesr/inference/problem.hpp"

namespace quakesr::mcmc {

struct McmcConfig {
  int iterations = 8000;
  int warmup = 4000;
  double omega = 40.0;   // learning rate on the loss
  double rho_pm = 0.9;   // correlation of event-error normals between iterations
  int thin = 4;
  int chains = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double target_acceptance = 0.234;
  int shaping_start = 200;  // warmup iterations before the history covariance is used
  int shaping_interval = 50;

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (!(warmup >= 0 && warmup < iterations)) throw ConfigError("warmup must satisfy 0 <= warmup < iterations");
    if (!(omega >= 0.0)) throw ConfigError("learning rate omega must be >= 0");
    if (!(rho_pm >= 0.0 && rho_pm <= 1.0)) throw ConfigError("rho_pm must lie in [0, 1]");
    if (thin < 1) throw ConfigError("thinning must be >= 1");
    if (chains < 1) throw ConfigError("chain count must be >= 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw ConfigError("target acceptance must lie in (0, 1)");
  }
};

inline double log_target(double log_prior, double loss, double omega) {
  if (!std::isfinite(log_prior)) return -std::numeric_limits<double>::infinity();
  return -omega * loss + log_prior;
}

/// z' = rho z + sqrt(1 - rho^2) nu with fresh standard normals nu.
inline void correlated_refresh(std::vector<double>& z, double rho, Engine& g) {
  std::normal_distribution<double> normal;
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (double& x : z) {
    const double nu = normal(g);
    x = rho * x + s * nu;
  }
}

struct ChainState {
  Eigen::VectorXd theta;
  double loss = 0.0;
  double log_prior = 0.0;
  std::vector<double> aux;  // standard normals behind the event-wide errors
  Eigen::MatrixXd proposal_cov;
  double log_scale = 0.0;
  int iteration = 0;
};

struct TraceRow {
  int iteration = 0;
  Eigen::VectorXd theta;
  double loss = 0.0;
  bool accepted = false;
};

struct ChainResult {
  std::vector<TraceRow> trace;           // every iteration
  std::vector<Eigen::VectorXd> samples;  // thinned, post-warmup
  std::vector<double> sample_losses;
  double acceptance = 0.0;               // over all iterations
  double acceptance_post_warmup = 0.0;
  std::vector<std::string> warnings;
  ChainState final_state;
};

struct McmcResult {
  std::vector<ChainResult> chains;
  std::vector<double> rhat;  // per parameter, split chains, post-warmup samples
  std::vector<double> ess;   // per parameter, summed over chains
  std::vector<std::string> warnings;

  [[nodiscard]] std::vector<Eigen::VectorXd> pooled_samples() const {
    std::vector<Eigen::VectorXd> out;
    for (const auto& c : chains) out.insert(out.end(), c.samples.begin(), c.samples.end());
    return out;
  }

  [[nodiscard]] Eigen::VectorXd posterior_mean() const {
    const auto s = pooled_samples();
    if (s.empty()) throw Error("no posterior samples");
    Eigen::VectorXd m = Eigen::VectorXd::Zero(s.front().size());
    for (const auto& v : s) m += v;
    return m / static_cast<double>(s.size());
  }
};

namespace detail {

template <class Problem>
double chain_loss(const Problem& problem, const Eigen::VectorXd& theta, StreamKey key, const std::vector<double>& aux) {
  if constexpr (AuxiliaryProblem<Problem>) {
    return problem.loss(theta, key, aux);
  } else {
    (void)aux;
    return problem.loss(theta, key);
  }
}

template <class Problem>
std::size_t aux_size(const Problem& problem) {
  if constexpr (AuxiliaryProblem<Problem>) return problem.aux_size();
  else return 0;
}

/// Covariance of draws from the prior, used to shape the first proposals.
template <InferenceProblem Problem>
Eigen::MatrixXd prior_covariance(Problem& problem, StreamKey key, int draws = 400) {
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < draws; ++i) {
    Engine g = key.child(static_cast<std::uint64_t>(i)).engine();
    xs.push_back(problem.sample_prior(g));
  }
  const Eigen::Index d = xs.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : xs) cov.noalias() += (x - mean) * (x - mean).transpose();
  cov /= static_cast<double>(xs.size() - 1);
  cov.diagonal().array() += 1e-10;
  return cov;
}

}  // namespace detail

/// One adaptive random-walk Metropolis chain. During warmup the proposal covariance follows the
/// chain history and a Robbins-Monro log-scale moves the acceptance rate toward the target;
/// both are frozen afterwards. The current state keeps its stored loss (noisy exchange).
template <InferenceProblem Problem>
ChainResult run_chain(const McmcConfig& config, const Problem& problem, ChainState state, StreamKey chain_key) {
  const Eigen::Index d = state.theta.size();
  const double base = 2.38 * 2.38 / static_cast<double>(d);
  std::normal_distribution<double> normal;
  ChainResult out;
  out.trace.reserve(static_cast<std::size_t>(config.iterations));

  Eigen::VectorXd hist_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd hist_m2 = Eigen::MatrixXd::Zero(d, d);
  std::int64_t hist_n = 0;
  Eigen::MatrixXd shape = state.proposal_cov;
  Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(shape).matrixL();

  std::int64_t accepted_total = 0, accepted_post = 0;
  std::int64_t window_accepted = 0, window_n = 0;
  std::vector<double> aux_prop(state.aux.size());
  for (int it = state.iteration; it < config.iterations; ++it) {
    const bool warm = it < config.warmup;
    Engine g = chain_key.child("iter", static_cast<std::uint64_t>(it)).engine();
    Eigen::VectorXd z(d);
    for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(g);
    const Eigen::VectorXd prop = state.theta + std::exp(state.log_scale) * (chol * z);
    aux_prop = state.aux;
    correlated_refresh(aux_prop, config.rho_pm, g);
    const double u = uniform01(g);

    bool accepted = false;
    double accept_prob = 0.0;
    const double lp_new = problem.log_prior(prop);
    if (std::isfinite(lp_new)) {
      const double loss_new = detail::chain_loss(problem, prop, chain_key.child("loss", static_cast<std::uint64_t>(it)),
                                                 aux_prop);
      const double log_ratio =
          log_target(lp_new, loss_new, config.omega) - log_target(state.log_prior, state.loss, config.omega);
      accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
      if (std::log(u) < log_ratio) {
        state.theta = prop;
        state.loss = loss_new;
        state.log_prior = lp_new;
        state.aux.swap(aux_prop);
        accepted = true;
      }
    }
    accepted_total += accepted;
    if (!warm) {
      accepted_post += accepted;
      window_accepted += accepted;
      if (++window_n == 1000) {
        if (window_accepted < 10)
          out.warnings.push_back("acceptance below 0.01 over iterations " + std::to_string(it - 999) + "-" +
                                 std::to_string(it) + ": adaptation may have diverged");
        window_accepted = 0;
        window_n = 0;
      }
    }

    if (warm) {
      const double gamma = std::pow(static_cast<double>(it + 1), -0.6);
      state.log_scale += gamma * (accept_prob - config.target_acceptance);
      ++hist_n;
      const Eigen::VectorXd delta = state.theta - hist_mean;
      hist_mean += delta / static_cast<double>(hist_n);
      hist_m2.noalias() += delta * (state.theta - hist_mean).transpose();
      if (hist_n >= config.shaping_start && it % config.shaping_interval == 0) {
        Eigen::MatrixXd c = hist_m2 / static_cast<double>(hist_n - 1);
        c = 0.5 * (c + c.transpose());
        c.diagonal() += 1e-6 * state.proposal_cov.diagonal() + Eigen::VectorXd::Constant(d, 1e-12);
        Eigen::LLT<Eigen::MatrixXd> llt(base * c);
        if (llt.info() == Eigen::Success) {
          shape = base * c;
          chol = llt.matrixL();
        }
      }
    }

    out.trace.push_back({it, state.theta, state.loss, accepted});
    if (!warm && (it - config.warmup) % config.thin == 0) {
      out.samples.push_back(state.theta);
      out.sample_losses.push_back(state.loss);
    }
    state.iteration = it + 1;
  }
  state.proposal_cov = shape;
  const int post = config.iterations - config.warmup;
  out.acceptance = static_cast<double>(accepted_total) / static_cast<double>(config.iterations);
  out.acceptance_post_warmup = post > 0 ? static_cast<double>(accepted_post) / post : 0.0;
  out.final_state = std::move(state);
  return out;
}

/// Start a chain from a prior draw keyed by the chain index, or from `start` if given.
template <InferenceProblem Problem>
ChainState initial_state(const McmcConfig& config, Problem& problem, int chain,
                         const std::optional<Eigen::VectorXd>& start = {}) {
  const StreamKey key = StreamKey(config.seed).child("chain", static_cast<std::uint64_t>(chain));
  ChainState s;
  Engine g = key.child("start").engine();
  s.theta = start ? *start : problem.sample_prior(g);
  s.log_prior = problem.log_prior(s.theta);
  if (!std::isfinite(s.log_prior)) throw ConfigError("chain start has zero prior density");
  s.aux.resize(detail::aux_size(problem));
  std::normal_distribution<double> normal;
  for (double& x : s.aux) x = normal(g);
  s.loss = detail::chain_loss(problem, s.theta, key.child("loss0"), s.aux);
  const auto d = static_cast<double>(s.theta.size());
  s.proposal_cov = (0.1 * 0.1) * (2.38 * 2.38 / d) *
                   detail::prior_covariance(problem, StreamKey(config.seed).child("prior-cov"));
  s.log_scale = 0.0;
  s.iteration = 0;
  return s;
}

template <InferenceProblem Problem>
McmcResult run_mcmc(const McmcConfig& config, Problem& problem, const std::vector<Eigen::VectorXd>& starts = {}) {
  config.validate();
  McmcResult result;
  std::vector<ChainState> init;
  for (int c = 0; c < config.chains; ++c) {
    std::optional<Eigen::VectorXd> start;
    if (static_cast<std::size_t>(c) < starts.size()) start = starts[static_cast<std::size_t>(c)];
    init.push_back(initial_state(config, problem, c, start));
  }
  result.chains.resize(static_cast<std::size_t>(config.chains));
  const Problem& cproblem = problem;
  parallel_for(static_cast<std::size_t>(config.chains), config.threads, [&](std::size_t c) {
    result.chains[c] = run_chain(config, cproblem, init[c], StreamKey(config.seed).child("chain", c));
  });
  const Eigen::Index d = init.front().theta.size();
  for (Eigen::Index k = 0; k < d; ++k) {
    std::vector<std::vector<double>> per_chain;
    double ess = 0.0;
    for (const auto& ch : result.chains) {
      std::vector<double> xs;
      for (const auto& s : ch.samples) xs.push_back(s[k]);
      if (xs.size() >= 4) ess += stats::effective_sample_size(xs);
      per_chain.push_back(std::move(xs));
    }
    result.rhat.push_back(per_chain.front().size() >= 4 ? stats::split_rhat(per_chain)
                                                        : std::numeric_limits<double>::quiet_NaN());
    result.ess.push_back(ess);
  }
  for (std::size_t c = 0; c < result.chains.size(); ++c)
    for (const auto& w : result.chains[c].warnings) result.warnings.push_back("chain " + std::to_string(c) + ": " + w);
  return result;
}

}  // namespace quakesr::mcmc
