#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/parallel.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/inference/problem.hpp"

namespace quakesr::smc {

struct SmcConfig {
  std::size_t particles = 1000;
  double resample_threshold = 0.0;  // <= 0 means particles / 2
  double initial_alpha = 0.9;
  double alpha_min = 0.05;
  double alpha_max = 0.99;
  double shrink_divisor = 5.0;
  double jitter = 1e-8;
  int replicates = 100;  // M used by the loss
  bool allow_small_replicates = false;
  double min_relative_decrease = 0.001;
  int max_steps = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  [[nodiscard]] double threshold() const {
    return resample_threshold > 0.0 ? resample_threshold : static_cast<double>(particles) / 2.0;
  }

  void validate() const {
    if (particles < 2) throw ConfigError("SMC needs at least 2 particles");
    if (!(initial_alpha > 0.0 && initial_alpha < 1.0)) throw ConfigError("initial alpha must lie in (0, 1)");
    if (!(alpha_min > 0.0 && alpha_min <= alpha_max && alpha_max < 1.0))
      throw ConfigError("alpha clamp bounds must satisfy 0 < min <= max < 1");
    if (!(shrink_divisor > 0.0)) throw ConfigError("kernel shrink divisor must be > 0");
    if (replicates < 60 && !allow_small_replicates)
      throw ConfigError("replicate count M = " + std::to_string(replicates) +
                        " is below 60; the energy score is biased toward under-dispersion at small M "
                        "(set allow_small_replicates to override)");
    if (replicates < 1) throw ConfigError("replicate count M must be >= 1");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (!(min_relative_decrease >= 0.0)) throw ConfigError("min_relative_decrease must be >= 0");
  }

  /// Non-fatal configuration remarks.
  [[nodiscard]] std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (threshold() > static_cast<double>(particles) / 2.0)
      w.push_back("resample threshold above P/2: resampling will happen almost every step");
    return w;
  }
};

struct Particle {
  Eigen::VectorXd theta;
  double score = 0.0;  // cached dataset loss, refreshed only by accepted moves
  bool alive = true;

  friend bool operator==(const Particle& a, const Particle& b) {
    return a.theta.size() == b.theta.size() && a.theta == b.theta && a.score == b.score && a.alive == b.alive;
  }
};

struct StepSummary {
  int step = 0;
  double delta = 0.0;
  std::size_t ess = 0;
  double acc_rate = 0.0;      // accepted / proposals, prior rejections counted as rejections
  double sim_acc_rate = 0.0;  // accepted / proposals that reached the simulator
  double alpha = 0.0;         // value used to pick this step's tolerance
  double mean_loss = 0.0;     // mean cached score over alive particles after the moves
  bool resampled = false;
  std::int64_t simulations = 0;
  double seconds = 0.0;       // wall time; excluded from equality and deterministic artifacts

  friend bool operator==(const StepSummary& a, const StepSummary& b) {
    return a.step == b.step && a.delta == b.delta && a.ess == b.ess && a.acc_rate == b.acc_rate &&
           a.sim_acc_rate == b.sim_acc_rate && a.alpha == b.alpha && a.mean_loss == b.mean_loss &&
           a.resampled == b.resampled && a.simulations == b.simulations;
  }
};

/// Particle population with binary weights. Random streams are derived from (seed, step,
/// particle), so the seed and step index are the complete RNG state.
struct ParticlePopulation {
  std::vector<Particle> particles;
  double delta = std::numeric_limits<double>::infinity();
  int step = 0;
  double alpha = 0.9;  // for the next tolerance update
  std::uint64_t seed = 0;
  std::vector<StepSummary> trace;
  bool finished = false;
  std::string stop_reason;

  [[nodiscard]] std::size_t ess() const {
    return static_cast<std::size_t>(std::count_if(particles.begin(), particles.end(), [](const Particle& p) { return p.alive; }));
  }

  [[nodiscard]] double mean_alive_score() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& p : particles)
      if (p.alive) {
        s += p.score;
        ++n;
      }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }

  [[nodiscard]] std::vector<Eigen::VectorXd> alive_thetas() const {
    std::vector<Eigen::VectorXd> out;
    for (const auto& p : particles)
      if (p.alive) out.push_back(p.theta);
    return out;
  }

  friend bool operator==(const ParticlePopulation&, const ParticlePopulation&) = default;
};

/// Largest cached score whose survivor count does not exceed ceil(alpha * current ESS), never
/// above the current tolerance; the smallest score if none qualifies.
inline double adapt_tolerance(const ParticlePopulation& pop, double alpha) {
  std::vector<double> scores;
  for (const auto& p : pop.particles)
    if (p.alive) scores.push_back(p.score);
  if (scores.empty()) throw Error("cannot adapt tolerance of an empty population");
  std::sort(scores.begin(), scores.end());
  const auto target = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(scores.size()) - 1e-12));
  double best = scores.front();
  bool found = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double d = scores[i];
    if (d > pop.delta) break;
    const auto count = static_cast<std::size_t>(std::upper_bound(scores.begin(), scores.end(), d) - scores.begin());
    if (count <= target) {
      best = d;
      found = true;
    }
  }
  return found ? best : scores.front();
}

inline double adapt_alpha(double acceptance_rate, double alpha_min = 0.05, double alpha_max = 0.99) {
  return std::clamp(1.0 - acceptance_rate, alpha_min, alpha_max);
}

/// Twice the covariance of the alive particles (normalised by their count), divided by the
/// shrink divisor, plus diagonal jitter.
inline Eigen::MatrixXd perturbation_covariance(const ParticlePopulation& pop, double divisor = 5.0,
                                               double jitter = 1e-8) {
  const auto thetas = pop.alive_thetas();
  if (thetas.size() < 2) throw Error("perturbation covariance needs at least 2 alive particles");
  const Eigen::Index d = thetas.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& t : thetas) mean += t;
  mean /= static_cast<double>(thetas.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& t : thetas) {
    const Eigen::VectorXd c = t - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(thetas.size());
  Eigen::MatrixXd k = 2.0 * cov / divisor;
  k.diagonal().array() += jitter;
  return 0.5 * (k + k.transpose());
}

struct MoveResult {
  bool accepted = false;
  bool prior_rejected = false;
  bool simulated = false;
};

/// One Metropolis-Hastings move under the indicator kernel at tolerance delta. Proposals with
/// zero prior density are rejected before any simulation.
template <InferenceProblem Problem>
MoveResult mh_move(Particle& particle, double delta, const Eigen::MatrixXd& kernel_chol, const Problem& problem,
                   Engine& g, StreamKey loss_key) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(particle.theta.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(g);
  const Eigen::VectorXd proposal = particle.theta + kernel_chol * z;
  const double u = uniform01(g);
  const double lp_new = problem.log_prior(proposal);
  if (!std::isfinite(lp_new)) return {false, true, false};
  const double lp_old = problem.log_prior(particle.theta);
  const double score = problem.loss(proposal, loss_key);
  if (!(score <= delta)) return {false, false, true};
  if (!(std::log(u) < lp_new - lp_old)) return {false, false, true};
  particle.theta = proposal;
  particle.score = score;
  return {true, false, true};
}

/// Multinomial resampling among the alive particles back to the full population size.
inline void resample(ParticlePopulation& pop, Engine& g) {
  std::vector<std::size_t> alive;
  for (std::size_t i = 0; i < pop.particles.size(); ++i)
    if (pop.particles[i].alive) alive.push_back(i);
  if (alive.empty()) throw Error("resampling failed: no alive particles");
  std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
  std::vector<Particle> out;
  out.reserve(pop.particles.size());
  for (std::size_t i = 0; i < pop.particles.size(); ++i) {
    Particle p = pop.particles[alive[pick(g)]];
    p.alive = true;
    out.push_back(std::move(p));
  }
  pop.particles = std::move(out);
}

/// Draw P particles from the prior and score each once; the first tolerance is the largest score.
template <InferenceProblem Problem>
ParticlePopulation initialize_population(const SmcConfig& config, Problem& problem) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const StreamKey root(config.seed);
  ParticlePopulation pop;
  pop.seed = config.seed;
  pop.alpha = config.initial_alpha;
  pop.particles.resize(config.particles);
  for (std::size_t i = 0; i < config.particles; ++i) {
    Engine g = root.child("prior", i).engine();
    pop.particles[i].theta = problem.sample_prior(g);
  }
  parallel_for(config.particles, config.threads, [&](std::size_t i) {
    pop.particles[i].score = problem.loss(pop.particles[i].theta, root.child("score0", i));
  });
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& p : pop.particles) {
    if (!std::isfinite(p.score)) throw Error("non-finite loss for an initial particle");
    mx = std::max(mx, p.score);
  }
  pop.delta = mx;
  StepSummary s;
  s.step = 0;
  s.delta = pop.delta;
  s.ess = pop.ess();
  s.acc_rate = 1.0;
  s.sim_acc_rate = 1.0;
  s.alpha = pop.alpha;
  s.mean_loss = pop.mean_alive_score();
  s.simulations = static_cast<std::int64_t>(config.particles);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pop.trace.push_back(s);
  return pop;
}

/// One full SMC step: shrink the tolerance, resample if the ESS is low, move every alive particle.
/// Returns the relative decrease of the tolerance.
template <InferenceProblem Problem>
double smc_step(ParticlePopulation& pop, const SmcConfig& config, const Problem& problem) {
  const auto t0 = std::chrono::steady_clock::now();
  const int t = pop.step + 1;
  const StreamKey root(pop.seed);
  const double old_delta = pop.delta;
  const double used_alpha = pop.alpha;
  const double new_delta = adapt_tolerance(pop, used_alpha);
  const double rel = old_delta > 0.0 ? (old_delta - new_delta) / old_delta : 0.0;
  pop.delta = new_delta;
  for (auto& p : pop.particles)
    if (p.alive && !(p.score <= new_delta)) p.alive = false;

  bool resampled = false;
  if (static_cast<double>(pop.ess()) < config.threshold()) {
    Engine g = root.child("resample", static_cast<std::uint64_t>(t)).engine();
    resample(pop, g);
    resampled = true;
  }

  const Eigen::MatrixXd kernel = perturbation_covariance(pop, config.shrink_divisor, config.jitter);
  Eigen::LLT<Eigen::MatrixXd> llt(kernel);
  if (llt.info() != Eigen::Success) throw Error("perturbation covariance is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  std::vector<MoveResult> results(pop.particles.size());
  parallel_for(pop.particles.size(), config.threads, [&](std::size_t i) {
    if (!pop.particles[i].alive) return;
    Engine g = root.child("move", static_cast<std::uint64_t>(t), i).engine();
    results[i] = mh_move(pop.particles[i], pop.delta, chol, problem, g,
                         root.child("loss", static_cast<std::uint64_t>(t), i));
  });
  std::int64_t proposals = 0, accepted = 0, simulated = 0;
  for (std::size_t i = 0; i < pop.particles.size(); ++i) {
    if (!pop.particles[i].alive) continue;
    ++proposals;
    accepted += results[i].accepted;
    simulated += results[i].simulated;
  }
  const double acc = proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  pop.alpha = adapt_alpha(acc, config.alpha_min, config.alpha_max);
  pop.step = t;

  StepSummary s;
  s.step = t;
  s.delta = pop.delta;
  s.ess = pop.ess();
  s.acc_rate = acc;
  s.sim_acc_rate = simulated ? static_cast<double>(accepted) / static_cast<double>(simulated) : 0.0;
  s.alpha = used_alpha;
  s.mean_loss = pop.mean_alive_score();
  s.resampled = resampled;
  s.simulations = simulated;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pop.trace.push_back(s);
  return rel;
}

using StepCallback = std::function<void(const ParticlePopulation&)>;

/// Run (or continue) the sampler until the tolerance decrease falls below the configured
/// fraction or the step budget is spent. `on_step` sees the population after initialisation and
/// after every step, and is where checkpoints are written.
template <InferenceProblem Problem>
ParticlePopulation run_smc(const SmcConfig& config, Problem& problem, std::optional<ParticlePopulation> resume = {},
                           const StepCallback& on_step = {}) {
  config.validate();
  ParticlePopulation pop;
  if (resume) {
    pop = std::move(*resume);
    if (pop.particles.size() != config.particles)
      throw ConfigError("checkpoint has " + std::to_string(pop.particles.size()) + " particles, config asks for " +
                        std::to_string(config.particles));
  } else {
    pop = initialize_population(config, problem);
    if (on_step) on_step(pop);
  }
  while (!pop.finished) {
    if (pop.step >= config.max_steps) {
      pop.finished = true;
      pop.stop_reason = "max_steps";
      if (on_step) on_step(pop);
      break;
    }
    const double rel = smc_step(pop, config, problem);
    if (rel < config.min_relative_decrease) {
      pop.finished = true;
      pop.stop_reason = "tolerance_converged";
    } else if (pop.step >= config.max_steps) {
      pop.finished = true;
      pop.stop_reason = "max_steps";
    }
    if (on_step) on_step(pop);
  }
  return pop;
}

}  // namespace quakesr::smc
