#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "quakesr/core/stats.hpp"
#include "quakesr/smc/engine.hpp"
#include "toy_problems.hpp"

using namespace quakesr;
using namespace quakesr::smc;
using quakesr::testing::NormalMeanProblem;

namespace {
ParticlePopulation scored(std::vector<double> scores, double delta) {
  ParticlePopulation pop;
  for (double s : scores) pop.particles.push_back({Eigen::VectorXd::Zero(2), s, true});
  pop.delta = delta;
  return pop;
}

SmcConfig toy_config(std::size_t particles, int steps, std::uint64_t seed = 1) {
  SmcConfig c;
  c.particles = particles;
  c.max_steps = steps;
  c.seed = seed;
  c.replicates = 1;
  c.allow_small_replicates = true;
  return c;
}

/// Counts simulations and rejects everything with a negative first coordinate at the prior.
struct HalfLineProblem {
  mutable std::atomic<long> evaluations{0};
  [[nodiscard]] std::size_t dimension() const { return 1; }
  Eigen::VectorXd sample_prior(Engine& g) { return Eigen::VectorXd::Constant(1, uniform01(g)); }
  [[nodiscard]] double log_prior(const Eigen::VectorXd& v) const { return v[0] >= 0.0 ? 0.0 : -INFINITY; }
  [[nodiscard]] double loss(const Eigen::VectorXd& v, StreamKey) const {
    ++evaluations;
    return v[0];
  }
};
}  // namespace

TEST(AdaptTolerance, EnumerationOracle) {
  EXPECT_EQ(adapt_tolerance(scored({1, 2, 3, 4}, 4), 0.75), 3.0);
  EXPECT_EQ(adapt_tolerance(scored({4, 1, 3, 2}, 4), 0.5), 2.0);
}

TEST(AdaptTolerance, NoShrinkLimit) {
  EXPECT_EQ(adapt_tolerance(scored({1, 2, 3, 4}, 4), 0.999), 4.0);
}

TEST(AdaptTolerance, NeverAboveCurrentTolerance) {
  auto pop = scored({1, 2, 3, 4}, 2.5);
  pop.particles[2].alive = false;
  pop.particles[3].alive = false;
  EXPECT_LE(adapt_tolerance(pop, 0.999), 2.5);
}

TEST(AdaptTolerance, AllEqualScores) {
  EXPECT_EQ(adapt_tolerance(scored({2, 2, 2, 2}, 2), 0.5), 2.0);
}

TEST(AdaptTolerance, EmptyPopulationFails) {
  EXPECT_THROW(adapt_tolerance(ParticlePopulation{}, 0.5), Error);
}

TEST(AdaptAlpha, RuleAndClamps) {
  EXPECT_DOUBLE_EQ(adapt_alpha(0.3), 0.7);
  EXPECT_DOUBLE_EQ(adapt_alpha(0.0), 0.99);
  EXPECT_DOUBLE_EQ(adapt_alpha(1.0), 0.05);
}

TEST(PerturbationCovariance, TwoPointClosedForm) {
  ParticlePopulation pop;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(19), b = a;
  a[8] = 10.0;
  b[8] = 12.0;
  pop.particles = {{a, 0.0, true}, {b, 0.0, true}};
  const auto k = perturbation_covariance(pop, 5.0, 1e-8);
  // covariance of {10, 12} normalised by 2 is 1; twice that over 5
  EXPECT_NEAR(k(8, 8), 0.4 + 1e-8, 1e-15);
  for (Eigen::Index i = 0; i < 19; ++i)
    for (Eigen::Index j = 0; j < 19; ++j) {
      if (i == 8 && j == 8) continue;
      EXPECT_EQ(k(i, j), i == j ? 1e-8 : 0.0);
    }
}

TEST(PerturbationCovariance, DivisorScalesExactly) {
  auto pop = scored({1, 2, 3}, 3);
  pop.particles[0].theta << 1.0, 2.0;
  pop.particles[1].theta << -1.0, 0.5;
  pop.particles[2].theta << 0.3, -2.0;
  const auto k5 = perturbation_covariance(pop, 5.0, 0.0);
  const auto k1 = perturbation_covariance(pop, 1.0, 0.0);
  EXPECT_TRUE(k1.isApprox(5.0 * k5, 1e-14));
}

TEST(PerturbationCovariance, DuplicatedPopulationIsIdentical) {
  auto pop = scored({1, 2, 3}, 3);
  pop.particles[0].theta << 1.0, 2.0;
  pop.particles[1].theta << -1.0, 0.5;
  pop.particles[2].theta << 0.3, -2.0;
  auto twice = pop;
  twice.particles.insert(twice.particles.end(), pop.particles.begin(), pop.particles.end());
  EXPECT_TRUE(perturbation_covariance(pop).isApprox(perturbation_covariance(twice), 1e-14));
}

TEST(PerturbationCovariance, DeadParticlesIgnoredAndMinimumTwoAlive) {
  auto pop = scored({1, 2, 3}, 3);
  pop.particles[2].theta << 100.0, 100.0;
  pop.particles[2].alive = false;
  pop.particles[0].theta << 1.0, 0.0;
  const auto k = perturbation_covariance(pop, 5.0, 0.0);
  EXPECT_NEAR(k(0, 0), 2.0 * 0.25 / 5.0, 1e-15);
  pop.particles[1].alive = false;
  EXPECT_THROW(perturbation_covariance(pop), Error);
}

TEST(MhMove, PriorViolationRejectedWithoutSimulation) {
  HalfLineProblem prob;
  Particle p{Eigen::VectorXd::Constant(1, -5.0 + 1e-3), 0.0, true};
  p.theta[0] = 0.0;
  const Eigen::MatrixXd chol = Eigen::MatrixXd::Constant(1, 1, 1e-9);
  Particle start{Eigen::VectorXd::Constant(1, -1.0), 0.0, true};  // every proposal stays negative
  Engine g(1);
  for (int i = 0; i < 20; ++i) {
    const auto r = mh_move(start, 10.0, chol, prob, g, StreamKey(1));
    EXPECT_FALSE(r.accepted);
    EXPECT_TRUE(r.prior_rejected);
    EXPECT_FALSE(r.simulated);
  }
  EXPECT_EQ(prob.evaluations.load(), 0);
}

TEST(MhMove, ScoreAboveToleranceRejected) {
  HalfLineProblem prob;
  Particle p{Eigen::VectorXd::Constant(1, 0.5), 0.5, true};
  const Eigen::MatrixXd chol = Eigen::MatrixXd::Constant(1, 1, 1e-9);
  Engine g(2);
  const auto r = mh_move(p, 0.1, chol, prob, g, StreamKey(1));
  EXPECT_FALSE(r.accepted);
  EXPECT_TRUE(r.simulated);
  EXPECT_EQ(p.theta[0], 0.5);
}

TEST(MhMove, ZeroCovarianceLimitAccepts) {
  HalfLineProblem prob;
  Engine g(3);
  for (int i = 0; i < 50; ++i) {
    Particle p{Eigen::VectorXd::Constant(1, 0.5), 0.5, true};
    const auto r = mh_move(p, 0.6, Eigen::MatrixXd::Zero(1, 1), prob, g, StreamKey(i));
    EXPECT_TRUE(r.accepted);
  }
}

TEST(Resample, AllAliveKeepsSizeAndMembers) {
  auto pop = scored({1, 2, 3, 4, 5}, 5);
  for (std::size_t i = 0; i < 5; ++i) pop.particles[i].theta[0] = static_cast<double>(i);
  Engine g(4);
  resample(pop, g);
  EXPECT_EQ(pop.ess(), 5u);
  for (const auto& p : pop.particles) EXPECT_EQ(p.theta[0], p.score - 1.0);
}

TEST(Resample, SingleSurvivorFillsPopulation) {
  auto pop = scored({1, 2, 3, 4}, 4);
  for (std::size_t i = 0; i < 4; ++i) pop.particles[i].alive = i == 2;
  Engine g(5);
  resample(pop, g);
  for (const auto& p : pop.particles) {
    EXPECT_TRUE(p.alive);
    EXPECT_EQ(p.score, 3.0);
  }
}

TEST(Resample, NoSurvivorsFails) {
  auto pop = scored({1, 2}, 2);
  for (auto& p : pop.particles) p.alive = false;
  Engine g(6);
  EXPECT_THROW(resample(pop, g), Error);
}

TEST(Resample, ExpectedCopyCountChiSquare) {
  // 8 particles, 4 alive: each survivor expects 8/4 = 2 copies per resample
  Engine g(7);
  std::array<long, 4> counts{};
  const int rounds = 10000;
  for (int r = 0; r < rounds; ++r) {
    auto pop = scored({0, 1, 2, 3, 9, 9, 9, 9}, 9);
    for (std::size_t i = 4; i < 8; ++i) pop.particles[i].alive = false;
    resample(pop, g);
    for (const auto& p : pop.particles) counts[static_cast<std::size_t>(p.score)] += 1;
  }
  const double expected = 8.0 * rounds / 4.0;
  double chi2 = 0.0;
  for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 16.27);  // 3 df, p = 0.001
}

TEST(Initialize, ToleranceIsMaxScoreAndAllAlive) {
  NormalMeanProblem prob;
  const auto pop = initialize_population(toy_config(4, 1), prob);
  double mx = 0.0;
  for (const auto& p : pop.particles) mx = std::max(mx, p.score);
  EXPECT_EQ(pop.delta, mx);
  EXPECT_EQ(pop.ess(), 4u);
  ASSERT_EQ(pop.trace.size(), 1u);
  EXPECT_EQ(pop.trace[0].step, 0);
}

TEST(SmcConfig, SmallReplicateCountNeedsOverride) {
  SmcConfig c;
  c.replicates = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  c.allow_small_replicates = true;
  EXPECT_NO_THROW(c.validate());
  c.initial_alpha = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RunSmc, ConjugateNormalMean) {
  // Duplicated particles make the per-run error much larger than 0.3 / sqrt(P), so the
  // Monte-Carlo error is measured across independent seeds.
  std::vector<double> means, sds;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    NormalMeanProblem prob(0.5, 10, 1);
    const auto pop = run_smc(toy_config(1000, 40, seed), prob);
    ASSERT_GE(pop.trace.size(), 2u);
    for (std::size_t i = 1; i < pop.trace.size(); ++i) EXPECT_LE(pop.trace[i].delta, pop.trace[i - 1].delta);
    for (const auto& p : pop.particles)
      if (p.alive) EXPECT_LE(p.score, pop.delta);
    EXPECT_LE(pop.trace.back().mean_loss, pop.trace.front().mean_loss);

    std::vector<double> theta, dummy;
    std::set<double> seen;
    for (const auto& p : pop.particles)
      if (p.alive) {
        theta.push_back(p.theta[0]);
        if (seen.insert(p.theta[1]).second) dummy.push_back(p.theta[1]);
      }
    means.push_back(stats::mean(theta));
    sds.push_back(std::sqrt(stats::variance(theta)));
    const auto ks = stats::ks_test(dummy, [](double x) { return stats::normal_cdf(x); });
    EXPECT_GT(ks.p_value, 0.01) << "seed " << seed;
  }
  const double se = std::sqrt(stats::variance(means) / static_cast<double>(means.size()));
  NormalMeanProblem ref;
  EXPECT_NEAR(stats::mean(means), ref.posterior_mean(), 3.0 * se + 0.01) << "se " << se;
  EXPECT_NEAR(stats::mean(sds), 1.0 / std::sqrt(11.0), 0.05);
}

TEST(RunSmc, IndependentOfThreadCount) {
  NormalMeanProblem a, b;
  auto c1 = toy_config(200, 8, 3);
  auto c3 = c1;
  c3.threads = 3;
  EXPECT_EQ(run_smc(c1, a), run_smc(c3, b));
}

TEST(RunSmc, ResumeReproducesRemainingTrace) {
  NormalMeanProblem prob;
  auto cfg = toy_config(300, 12, 5);
  cfg.min_relative_decrease = 0.0;
  std::vector<ParticlePopulation> snapshots;
  const auto full = run_smc(cfg, prob, std::nullopt, [&](const ParticlePopulation& p) { snapshots.push_back(p); });
  ASSERT_GT(snapshots.size(), 6u);
  const auto resumed = run_smc(cfg, prob, snapshots[5]);
  EXPECT_EQ(resumed, full);
  EXPECT_EQ(resumed.trace, full.trace);
}

TEST(RunSmc, StopsOnConvergedTolerance) {
  // the loss is the same for every particle, so the tolerance cannot shrink
  struct Flat {
    std::size_t dimension() const { return 1; }
    Eigen::VectorXd sample_prior(Engine& g) { return Eigen::VectorXd::Constant(1, uniform01(g)); }
    double log_prior(const Eigen::VectorXd&) const { return 0.0; }
    double loss(const Eigen::VectorXd&, StreamKey) const { return 1.0; }
  } prob;
  const auto pop = run_smc(toy_config(20, 50), prob);
  EXPECT_EQ(pop.stop_reason, "tolerance_converged");
  EXPECT_EQ(pop.step, 1);
}
