#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "quakesr/loss/crps_experiment.hpp"
#include "quakesr/loss/loss.hpp"

using namespace quakesr;
using quakesr::testing::make_event;
using quakesr::testing::typical_params;

namespace {
double brute_energy(const std::vector<double>& y, const std::vector<std::vector<double>>& xs) {
  const double m = static_cast<double>(xs.size());
  double fit = 0.0, spread = 0.0;
  for (const auto& x : xs) fit += euclidean_distance(x, y);
  for (const auto& a : xs)
    for (const auto& b : xs) spread += euclidean_distance(a, b);
  return fit / m - spread / (2.0 * m * m);
}

EventBundle observed_event(const std::string& id, double peak) {
  auto e = make_event(id, 5, 6, [&](int r, int c) { return peak - 0.6 * std::hypot(r - 2.0, c - 2.5); }, 400, 60);
  std::vector<std::size_t> north;
  for (std::size_t j = 0; j < 12; ++j) north.push_back(j);
  e.regions.regions["north"] = north;
  e.observations.records = {{id, "total", ImpactType::Mort, 3},
                            {id, "total", ImpactType::Disp, 250},
                            {id, "north", ImpactType::Disp, 80},
                            {id, "total", ImpactType::BuildDam, 40}};
  return e;
}
}  // namespace

TEST(Transform, WeightedLogScale) {
  const LossConfig c;
  EXPECT_NEAR(transform(0.0, ImpactType::Mort, c), 7.0 * std::log(10.0), 1e-12);
  EXPECT_NEAR(transform(90.0, ImpactType::Disp, c), std::log(100.0), 1e-12);
  EXPECT_NEAR(transform(0.0, ImpactType::BuildDam, c), 0.6 * std::log(10.0), 1e-12);
  EXPECT_THROW(transform(-1.0, ImpactType::Mort, c), InputError);
}

TEST(EnergyScore, TwoPointOracle) {
  EXPECT_NEAR(energy_score({1.0}, {{0.0}, {2.0}}), 0.5, 1e-15);
}

TEST(EnergyScore, SingleSampleIsDistance) {
  EXPECT_NEAR(energy_score({0.0, 0.0}, {{3.0, 4.0}}), 5.0, 1e-15);
}

TEST(EnergyScore, PointMassAtObservationScoresZero) {
  EXPECT_EQ(energy_score({1.5, -2.0}, std::vector<std::vector<double>>(7, {1.5, -2.0})), 0.0);
}

TEST(EnergyScore, MatchesBruteForceInOneAndThreeDimensions) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> n;
  for (std::size_t d : {1u, 3u}) {
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> y(d);
      for (double& v : y) v = n(g);
      std::vector<std::vector<double>> xs(1 + rep % 17, std::vector<double>(d));
      for (auto& x : xs)
        for (double& v : x) v = n(g);
      EXPECT_NEAR(energy_score(y, xs), brute_energy(y, xs), 1e-12);
    }
  }
}

TEST(EnergyScore, TranslationInvariant) {
  std::mt19937_64 g(2);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> y{n(g), n(g)}, shift{5.0 * n(g), 5.0 * n(g)};
    std::vector<std::vector<double>> xs(10, std::vector<double>(2));
    for (auto& x : xs) x = {n(g), n(g)};
    auto ys = y;
    auto xss = xs;
    for (std::size_t k = 0; k < 2; ++k) ys[k] += shift[k];
    for (auto& x : xss)
      for (std::size_t k = 0; k < 2; ++k) x[k] += shift[k];
    EXPECT_NEAR(energy_score(y, xs), energy_score(ys, xss), 1e-9);
  }
}

TEST(EnergyScore, Errors) {
  EXPECT_THROW(energy_score({1.0}, {}), InputError);
  EXPECT_THROW(energy_score({1.0, 2.0}, {{1.0}}), InputError);
  EXPECT_THROW(energy_score({}, {{}}), InputError);
}

TEST(EnergyScore, ExpectedScoreMinimisedNearTruth) {
  // Expected univariate score for N(0, s) ensembles against N(0, 1) observations; with a large
  // ensemble the minimiser approaches s = 1 (propriety).
  const auto rows = crps_bias_experiment({200}, {0.8, 0.9, 1.0, 1.1, 1.2}, 6000, 3);
  EXPECT_EQ(crps_bias_argmin(rows, 200), 1.0);
}

TEST(CrpsBias, SmallEnsembleArgminNearAnalytic) {
  // sigma^2 = c^2 / (1 - c^2), c = (1 - 1/M) / sqrt 2
  const double c = (1.0 - 1.0 / 5.0) / std::sqrt(2.0);
  const double analytic = std::sqrt(c * c / (1.0 - c * c));
  std::vector<double> grid;
  for (double s = 0.40; s <= 1.2001; s += 0.05) grid.push_back(s);
  const auto rows = crps_bias_experiment({5}, grid, 40000, 5);
  EXPECT_NEAR(crps_bias_argmin(rows, 5), analytic, 0.1);
}

TEST(CrpsBias, IndependentOfThreads) {
  const auto a = crps_bias_experiment({3, 7}, {0.5, 1.0}, 5000, 9, 1);
  const auto b = crps_bias_experiment({3, 7}, {0.5, 1.0}, 5000, 9, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].mean_score, b[i].mean_score);
}

TEST(DatasetLoss, SingleEventEqualsEventLoss) {
  const std::vector<EventBundle> events{observed_event("a", 8.5)};
  LossConfig c;
  c.replicates = 20;
  const LossProblem prob(events, c);
  const StreamKey key(4);
  EXPECT_EQ(dataset_loss(prob, typical_params(), key), event_loss(prob.events[0], typical_params(), c, key));
}

TEST(DatasetLoss, PermutationAndThreadInvariant) {
  std::vector<EventBundle> events{observed_event("a", 8.5), observed_event("b", 7.5), observed_event("c", 9.0)};
  LossConfig c;
  c.replicates = 15;
  const StreamKey key(10);
  const double base = dataset_loss(LossProblem(events, c), typical_params(), key, nullptr, 1);
  std::reverse(events.begin(), events.end());
  EXPECT_EQ(dataset_loss(LossProblem(events, c), typical_params(), key, nullptr, 1), base);
  std::rotate(events.begin(), events.begin() + 1, events.end());
  EXPECT_EQ(dataset_loss(LossProblem(events, c), typical_params(), key, nullptr, 3), base);
}

TEST(DatasetLoss, DeterministicAndSeedSensitive) {
  const std::vector<EventBundle> events{observed_event("a", 8.5), observed_event("b", 8.0)};
  LossConfig c;
  c.replicates = 10;
  const LossProblem prob(events, c);
  const double a = dataset_loss(prob, typical_params(), StreamKey(1));
  EXPECT_EQ(a, dataset_loss(prob, typical_params(), StreamKey(1)));
  EXPECT_NE(a, dataset_loss(prob, typical_params(), StreamKey(2)));
}

TEST(DatasetLoss, EventsWithoutObservationsAreDroppedWithWarning) {
  auto silent = observed_event("quiet", 8.0);
  silent.observations.records.clear();
  const std::vector<EventBundle> events{observed_event("a", 8.5), silent};
  const LossProblem prob(events, LossConfig{});
  EXPECT_EQ(prob.events.size(), 1u);
  ASSERT_EQ(prob.warnings.size(), 1u);
  EXPECT_NE(prob.warnings[0].find("quiet"), std::string::npos);
  const std::vector<EventBundle> only_silent{silent};
  EXPECT_THROW(LossProblem(only_silent, LossConfig{}), InputError);
  EXPECT_THROW(dataset_loss(std::span<const EventBundle>{}, typical_params(), LossConfig{}, StreamKey(1)), InputError);
}

TEST(DatasetLoss, FixedNormalsMakeLossSmoothInParameter) {
  // with common event-error normals and common streams, nearby parameters give nearby losses
  const std::vector<EventBundle> events{observed_event("a", 8.5)};
  LossConfig c;
  c.replicates = 30;
  const LossProblem prob(events, c);
  XiNormalsField xi(1, std::vector<XiNormals>(30, XiNormals{0.3, -0.2, 0.1}));
  auto p = typical_params();
  const double a = dataset_loss(prob, p, StreamKey(3), &xi);
  p.mu[0] += 1e-9;
  const double b = dataset_loss(prob, p, StreamKey(3), &xi);
  EXPECT_NEAR(a, b, 1e-3);
}

TEST(EuclideanLoss, AveragesSingleDrawDistances) {
  const std::vector<EventBundle> events{observed_event("a", 8.5)};
  LossConfig c;
  c.kind = LossKind::Euclidean;
  c.pseudo_marginal_repeats = 10;
  const LossProblem prob(events, c);
  const auto& pe = prob.events[0];
  const StreamKey key(6);
  const auto sims = simulate_observed(pe, typical_params(), 10, key);
  double expect = 0.0;
  for (const auto& s : sims) expect += euclidean_distance(pe.transformed(s, c), pe.observed);
  EXPECT_NEAR(dataset_loss(prob, typical_params(), key), expect / 10.0, 1e-12);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  c.replicates = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.weights[1] = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(loss_kind_from_string("crps"), ConfigError);
}
