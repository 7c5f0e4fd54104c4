#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "quakesr/eval/metrics.hpp"
#include "quakesr/eval/predict.hpp"

using namespace quakesr;
using namespace quakesr::eval;

TEST(Roc, FourPointOracle) {
  const auto r = roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  EXPECT_NEAR(r.auc, 0.75, 1e-12);
  EXPECT_EQ(r.points.front().fpr, 0.0);
  EXPECT_EQ(r.points.back().tpr, 1.0);
  EXPECT_EQ(r.points.back().fpr, 1.0);
}

TEST(Roc, PerfectReversedAndTied) {
  EXPECT_NEAR(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}).auc, 1.0, 1e-12);
  EXPECT_NEAR(roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}).auc, 0.0, 1e-12);
  EXPECT_NEAR(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}).auc, 0.5, 1e-12);
}

TEST(Roc, MatchesPairwiseConcordance) {
  Engine g = StreamKey(4).engine();
  std::vector<double> s(300);
  std::vector<int> l(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    l[i] = uniform01(g) < 0.4;
    s[i] = std::round((uniform01(g) + 0.3 * l[i]) * 20.0) / 20.0;  // coarse scores give ties
  }
  double conc = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1 && l[j] == 0) {
        pairs += 1.0;
        conc += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  EXPECT_NEAR(roc_auc(s, l).auc, conc / pairs, 1e-12);
}

TEST(Roc, SingleClassIsAnError) {
  EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 1}), InputError);
  EXPECT_THROW(roc_auc({0.1}, {1, 0}), InputError);
}

TEST(Rps, PerfectAndOneBinOff) {
  PagerProbs f{};
  f[2] = 1.0;
  EXPECT_NEAR(rps(f, 2), 0.0, 1e-15);
  PagerProbs half{};
  half[1] = 0.5;
  half[2] = 0.5;
  // cumulative forecast differs from the step at bin 1 only, by 0.5
  EXPECT_NEAR(rps(half, 2), 0.25 / 6.0, 1e-12);
  EXPECT_NEAR(rps(half, 2), 0.041667, 1e-6);
}

TEST(Rps, RejectsInvalidForecasts) {
  PagerProbs f{};
  f[0] = 0.7;
  EXPECT_THROW(rps(f, 0), InputError);
  f[0] = 1.0;
  EXPECT_THROW(rps(f, 7), InputError);
}

TEST(Pager, BinsAndClipping) {
  const auto r = pager_bins({5.0, 50.0});
  const PagerProbs expected{0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < kPagerBins; ++k) EXPECT_DOUBLE_EQ(r.probs[k], expected[k]);
  EXPECT_EQ(r.clipped, 0);
  EXPECT_EQ(pager_bin(0.0), 0u);
  EXPECT_EQ(pager_bin(1.0), 1u);
  EXPECT_EQ(pager_bin(9999.0), 4u);
  EXPECT_EQ(pager_bin(99999.0), 5u);
  EXPECT_EQ(pager_bin(1e5), 6u);
  const auto big = pager_bins({2e7, 0.0});
  EXPECT_EQ(big.clipped, 1);
  EXPECT_DOUBLE_EQ(big.probs[kPagerBins - 1], 0.5);
  EXPECT_THROW(pager_bins({}), InputError);
}

TEST(Gdacs, AlertBoundaries) {
  EXPECT_EQ(gdacs_alert(5.0), AlertLevel::Green);
  EXPECT_EQ(gdacs_alert(50.0), AlertLevel::Orange);
  EXPECT_EQ(gdacs_alert(500.0), AlertLevel::Red);
  EXPECT_EQ(gdacs_alert(9.999), AlertLevel::Green);
  EXPECT_EQ(gdacs_alert(10.0), AlertLevel::Orange);
  EXPECT_EQ(gdacs_alert(100.0), AlertLevel::Red);
  EXPECT_THROW(gdacs_alert(-1.0), InputError);
}

namespace {

EventBundle observed_event(const std::string& id, std::int64_t mort) {
  auto e = quakesr::testing::make_event(id, 3, 3, [](int r, int c) { return 6.5 + 0.5 * (r + c); }, 200, 80);
  e.observations.records.push_back({id, "total", ImpactType::Mort, mort});
  return e;
}

}  // namespace

TEST(Predictive, SummariesCoverEveryRegionAndType) {
  auto e = observed_event("p1", 3);
  e.regions.regions["west"] = {0, 3, 6};
  PredictConfig cfg;
  cfg.draws = 50;
  const auto s = posterior_predictive({e}, {quakesr::testing::typical_params()}, cfg, StreamKey(1));
  EXPECT_EQ(s.coordinates.size(), 2u * 3u);
  const auto* c = s.find("p1", "total", ImpactType::Disp);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->samples.size(), 50u);
  EXPECT_LE(c->quantiles.at(0.05), c->median);
  EXPECT_LE(c->median, c->quantiles.at(0.95));
  const auto& means = s.cell_means.at("p1");
  double cell_sum = 0.0;
  for (double v : means[0]) cell_sum += v;
  EXPECT_NEAR(cell_sum, s.find("p1", "total", ImpactType::Mort)->mean, 1e-9);
}

TEST(Predictive, ThreadCountDoesNotChangeDraws) {
  const auto e = observed_event("p2", 3);
  PredictConfig cfg;
  cfg.draws = 40;
  const auto a = posterior_predictive({e}, {quakesr::testing::typical_params()}, cfg, StreamKey(2));
  cfg.threads = 3;
  const auto b = posterior_predictive({e}, {quakesr::testing::typical_params()}, cfg, StreamKey(2));
  ASSERT_EQ(a.coordinates.size(), b.coordinates.size());
  for (std::size_t i = 0; i < a.coordinates.size(); ++i) EXPECT_EQ(a.coordinates[i].samples, b.coordinates[i].samples);
}

TEST(Predictive, CollapsedPopulationStillVariesThroughErrors) {
  // a single parameter vector leaves only forward-model noise, and a near-zero noise model
  // collapses the interval to a point
  auto theta = quakesr::testing::typical_params();
  theta.mu = {200.0, 200.0, 200.0};
  const auto e = observed_event("p3", 0);
  PredictConfig cfg;
  cfg.draws = 30;
  const auto s = posterior_predictive({e}, {theta, theta}, cfg, StreamKey(3));
  for (const auto& c : s.coordinates) {
    EXPECT_EQ(c.quantiles.at(0.05), c.quantiles.at(0.95));
    EXPECT_EQ(c.median, 0.0);
  }
  const auto cov = coverage_report(s, {e}, 0.9);
  EXPECT_EQ(cov.observations, 1);
  EXPECT_EQ(cov.covered, 1);
}

TEST(Predictive, RejectsEmptyPopulation) {
  EXPECT_THROW(posterior_predictive({observed_event("x", 1)}, {}, PredictConfig{}, StreamKey(1)), InputError);
}

TEST(Coverage, MonotoneInLevel) {
  std::vector<EventBundle> events;
  for (int i = 0; i < 6; ++i) events.push_back(observed_event("c" + std::to_string(i), 2 + 3 * i));
  PredictConfig cfg;
  cfg.draws = 120;
  const auto s = posterior_predictive(events, {quakesr::testing::typical_params()}, cfg, StreamKey(4));
  double prev = -1.0;
  for (double level : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double c = coverage_report(s, events, level).overall();
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_THROW(coverage_report(s, events, 1.0), ConfigError);
}

TEST(Coverage, CalibratedWhenObservationsComeFromTheModel) {
  // observations drawn from the same model the predictive uses land inside the central 90%
  // interval about 90% of the time
  const auto theta = quakesr::testing::typical_params();
  std::vector<EventBundle> events;
  for (int i = 0; i < 150; ++i) {
    auto e = quakesr::testing::make_event("k" + std::to_string(i), 2, 2, [](int r, int c) { return 7.5 + 0.5 * (r + c); },
                                 300, 100);
    const auto draw = sample_event_impact(e, theta, 1000 + static_cast<std::uint64_t>(i));
    const auto agg = aggregate_impacts(draw, e.regions);
    e.observations.records.push_back({e.id, "total", ImpactType::Mort, agg.at("total")[0]});
    events.push_back(std::move(e));
  }
  PredictConfig cfg;
  cfg.draws = 200;
  const auto s = posterior_predictive(events, {theta}, cfg, StreamKey(5));
  const double c = coverage_report(s, events, 0.9).overall();
  EXPECT_GT(c, 0.9 - 3.0 * std::sqrt(0.09 / 150.0));
  EXPECT_LT(c, 0.9 + 3.0 * std::sqrt(0.09 / 150.0) + 0.03);  // discrete counts with inclusive ends
}

TEST(DamageProbability, ZeroBelowThreshold) {
  const auto e = quakesr::testing::make_event("d", 1, 3, [](int, int c) { return c == 0 ? 4.0 : 8.0; }, 10, 10);
  const auto p = cell_damage_probability(e, {quakesr::testing::typical_params()}, 25, StreamKey(6));
  EXPECT_EQ(p[0], 0.0);
  EXPECT_GT(p[1], 0.0);
  EXPECT_LE(p[2], 1.0);
}

TEST(DamageProbability, IncreasesWithIntensity) {
  const auto e = quakesr::testing::make_event("d2", 1, 4, [](int, int c) { return 6.0 + c; }, 10, 10);
  const auto p = cell_damage_probability(e, {quakesr::testing::typical_params()}, 101, StreamKey(7));
  for (std::size_t j = 1; j < p.size(); ++j) EXPECT_GT(p[j], p[j - 1]);
}

TEST(BinnedDamage, ObservedFractionWithinBinomialBand) {
  const auto e = quakesr::testing::make_event("b", 1, 1, [](int, int) { return 8.2; }, 10, 10000);
  const auto theta = quakesr::testing::typical_params();
  const StreamKey key(8);
  const auto pts = synth::generate_point_building_data(e, theta, key);
  const ForwardModel model(e, theta);
  Engine realize = key.child("realize").engine();
  const double p = model.damage_probabilities(realize)[0];
  const auto rows = intensity_binned_damage(pts, std::vector<double>(pts.size(), p));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].intensity_bin, 8.0);
  EXPECT_EQ(rows[0].buildings, 10000);
  EXPECT_NEAR(rows[0].observed_fraction, p, 3.0 * std::sqrt(p * (1.0 - p) / 1e4) + 1e-4);
  EXPECT_NEAR(rows[0].mean_modeled, p, 1e-12);
}

TEST(BinnedDamage, ExcludesPossiblyDamagedAndGroupsPerEvent) {
  using synth::DamageLabel;
  std::vector<synth::PointBuilding> pts{
      {"a", 0, 0, 0, 7.1, DamageLabel::Damaged},  {"a", 0, 0, 0, 6.9, DamageLabel::Undamaged},
      {"a", 0, 0, 0, 7.0, DamageLabel::Possibly}, {"b", 0, 0, 0, 7.0, DamageLabel::Damaged},
      {"a", 0, 0, 0, 8.0, DamageLabel::Damaged},
  };
  const auto rows = intensity_binned_damage(pts);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].event_id, "a");
  EXPECT_DOUBLE_EQ(rows[0].intensity_bin, 7.0);
  EXPECT_EQ(rows[0].buildings, 2);
  EXPECT_DOUBLE_EQ(rows[0].observed_fraction, 0.5);
  EXPECT_TRUE(std::isnan(rows[0].mean_modeled));
  EXPECT_EQ(rows[2].event_id, "b");
}

TEST(EventAuc, SkipsSingleClassEvents) {
  using synth::DamageLabel;
  std::vector<synth::PointBuilding> pts{
      {"a", 0, 0, 0, 7, DamageLabel::Damaged},   {"a", 1, 0, 0, 6, DamageLabel::Undamaged},
      {"b", 0, 0, 0, 7, DamageLabel::Undamaged}, {"b", 1, 0, 0, 6, DamageLabel::Undamaged},
  };
  const auto r = per_event_auc(pts, {0.9, 0.1, 0.5, 0.4});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].event_id, "a");
  EXPECT_DOUBLE_EQ(r[0].auc, 1.0);
}
