#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "quakesr/synth/generator.hpp"

using namespace quakesr;
using namespace quakesr::synth;

namespace {

GenConfig small_config(std::uint64_t seed = 11) {
  GenConfig c;
  c.events = 6;
  c.min_side = 6;
  c.max_side = 9;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Generator, CovariatesAreBlockConstant) {
  const auto c = small_config();
  const auto e = generate_event(c, "blk", StreamKey(5));
  const int bs = c.block_size;
  for (int r = 0; r < e.shape.rows; ++r)
    for (int col = 0; col < e.shape.cols; ++col) {
      const auto j = static_cast<std::size_t>(r * e.shape.cols + col);
      const auto anchor = static_cast<std::size_t>((r / bs) * bs * e.shape.cols + (col / bs) * bs);
      EXPECT_EQ(e.covariates.vs30_raw[j], e.covariates.vs30_raw[anchor]);
      EXPECT_EQ(e.covariates.shdi_raw[j], e.covariates.shdi_raw[anchor]);
      EXPECT_EQ(e.covariates.gnic_raw[j], e.covariates.gnic_raw[anchor]);
      EXPECT_EQ(e.covariates.eqfreq_raw[j], e.covariates.eqfreq_raw[anchor]);
      EXPECT_EQ(e.covariates.popdens_raw[j], e.covariates.popdens_raw[anchor]);
    }
}

TEST(Generator, EventShapeAndIntensityBounds) {
  const auto c = small_config();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto e = generate_event(c, "e", StreamKey(s));
    EXPECT_GE(e.shape.rows, c.min_side);
    EXPECT_LE(e.shape.rows, c.max_side);
    ASSERT_FALSE(e.hazards.empty());
    int first = 0;
    for (const auto& h : e.hazards) {
      first += h.first_haz;
      ASSERT_EQ(h.intensity.size(), e.shape.cells());
      for (double v : h.intensity) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, c.peak_max + c.noise_amplitude + 1e-12);
      }
    }
    EXPECT_EQ(first, 1);
    for (const auto& q : e.exposure.population)
      for (auto v : q) EXPECT_GE(v, 0);
  }
}

TEST(Generator, DatasetIsDeterministicInSeed) {
  const auto a = generate_dataset(small_config(3));
  const auto b = generate_dataset(small_config(3));
  const auto d = generate_dataset(small_config(4));
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    EXPECT_EQ(a.events[i].observations.records, b.events[i].observations.records);
    EXPECT_EQ(a.events[i].hazards[0].intensity, b.events[i].hazards[0].intensity);
  }
  EXPECT_EQ(a.points, b.points);
  bool differs = false;
  for (std::size_t i = 0; i < a.events.size(); ++i)
    differs = differs || a.events[i].observations.records != d.events[i].observations.records;
  EXPECT_TRUE(differs);
}

TEST(Generator, DatasetIsStandardizedOverAllEvents) {
  const auto ds = generate_dataset(small_config(8));
  double s = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (const auto& e : ds.events)
    for (double v : e.covariates.vs30) {
      s += v;
      ss += v * v;
      ++n;
    }
  const double mean = s / static_cast<double>(n);
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(ss / static_cast<double>(n) - mean * mean, 1.0, 0.05);
}

TEST(Generator, ClusterObservationsSumToTheEventTotal) {
  auto c = small_config(21);
  c.events = 12;
  c.total_only_weight = 0.0;
  c.observe_probability = {1.0, 1.0, 1.0};
  const auto ds = generate_dataset(c);
  for (const auto& e : ds.events) {
    // clusters partition the shaken cells, which are the only cells that can take impact
    std::set<std::size_t> seen;
    std::size_t cluster_cells = 0;
    for (const auto& [name, cells] : e.regions.regions) {
      if (name == "total") continue;
      for (std::size_t j : cells) seen.insert(j);
      cluster_cells += cells.size();
    }
    EXPECT_EQ(seen.size(), cluster_cells);
    EXPECT_EQ(seen.size(), affected_cells(e).size());
    for (const auto& o : e.observations.records) EXPECT_NE(o.region, "total");
  }
}

TEST(Generator, TotalOnlyGivesOneObservationPerType) {
  auto c = small_config(22);
  c.total_only_weight = 1.0;
  const auto ds = generate_dataset(c);
  for (const auto& e : ds.events) {
    std::set<ImpactType> types;
    for (const auto& o : e.observations.records) {
      EXPECT_EQ(o.region, "total");
      EXPECT_TRUE(types.insert(o.type).second);
    }
    EXPECT_FALSE(types.empty());
    EXPECT_EQ(e.regions.regions.size(), 1u);
  }
}

TEST(Generator, ObservationsAreOneForwardDraw) {
  auto c = small_config(23);
  c.total_only_weight = 0.0;
  c.observe_probability = {1.0, 1.0, 1.0};
  auto e = generate_event(c, "obs", StreamKey(9));
  const auto r = generate_observations(e, c.theta_true, c, StreamKey(10));
  std::int64_t mort = 0;
  for (const auto& o : r.observations.records) {
    EXPECT_GE(o.value, 0);
    if (o.type == ImpactType::Mort) mort += o.value;
  }
  std::int64_t pop = 0;
  for (const auto& q : e.exposure.population)
    for (auto v : q) pop += v;
  EXPECT_LE(mort, pop);
}

TEST(Generator, ZeroProbabilityParametersGiveZeroObservations) {
  auto c = small_config(24);
  c.observe_probability = {1.0, 1.0, 1.0};
  auto e = generate_event(c, "zero", StreamKey(12));
  ModelParams theta = c.theta_true;
  theta.mu = {200.0, 200.0, 200.0};
  const auto r = generate_observations(e, theta, c, StreamKey(13));
  ASSERT_FALSE(r.observations.records.empty());
  for (const auto& o : r.observations.records) EXPECT_EQ(o.value, 0);
}

TEST(Generator, TruthMustPassTheScreen) {
  auto c = small_config();
  c.theta_true.beta[0] = 0.6;  // extreme covariates push vulnerability far outside [-3, 3]
  c.theta_true.beta[1] = 0.6;
  c.theta_true.beta[3] = 0.6;
  EXPECT_THROW(generate_dataset(c), ConfigError);
}

TEST(Generator, RejectsInvalidConfig) {
  auto c = small_config();
  c.min_side = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.min_side = 10;
  c.max_side = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.events = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(PointBuildings, CertainDamageAndNoDamage) {
  const auto e = quakesr::testing::make_event("pts", 3, 3, [](int, int) { return 8.0; }, 10, 20);
  ModelParams certain = quakesr::testing::typical_params();
  certain.mu[2] = -50.0;
  certain.kappa[2] = 0.1;
  certain.sigma[2] = 1e-6;
  const auto all = generate_point_building_data(e, certain, StreamKey(1));
  ASSERT_EQ(all.size(), 9u * 20u);
  for (const auto& p : all) EXPECT_EQ(p.label, DamageLabel::Damaged);

  ModelParams none = certain;
  none.mu[2] = 60.0;
  const auto zero = generate_point_building_data(e, none, StreamKey(1));
  for (const auto& p : zero) EXPECT_EQ(p.label, DamageLabel::Undamaged);
}

TEST(PointBuildings, PointsLieInsideTheirCell) {
  const auto e = quakesr::testing::make_event("geo", 2, 4, [](int, int) { return 7.0; }, 10, 5);
  const auto pts = generate_point_building_data(e, quakesr::testing::typical_params(), StreamKey(2));
  const double deg = e.georef.cell_size_arcmin / 60.0;
  for (const auto& p : pts) {
    const int r = static_cast<int>(p.cell) / e.shape.cols;
    const int c = static_cast<int>(p.cell) % e.shape.cols;
    EXPECT_GE(p.lon, e.georef.origin_lon + c * deg);
    EXPECT_LT(p.lon, e.georef.origin_lon + (c + 1) * deg);
    EXPECT_GE(p.lat, e.georef.origin_lat + r * deg);
    EXPECT_LT(p.lat, e.georef.origin_lat + (r + 1) * deg);
  }
}

TEST(PointBuildings, DamagedShareMatchesRealizedProbability) {
  // one cell, 1e4 buildings: the damaged count is binomial in the realized probability
  const auto e = quakesr::testing::make_event("big", 1, 1, [](int, int) { return 8.0; }, 10, 10000);
  const auto theta = quakesr::testing::typical_params();
  const StreamKey key(77);
  const ForwardModel model(e, theta);
  Engine realize = key.child("realize").engine();
  const double p = model.damage_probabilities(realize)[0];
  const auto pts = generate_point_building_data(e, theta, key);
  double damaged = 0;
  for (const auto& b : pts) damaged += b.label == DamageLabel::Damaged;
  const double n = static_cast<double>(pts.size());
  EXPECT_NEAR(damaged, n * p, 3.0 * std::sqrt(n * p * (1.0 - p)) + 1.0);
}

TEST(PointBuildings, WindowRestrictsToNearPeakCells) {
  const auto e = quakesr::testing::make_event("win", 1, 5, [](int, int c) { return 5.0 + c; }, 10, 3);
  const auto pts = generate_point_building_data(e, quakesr::testing::typical_params(), StreamKey(3), 1.0, 1.5);
  std::set<std::size_t> cells;
  for (const auto& p : pts) cells.insert(p.cell);
  EXPECT_EQ(cells, (std::set<std::size_t>{3, 4}));
}

TEST(DamageLabels, RoundTripStrings) {
  for (auto l : {DamageLabel::Undamaged, DamageLabel::Damaged, DamageLabel::Possibly})
    EXPECT_EQ(damage_label_from_string(to_string(l)), l);
  EXPECT_THROW(damage_label_from_string("collapsed"), InputError);
}

namespace {

std::vector<EventBundle> events_with_mortality(const std::vector<std::int64_t>& mort) {
  std::vector<EventBundle> out;
  for (std::size_t i = 0; i < mort.size(); ++i) {
    auto e = quakesr::testing::make_event(event_name(i), 1, 1, [](int, int) { return 6.0; });
    e.observations.records.push_back({e.id, "total", ImpactType::Mort, mort[i]});
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

TEST(Split, StratifiedTakesEveryThirdByMortality) {
  // ids in reverse mortality order, so the sort is by value rather than by position
  const auto events = events_with_mortality({900, 800, 700, 600, 500, 400, 300, 200, 100});
  const auto s = split_train_test(events, 2.0 / 3.0, SplitMode::Stratified);
  ASSERT_EQ(s.test.size(), 3u);
  ASSERT_EQ(s.train.size(), 6u);
  // sorted ascending, positions 3, 6, 9 hold mortality 300, 600, 900
  std::set<std::int64_t> test_mort;
  for (const auto& e : s.test) test_mort.insert(observed_total_mortality(e));
  EXPECT_EQ(test_mort, (std::set<std::int64_t>{300, 600, 900}));
}

TEST(Split, StratifiedBreaksTiesById) {
  const auto events = events_with_mortality({5, 5, 5, 5, 5, 5});
  const auto s = split_train_test(events, 2.0 / 3.0, SplitMode::Stratified);
  ASSERT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.test[0].id, "sim_003");
  EXPECT_EQ(s.test[1].id, "sim_006");
}

TEST(Split, RandomIsSeededAndSized) {
  const auto events = events_with_mortality({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  const auto a = split_train_test(events, 0.7, SplitMode::Random, 4);
  const auto b = split_train_test(events, 0.7, SplitMode::Random, 4);
  EXPECT_EQ(a.test.size(), 3u);
  EXPECT_EQ(a.train.size(), 7u);
  for (std::size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].id, b.test[i].id);
}

TEST(Split, RejectsRatiosLeavingAnEmptySet) {
  const auto events = events_with_mortality({1, 2, 3, 4});
  EXPECT_THROW(split_train_test(events, 1.0, SplitMode::Stratified), ConfigError);
  EXPECT_THROW(split_train_test(events, 0.0, SplitMode::Random), ConfigError);
  EXPECT_THROW(split_mode_from_string("blocked"), ConfigError);
}

TEST(Split, ObservedMortalityPrefersTheTotal) {
  auto e = quakesr::testing::make_event("m", 1, 2, [](int, int) { return 6.0; });
  e.regions.regions["a"] = {0};
  e.regions.regions["b"] = {1};
  e.observations.records.push_back({e.id, "a", ImpactType::Mort, 3});
  e.observations.records.push_back({e.id, "b", ImpactType::Mort, 4});
  e.observations.records.push_back({e.id, "a", ImpactType::Disp, 100});
  EXPECT_EQ(observed_total_mortality(e), 7);
  e.observations.records.push_back({e.id, "total", ImpactType::Mort, 9});
  EXPECT_EQ(observed_total_mortality(e), 9);
}
