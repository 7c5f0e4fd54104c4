#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/parallel.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/core/stats.hpp"
#include "quakesr/model/simulator.hpp"

namespace quakesr::eval {

/// Predictive draws for one (event, region, impact type) coordinate.
struct CoordinateSummary {
  std::string event_id;
  std::string region;
  ImpactType type = ImpactType::Mort;
  std::vector<std::int64_t> samples;
  double mean = 0.0;
  double median = 0.0;
  std::map<double, double> quantiles;  // probability -> value

  [[nodiscard]] double quantile(double prob) const {
    std::vector<double> xs(samples.begin(), samples.end());
    return stats::quantile(std::move(xs), prob);
  }
};

struct PredictiveSummary {
  std::size_t draws = 0;
  std::vector<CoordinateSummary> coordinates;
  std::map<std::string, PerImpact<std::vector<double>>> cell_means;  // per event, per cell

  [[nodiscard]] const CoordinateSummary* find(const std::string& event, const std::string& region,
                                              ImpactType type) const {
    for (const auto& c : coordinates)
      if (c.event_id == event && c.region == region && c.type == type) return &c;
    return nullptr;
  }
};

struct PredictConfig {
  std::size_t draws = 200;
  std::vector<double> quantile_levels{0.05, 0.95};
  double intensity_threshold = kDefaultIntensityThreshold;
  unsigned threads = 1;
};

/// Push parameter draws (uniform over `thetas`) through the forward model for every event and
/// summarise each region / impact-type coordinate plus per-cell mean maps.
inline PredictiveSummary posterior_predictive(const std::vector<EventBundle>& events,
                                              const std::vector<ModelParams>& thetas, const PredictConfig& config,
                                              StreamKey key) {
  if (thetas.empty()) throw InputError("posterior predictive needs a non-empty parameter population");
  if (config.draws < 1) throw ConfigError("predictive draw count must be >= 1");
  for (double q : config.quantile_levels)
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile levels must lie in [0, 1]");

  std::vector<std::size_t> pick(config.draws);
  {
    Engine g = key.child("pick").engine();
    std::uniform_int_distribution<std::size_t> u(0, thetas.size() - 1);
    for (auto& p : pick) p = u(g);
  }

  PredictiveSummary out;
  out.draws = config.draws;
  for (const auto& e : events) {
    const bool buildings = e.exposure.buildings.has_value();
    const std::size_t types = buildings ? 3 : 2;
    std::vector<std::pair<std::string, const std::vector<std::size_t>*>> regions;
    for (const auto& [name, cells] : e.regions.regions) regions.emplace_back(name, &cells);
    // [draw][region][type]
    std::vector<std::vector<PerImpact<std::int64_t>>> per_draw(config.draws,
                                                              std::vector<PerImpact<std::int64_t>>(regions.size()));
    std::vector<CellTotals> cell_draws(config.draws);
    const StreamKey event_key = key.child(fnv1a(e.id));
    parallel_for(config.draws, config.threads, [&](std::size_t d) {
      const ForwardModel model(e, thetas[pick[d]], SimulationSettings{config.intensity_threshold});
      Engine g = event_key.child(static_cast<std::uint64_t>(d)).engine();
      auto& totals = cell_draws[d];
      totals.reset(e.shape.cells());
      model.run(g, nullptr, totals);
      for (std::size_t r = 0; r < regions.size(); ++r)
        for (std::size_t t = 0; t < types; ++t) {
          std::int64_t s = 0;
          const auto& layer = totals.of(kImpactTypes[t]);
          for (std::size_t j : *regions[r].second) s += layer[j];
          per_draw[d][r][t] = s;
        }
    });
    for (std::size_t r = 0; r < regions.size(); ++r)
      for (std::size_t t = 0; t < types; ++t) {
        CoordinateSummary c;
        c.event_id = e.id;
        c.region = regions[r].first;
        c.type = kImpactTypes[t];
        c.samples.reserve(config.draws);
        for (std::size_t d = 0; d < config.draws; ++d) c.samples.push_back(per_draw[d][r][t]);
        std::vector<double> xs(c.samples.begin(), c.samples.end());
        c.mean = stats::mean(xs);
        std::sort(xs.begin(), xs.end());
        c.median = stats::quantile_sorted(xs, 0.5);
        for (double q : config.quantile_levels) c.quantiles[q] = stats::quantile_sorted(xs, q);
        out.coordinates.push_back(std::move(c));
      }
    PerImpact<std::vector<double>> means;
    for (std::size_t t = 0; t < 3; ++t) means[t].assign(e.shape.cells(), 0.0);
    for (const auto& ct : cell_draws)
      for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t j = 0; j < e.shape.cells(); ++j) means[t][j] += static_cast<double>(ct.of(kImpactTypes[t])[j]);
    for (auto& m : means)
      for (double& v : m) v /= static_cast<double>(config.draws);
    out.cell_means[e.id] = std::move(means);
  }
  return out;
}

struct CoverageReport {
  double level = 0.9;
  std::int64_t observations = 0;
  std::int64_t covered = 0;
  PerImpact<std::int64_t> observations_by_type{};
  PerImpact<std::int64_t> covered_by_type{};

  [[nodiscard]] double overall() const {
    return observations ? static_cast<double>(covered) / static_cast<double>(observations) : std::nan("");
  }
  [[nodiscard]] double by_type(ImpactType t) const {
    const auto n = observations_by_type[index(t)];
    return n ? static_cast<double>(covered_by_type[index(t)]) / static_cast<double>(n) : std::nan("");
  }
};

/// Fraction of observations inside the central `level` predictive interval (inclusive ends).
inline CoverageReport coverage_report(const PredictiveSummary& summary, const std::vector<EventBundle>& events,
                                      double level = 0.9) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("coverage level must lie in (0, 1)");
  CoverageReport r;
  r.level = level;
  const double lo_p = 0.5 - level / 2.0, hi_p = 0.5 + level / 2.0;
  for (const auto& e : events)
    for (const auto& o : e.observations.records) {
      const auto* c = summary.find(e.id, o.region, o.type);
      if (!c) throw InputError("no predictive draws for " + e.id + "/" + o.region + "/" + std::string(to_string(o.type)));
      const double lo = c->quantile(lo_p), hi = c->quantile(hi_p);
      const auto v = static_cast<double>(o.value);
      const bool in = v >= lo && v <= hi;
      ++r.observations;
      ++r.observations_by_type[index(o.type)];
      r.covered += in;
      r.covered_by_type[index(o.type)] += in;
    }
  if (r.observations == 0) throw InputError("coverage needs at least one observation");
  return r;
}

/// Per-cell median over parameter draws of the realized damage probability (with fresh
/// event-wide and local errors for every draw).
inline std::vector<double> cell_damage_probability(const EventBundle& event, const std::vector<ModelParams>& thetas,
                                                   std::size_t draws, StreamKey key,
                                                   double intensity_threshold = kDefaultIntensityThreshold) {
  if (!event.exposure.buildings) throw InputError("event '" + event.id + "' has no building layer");
  if (thetas.empty()) throw InputError("damage probability needs a non-empty parameter population");
  if (draws < 1) throw ConfigError("draw count must be >= 1");
  const std::size_t n = event.shape.cells();
  std::vector<std::vector<double>> per_draw(draws);
  Engine pick_g = key.child("pick").engine();
  std::uniform_int_distribution<std::size_t> u(0, thetas.size() - 1);
  for (std::size_t d = 0; d < draws; ++d) {
    const ForwardModel model(event, thetas[u(pick_g)], SimulationSettings{intensity_threshold});
    Engine g = key.child(static_cast<std::uint64_t>(d)).engine();
    per_draw[d] = model.damage_probabilities(g);
  }
  std::vector<double> out(n);
  std::vector<double> column(draws);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t d = 0; d < draws; ++d) column[d] = per_draw[d][j];
    out[j] = stats::median(column);
  }
  return out;
}

}  // namespace quakesr::eval
