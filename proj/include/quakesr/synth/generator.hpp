#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/model/params.hpp"
#include "quakesr/model/simulator.hpp"
#include "quakesr/model/vulnerability.hpp"
#include "quakesr/prior/prior.hpp"

namespace quakesr::synth {

/// Parameters used to generate the default synthetic datasets.
inline ModelParams default_true_params() {
  ModelParams p;
  p.beta = {0.15, -0.1, -0.15, 0.1, -0.1, 0.1, 0.15, -0.1};
  p.mu = {10.0, 8.5, 8.0};
  p.kappa = {1.2, 1.2, 1.0};
  p.sigma = {1.0, 0.6, 0.5};
  p.sigma_local_mort = 0.8;
  p.rho = 0.5;
  return p;
}

struct GenConfig {
  std::size_t events = 45;
  int min_side = 8;
  int max_side = 16;
  std::array<double, 3> shock_count_weights{0.7, 0.2, 0.1};  // 1, 2, 3 shocks
  int block_size = 3;
  double total_only_weight = 0.3;  // per impact type: whole-event total instead of clusters
  int min_clusters = 2;
  int max_clusters = 8;
  PerImpact<double> observe_probability{1.0, 0.8, 0.7};
  double peak_min = 5.5;
  double peak_max = 9.5;
  double decay_min = 0.35;  // MMI lost per cell of distance
  double decay_max = 0.8;
  double noise_amplitude = 0.3;
  double pop_log_mean = 7.0;  // log of people per cell
  double pop_log_sd = 1.0;
  double persons_per_building = 4.0;
  double night_probability = 0.4;
  double point_fraction = 0.1;  // share of each cell's buildings emitted as labelled points
  double point_window = 1.5;    // surveyed cells lie within this many MMI of the event peak; <= 0 for all
  ModelParams theta_true = default_true_params();
  std::uint64_t seed = 0;

  void validate() const {
    if (events < 1) throw ConfigError("event count must be >= 1");
    if (!(min_side >= 1 && min_side <= max_side && max_side <= 50))
      throw ConfigError("grid sides must satisfy 1 <= min_side <= max_side <= 50");
    if (block_size < 1) throw ConfigError("covariate block size must be >= 1");
    if (!(min_clusters >= 1 && min_clusters <= max_clusters)) throw ConfigError("cluster bounds inconsistent");
    if (!(peak_min <= peak_max && decay_min <= decay_max)) throw ConfigError("hazard ranges inconsistent");
    if (!(noise_amplitude >= 0.0)) throw ConfigError("noise amplitude must be >= 0");
    if (!(point_fraction >= 0.0 && point_fraction <= 1.0)) throw ConfigError("point fraction must lie in [0, 1]");
    for (double w : shock_count_weights)
      if (!(w >= 0.0)) throw ConfigError("shock count weights must be >= 0");
    for (double p : observe_probability)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("observation probabilities must lie in [0, 1]");
  }
};

namespace detail {

inline double uniform(Engine& g, double lo, double hi) { return lo + (hi - lo) * uniform01(g); }

inline int uniform_int(Engine& g, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(g);
}

/// Radial decay from an epicentre plus a bounded smooth ripple, clipped below at zero.
inline std::vector<double> intensity_field(GridShape shape, double er, double ec, double peak, double decay,
                                           double amplitude, Engine& g) {
  const double f1 = uniform(g, 0.2, 0.8), f2 = uniform(g, 0.2, 0.8);
  const double p1 = uniform(g, 0.0, 6.283185307179586), p2 = uniform(g, 0.0, 6.283185307179586);
  std::vector<double> out(shape.cells());
  for (int r = 0; r < shape.rows; ++r)
    for (int c = 0; c < shape.cols; ++c) {
      const double dist = std::hypot(r - er, c - ec);
      const double ripple = amplitude * std::sin(f1 * r + p1) * std::cos(f2 * c + p2);
      out[static_cast<std::size_t>(r * shape.cols + c)] = std::max(0.0, peak - decay * dist + ripple);
    }
  return out;
}

}  // namespace detail

/// One synthetic event with raw covariates, standardized against the event itself. Datasets
/// re-standardize over all their events.
inline EventBundle generate_event(const GenConfig& config, const std::string& id, StreamKey key) {
  config.validate();
  Engine g = key.engine();
  std::normal_distribution<double> normal;
  EventBundle e;
  e.id = id;
  e.shape = {detail::uniform_int(g, config.min_side, config.max_side),
             detail::uniform_int(g, config.min_side, config.max_side)};
  e.georef = {std::round(detail::uniform(g, -170.0, 170.0) * 24.0) / 24.0,
              std::round(detail::uniform(g, -50.0, 50.0) * 24.0) / 24.0, 2.5};
  e.provenance = "synthetic";
  const GridShape shape = e.shape;
  const std::size_t n = shape.cells();

  // shocks
  std::discrete_distribution<int> shock_count(config.shock_count_weights.begin(), config.shock_count_weights.end());
  const int shocks = 1 + shock_count(g);
  const double er = detail::uniform(g, 0.0, shape.rows - 1.0);
  const double ec = detail::uniform(g, 0.0, shape.cols - 1.0);
  const double peak = detail::uniform(g, config.peak_min, config.peak_max);
  const double decay = detail::uniform(g, config.decay_min, config.decay_max);
  const int main_position = shocks == 1 ? 0 : (uniform01(g) < 0.3 ? 1 : 0);  // sometimes a foreshock first
  for (int s = 0; s < shocks; ++s) {
    HazardInstance h;
    h.order = s;
    h.first_haz = s == 0;
    h.night = uniform01(g) < config.night_probability;
    if (s == main_position) {
      h.intensity = detail::intensity_field(shape, er, ec, peak, decay, config.noise_amplitude, g);
    } else {
      const double shift_r = detail::uniform(g, -3.0, 3.0), shift_c = detail::uniform(g, -3.0, 3.0);
      const double secondary = std::max(0.0, peak - detail::uniform(g, 0.3, 1.5));
      h.intensity = detail::intensity_field(shape, er + shift_r, ec + shift_c, secondary, decay,
                                            config.noise_amplitude, g);
    }
    e.hazards.push_back(std::move(h));
  }

  // block-constant covariates and block-level population density
  const int bs = config.block_size;
  const int brows = (shape.rows + bs - 1) / bs, bcols = (shape.cols + bs - 1) / bs;
  struct Block {
    double vs30, shdi, gnic, eqfreq, pop_effect;
  };
  std::vector<Block> blocks(static_cast<std::size_t>(brows * bcols));
  for (auto& b : blocks) {
    b.vs30 = std::exp(detail::uniform(g, std::log(180.0), std::log(760.0)));
    b.shdi = detail::uniform(g, 0.45, 0.9);
    b.gnic = std::exp(8.5 + 0.7 * normal(g));
    b.eqfreq = std::exp(-3.0 + normal(g));
    b.pop_effect = config.pop_log_sd * normal(g);
  }
  auto block_of = [&](std::size_t j) {
    const int r = static_cast<int>(j) / shape.cols, c = static_cast<int>(j) % shape.cols;
    return static_cast<std::size_t>((r / bs) * bcols + c / bs);
  };

  std::vector<std::int64_t> totals(n);
  e.exposure.population.assign(n, QuantileCounts{});
  std::vector<std::int64_t> buildings(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double mean_log = config.pop_log_mean + blocks[block_of(j)].pop_effect;
    totals[j] = static_cast<std::int64_t>(std::llround(std::exp(mean_log + 0.5 * normal(g))));
    const std::int64_t base = totals[j] / kQuantiles;
    const std::int64_t rem = totals[j] % kQuantiles;
    for (std::size_t q = 0; q < kQuantiles; ++q)
      e.exposure.population[j][q] = base + (static_cast<std::int64_t>(q) < rem ? 1 : 0);
    buildings[j] = static_cast<std::int64_t>(
        std::llround(static_cast<double>(totals[j]) / config.persons_per_building * std::exp(0.2 * normal(g))));
  }
  e.exposure.buildings = buildings;

  auto& cv = e.covariates;
  cv.vs30_raw.resize(n);
  cv.popdens_raw.resize(n);
  cv.shdi_raw.resize(n);
  cv.gnic_raw.resize(n);
  cv.eqfreq_raw.resize(n);
  std::vector<double> block_pop(blocks.size(), 0.0), block_cells(blocks.size(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    block_pop[block_of(j)] += static_cast<double>(totals[j]);
    block_cells[block_of(j)] += 1.0;
  }
  constexpr double kCellAreaKm2 = 21.4;  // 2.5 arc-minutes square near the equator
  for (std::size_t j = 0; j < n; ++j) {
    const auto& b = blocks[block_of(j)];
    cv.vs30_raw[j] = b.vs30;
    cv.popdens_raw[j] = block_pop[block_of(j)] / block_cells[block_of(j)] / kCellAreaKm2;
    cv.shdi_raw[j] = b.shdi;
    cv.gnic_raw[j] = b.gnic;
    cv.eqfreq_raw[j] = b.eqfreq;
  }
  const double skew = detail::uniform(g, 1.5, 3.0);
  double share_sum = 0.0;
  for (std::size_t k = 0; k < 10; ++k) share_sum += cv.income_shares[k] = std::exp(skew * static_cast<double>(k) / 9.0);
  for (double& s : cv.income_shares) s /= share_sum;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  e.regions.regions["total"] = all;

  const std::vector<EventBundle> self{e};
  apply_standardization(e, compute_standardization(self));
  return e;
}

/// Clusters of `members`: each member joins the nearest of k distinct random centres drawn from
/// the members (ties to the lower index).
inline std::vector<std::vector<std::size_t>> make_clusters(GridShape shape, const std::vector<std::size_t>& members,
                                                           int k, Engine& g) {
  std::vector<std::size_t> cells = members;
  std::shuffle(cells.begin(), cells.end(), g);
  cells.resize(static_cast<std::size_t>(k));
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
  for (std::size_t j : members) {
    const int r = static_cast<int>(j) / shape.cols, c = static_cast<int>(j) % shape.cols;
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const int cr = static_cast<int>(cells[i]) / shape.cols, cc = static_cast<int>(cells[i]) % shape.cols;
      const double d = std::hypot(r - cr, c - cc);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    out[best].push_back(j);
  }
  return out;
}

struct ObservationResult {
  ObservationSet observations;
  PerImpact<double> xi{};  // realized event-wide error of the sample behind the observations
  std::vector<std::string> warnings;
};

/// Cell-centre intensity maxima over shocks.
inline std::vector<double> max_intensity(const EventBundle& e) {
  std::vector<double> out(e.shape.cells(), 0.0);
  for (const auto& h : e.hazards)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::max(out[j], h.intensity[j]);
  return out;
}

/// Cells reached by at least one shock at or above the damage threshold; all cells if none are.
inline std::vector<std::size_t> affected_cells(const EventBundle& e, double threshold = kDefaultIntensityThreshold) {
  std::vector<std::size_t> out;
  const auto imax = max_intensity(e);
  for (std::size_t j = 0; j < imax.size(); ++j)
    if (imax[j] >= threshold) out.push_back(j);
  if (out.empty()) {
    out.resize(imax.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
  }
  return out;
}

/// Observe one forward draw under `theta`. Each impact type is either observed as a whole-event
/// total or over a shared set of clusters covering the shaken area; some types are left
/// unobserved. Cells outside the shaken area take no impact, so cluster observations still sum
/// to the event totals. Cluster regions are added to the event's region map.
inline ObservationResult generate_observations(EventBundle& event, const ModelParams& theta, const GenConfig& config,
                                               StreamKey key) {
  ObservationResult out;
  Engine g = key.child("pattern").engine();
  const auto members = affected_cells(event);
  int k = detail::uniform_int(g, config.min_clusters, config.max_clusters);
  if (static_cast<std::size_t>(k) > members.size()) {
    out.warnings.push_back("event '" + event.id + "': " + std::to_string(k) + " clusters requested for " +
                           std::to_string(members.size()) + " cells; reduced");
    k = static_cast<int>(members.size());
  }
  const auto clusters = make_clusters(event.shape, members, k, g);
  std::array<bool, 3> observed{}, total_only{};
  bool any = false;
  for (std::size_t t = 0; t < 3; ++t) {
    observed[t] = uniform01(g) < config.observe_probability[t];
    total_only[t] = uniform01(g) < config.total_only_weight;
    any = any || observed[t];
  }
  if (!any) observed[0] = true;

  bool uses_clusters = false;
  for (std::size_t t = 0; t < 3; ++t) uses_clusters = uses_clusters || (observed[t] && !total_only[t]);
  if (uses_clusters) {
    for (std::size_t i = 0; i < clusters.size(); ++i) event.regions.regions["cluster_" + std::to_string(i + 1)] = clusters[i];
    event.regions.partitions_grid = members.size() == event.shape.cells();
  }

  Engine sim = key.child("sample").engine();
  const ForwardModel model(event, theta);
  const auto sample = sample_event_impact(model, sim);
  out.xi = sample.xi;
  const auto agg = aggregate_impacts(sample, event.regions);
  for (std::size_t t = 0; t < 3; ++t) {
    if (!observed[t]) continue;
    const ImpactType type = kImpactTypes[t];
    if (type == ImpactType::BuildDam && !event.exposure.buildings) continue;
    if (total_only[t]) {
      out.observations.records.push_back({event.id, "total", type, agg.at("total")[t]});
    } else {
      for (std::size_t i = 0; i < clusters.size(); ++i) {
        const std::string name = "cluster_" + std::to_string(i + 1);
        out.observations.records.push_back({event.id, name, type, agg.at(name)[t]});
      }
    }
  }
  return out;
}

enum class DamageLabel { Undamaged, Damaged, Possibly };

inline std::string_view to_string(DamageLabel l) {
  switch (l) {
    case DamageLabel::Undamaged: return "undamaged";
    case DamageLabel::Damaged: return "damaged";
    case DamageLabel::Possibly: return "possibly";
  }
  return "?";
}

inline DamageLabel damage_label_from_string(std::string_view s) {
  if (s == "undamaged") return DamageLabel::Undamaged;
  if (s == "damaged") return DamageLabel::Damaged;
  if (s == "possibly") return DamageLabel::Possibly;
  throw InputError("unknown damage label '" + std::string(s) + "'");
}

struct PointBuilding {
  std::string event_id;
  std::size_t cell = 0;
  double lon = 0.0;
  double lat = 0.0;
  double intensity = 0.0;  // largest intensity over the event's shocks
  DamageLabel label = DamageLabel::Undamaged;
  friend bool operator==(const PointBuilding&, const PointBuilding&) = default;
};

/// Buildings placed uniformly inside their cells, a `fraction` of each cell's stock, labelled
/// damaged with the cell's realized damage probability under `theta`. With `window` > 0 only
/// cells within `window` MMI of the event's peak intensity are surveyed.
inline std::vector<PointBuilding> generate_point_building_data(const EventBundle& event, const ModelParams& theta,
                                                               StreamKey key, double fraction = 1.0,
                                                               double window = 0.0) {
  if (!event.exposure.buildings) throw InputError("event '" + event.id + "' has no building layer");
  const ForwardModel model(event, theta);
  Engine realize = key.child("realize").engine();
  const auto p = model.damage_probabilities(realize);
  const auto imax = max_intensity(event);
  const double peak = imax.empty() ? 0.0 : *std::max_element(imax.begin(), imax.end());
  Engine g = key.child("place").engine();
  const double deg = event.georef.cell_size_arcmin / 60.0;
  std::vector<PointBuilding> out;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (window > 0.0 && imax[j] < peak - window) continue;
    const auto count = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>((*event.exposure.buildings)[j])));
    const int r = static_cast<int>(j) / event.shape.cols, c = static_cast<int>(j) % event.shape.cols;
    for (std::int64_t b = 0; b < count; ++b) {
      PointBuilding pb;
      pb.event_id = event.id;
      pb.cell = j;
      pb.lon = event.georef.origin_lon + (c + uniform01(g)) * deg;
      pb.lat = event.georef.origin_lat + (r + uniform01(g)) * deg;
      pb.intensity = imax[j];
      pb.label = uniform01(g) < p[j] ? DamageLabel::Damaged : DamageLabel::Undamaged;
      out.push_back(std::move(pb));
    }
  }
  return out;
}

struct SyntheticTruth {
  ModelParams theta;
  std::uint64_t seed = 0;
  std::map<std::string, PerImpact<double>> event_xi;
};

struct SyntheticDataset {
  std::vector<EventBundle> events;
  std::vector<PointBuilding> points;
  SyntheticTruth truth;
  std::vector<std::string> warnings;
};

inline std::string event_name(std::size_t i) {
  std::string s = std::to_string(i + 1);
  return "sim_" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

/// Generate events, standardize covariates over the whole set, then observe each event under
/// the true parameters. The true parameters must pass the simulated-extremes screen.
inline SyntheticDataset generate_dataset(const GenConfig& config) {
  config.validate();
  const StreamKey root(config.seed);
  SyntheticDataset ds;
  for (std::size_t i = 0; i < config.events; ++i)
    ds.events.push_back(generate_event(config, event_name(i), root.child("event", i)));
  const auto k = compute_standardization(ds.events);
  for (auto& e : ds.events) apply_standardization(e, k);

  PriorSpec spec;
  spec.mode = ScreenMode::SimulatedExtremes;
  spec.percentiles = compute_covariate_percentiles(ds.events);
  const auto screen = higher_level_check(config.theta_true, spec);
  if (!screen.pass) throw ConfigError("true parameters fail the simulated-extremes screen: " + screen.describe());

  ds.truth.theta = config.theta_true;
  ds.truth.seed = config.seed;
  for (std::size_t i = 0; i < ds.events.size(); ++i) {
    auto& e = ds.events[i];
    auto obs = generate_observations(e, config.theta_true, config, root.child("observe", i));
    e.observations = std::move(obs.observations);
    ds.truth.event_xi[e.id] = obs.xi;
    ds.warnings.insert(ds.warnings.end(), obs.warnings.begin(), obs.warnings.end());
    if (config.point_fraction > 0.0) {
      auto pts = generate_point_building_data(e, config.theta_true, root.child("points", i), config.point_fraction,
                                                      config.point_window);
      ds.points.insert(ds.points.end(), pts.begin(), pts.end());
    }
  }
  return ds;
}

/// Observed whole-event mortality: the "total" observation if present, else the sum of the
/// event's mortality observations.
inline std::int64_t observed_total_mortality(const EventBundle& e) {
  std::int64_t sum = 0;
  for (const auto& o : e.observations.records) {
    if (o.type != ImpactType::Mort) continue;
    if (o.region == "total") return o.value;
    sum += o.value;
  }
  return sum;
}

enum class SplitMode { Random, Stratified };

inline SplitMode split_mode_from_string(std::string_view s) {
  if (s == "random") return SplitMode::Random;
  if (s == "stratified") return SplitMode::Stratified;
  throw ConfigError("unknown split mode '" + std::string(s) + "'");
}

struct Split {
  std::vector<EventBundle> train;
  std::vector<EventBundle> test;
};

/// `ratio` is the training share. Stratified mode sorts by observed mortality (ties by id) and
/// sends every k-th event, k = round(1 / (1 - ratio)), to the test set, starting at position k.
inline Split split_train_test(const std::vector<EventBundle>& events, double ratio, SplitMode mode,
                              std::uint64_t seed = 0) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("training ratio must lie in (0, 1); the test set would be empty");
  std::vector<std::size_t> idx(events.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<bool> to_test(events.size(), false);
  if (mode == SplitMode::Stratified) {
    if (events.size() < 3) throw InputError("stratified split needs at least 3 events");
    std::vector<std::int64_t> mort(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) mort[i] = observed_total_mortality(events[i]);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return mort[a] != mort[b] ? mort[a] < mort[b] : events[a].id < events[b].id;
    });
    const auto k = static_cast<std::size_t>(std::max(2L, std::lround(1.0 / (1.0 - ratio))));
    for (std::size_t pos = k; pos <= idx.size(); pos += k) to_test[idx[pos - 1]] = true;
  } else {
    Engine g = StreamKey(seed).child("split").engine();
    std::shuffle(idx.begin(), idx.end(), g);
    const auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(events.size()) * (1.0 - ratio)));
    if (n_test == 0 || n_test == events.size()) throw ConfigError("split leaves an empty train or test set");
    for (std::size_t i = 0; i < n_test; ++i) to_test[idx[i]] = true;
  }
  Split s;
  for (std::size_t i = 0; i < events.size(); ++i) (to_test[i] ? s.test : s.train).push_back(events[i]);
  if (s.test.empty()) throw ConfigError("split leaves an empty test set");
  return s;
}

}  // namespace quakesr::synth
