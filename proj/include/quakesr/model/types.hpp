#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "quakesr/core/errors.hpp"

namespace quakesr {

enum class ImpactType : int { Mort = 0, Disp = 1, BuildDam = 2 };

inline constexpr std::array<ImpactType, 3> kImpactTypes{ImpactType::Mort, ImpactType::Disp,
                                                         ImpactType::BuildDam};

template <class T>
using PerImpact = std::array<T, 3>;

constexpr std::size_t index(ImpactType t) noexcept { return static_cast<std::size_t>(t); }

inline std::string_view to_string(ImpactType t) {
  switch (t) {
    case ImpactType::Mort: return "Mort";
    case ImpactType::Disp: return "Disp";
    case ImpactType::BuildDam: return "BuildDam";
  }
  return "?";
}

inline ImpactType impact_type_from_string(std::string_view s) {
  if (s == "Mort") return ImpactType::Mort;
  if (s == "Disp") return ImpactType::Disp;
  if (s == "BuildDam") return ImpactType::BuildDam;
  throw InputError("unknown impact type '" + std::string(s) + "'");
}

/// Income quantiles per cell (deciles 2..9 re-spread over eight equal population shares).
inline constexpr int kQuantiles = 8;

/// Default damage threshold in MMI; cells below it take no impact from that shock.
inline constexpr double kDefaultIntensityThreshold = 4.3;

struct GridShape {
  int rows = 0;
  int cols = 0;
  [[nodiscard]] std::size_t cells() const { return static_cast<std::size_t>(rows) * cols; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Grid georeference: origin of cell (0,0) and square cell size.
struct GeoRef {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  double cell_size_arcmin = 2.5;
  friend bool operator==(const GeoRef&, const GeoRef&) = default;
};

/// One shock of an event.
struct HazardInstance {
  std::vector<double> intensity;  // MMI per cell, row-major
  bool first_haz = true;
  bool night = false;
  int order = 0;
  friend bool operator==(const HazardInstance&, const HazardInstance&) = default;
};

using QuantileCounts = std::array<std::int64_t, kQuantiles>;

struct ExposureGrid {
  std::vector<QuantileCounts> population;          // Pop_0 per cell and quantile
  std::optional<std::vector<std::int64_t>> buildings;  // Build_0 per cell
  friend bool operator==(const ExposureGrid&, const ExposureGrid&) = default;
};

/// Mean / standard deviation applied to a (transformed) covariate.
struct Scaling {
  double mean = 0.0;
  double sd = 1.0;
  [[nodiscard]] double apply(double x) const { return (x - mean) / sd; }
  friend bool operator==(const Scaling&, const Scaling&) = default;
};

struct StandardizationConstants {
  Scaling vs30;     // on log(Vs30)
  Scaling popdens;  // on log(PopDens + 0.1)
  Scaling shdi;
  Scaling gnic;     // on per-quantile GNIc
  Scaling eqfreq;   // on log(EQFreq + 0.001)
  friend bool operator==(const StandardizationConstants&, const StandardizationConstants&) = default;
};

/// National pretax income shares of the ten deciles, lowest first.
using DecileShares = std::array<double, 10>;

using QuantileValues = std::array<double, kQuantiles>;

struct CovariateGrid {
  // raw layers, kept for provenance and re-standardization
  std::vector<double> vs30_raw;
  std::vector<double> popdens_raw;
  std::vector<double> shdi_raw;
  std::vector<double> gnic_raw;
  std::vector<double> eqfreq_raw;
  DecileShares income_shares{};

  // standardized layers used by the model
  std::vector<double> vs30;
  std::vector<double> popdens;
  std::vector<double> shdi;
  std::vector<QuantileValues> gnic;
  std::vector<double> eqfreq;

  friend bool operator==(const CovariateGrid&, const CovariateGrid&) = default;
};

struct RegionMap {
  std::map<std::string, std::vector<std::size_t>> regions;
  bool partitions_grid = false;

  [[nodiscard]] bool contains(const std::string& r) const { return regions.count(r) != 0; }
  friend bool operator==(const RegionMap&, const RegionMap&) = default;
};

struct Observation {
  std::string event_id;
  std::string region;
  ImpactType type = ImpactType::Mort;
  std::int64_t value = 0;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ObservationSet {
  std::vector<Observation> records;
  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;
};

enum class FirstHazConvention { NoPredecessor, PrecededByForeshock };

struct EventBundle {
  std::string id;
  GridShape shape;
  GeoRef georef;
  std::vector<HazardInstance> hazards;
  ExposureGrid exposure;
  CovariateGrid covariates;
  StandardizationConstants standardization;
  RegionMap regions;
  ObservationSet observations;
  FirstHazConvention first_haz_convention = FirstHazConvention::NoPredecessor;
  std::string provenance;

  friend bool operator==(const EventBundle&, const EventBundle&) = default;
};

inline void require_finite(double v, std::string_view what) {
  if (!std::isfinite(v)) throw InputError("non-finite value in " + std::string(what));
}

/// Checks every structural invariant of an event bundle; throws InputError naming the field.
inline void validate(const EventBundle& e) {
  const std::string where = "event '" + e.id + "': ";
  const std::size_t n = e.shape.cells();
  if (e.shape.rows <= 0 || e.shape.cols <= 0) throw InputError(where + "grid dimensions must be positive");
  if (e.hazards.empty()) throw InputError(where + "no hazards");
  std::set<int> orders;
  for (const auto& h : e.hazards) {
    if (h.intensity.size() != n) throw InputError(where + "hazard intensity grid has wrong dimensions");
    for (double v : h.intensity) require_finite(v, where + "hazard intensity");
    if (!orders.insert(h.order).second) throw InputError(where + "duplicate hazard ordering index");
  }
  if (e.exposure.population.size() != n) throw InputError(where + "population grid has wrong dimensions");
  for (const auto& q : e.exposure.population)
    for (auto c : q)
      if (c < 0) throw InputError(where + "negative population count");
  if (e.exposure.buildings) {
    if (e.exposure.buildings->size() != n) throw InputError(where + "building grid has wrong dimensions");
    for (auto c : *e.exposure.buildings)
      if (c < 0) throw InputError(where + "negative building count");
  }
  const auto& cv = e.covariates;
  for (const auto* layer : {&cv.vs30, &cv.popdens, &cv.shdi, &cv.eqfreq}) {
    if (layer->size() != n) throw InputError(where + "covariate grid has wrong dimensions");
    for (double v : *layer) require_finite(v, where + "standardized covariate");
  }
  if (cv.gnic.size() != n) throw InputError(where + "GNIc grid has wrong dimensions");
  for (const auto& q : cv.gnic)
    for (double v : q) require_finite(v, where + "standardized GNIc");
  for (const auto& [name, cells] : e.regions.regions)
    for (auto c : cells)
      if (c >= n) throw InputError(where + "region '" + name + "' references cell outside the grid");
  std::set<std::tuple<std::string, int>> seen;
  for (const auto& o : e.observations.records) {
    if (!e.regions.contains(o.region))
      throw InputError(where + "observation references undefined region '" + o.region + "'");
    if (o.value < 0) throw InputError(where + "negative observation value");
    if (!seen.emplace(o.region, static_cast<int>(o.type)).second)
      throw InputError(where + "duplicate observation for region '" + o.region + "' and " +
                       std::string(to_string(o.type)));
    if (o.type == ImpactType::BuildDam && !e.exposure.buildings)
      throw InputError(where + "building-damage observation without a building layer");
  }
}

}  // namespace quakesr
