#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/model/params.hpp"
#include "quakesr/model/types.hpp"
#include "quakesr/model/vulnerability.hpp"

namespace quakesr {

struct SimulationSettings {
  double intensity_threshold = kDefaultIntensityThreshold;
};

/// Standard-normal draws underlying the event-wide error; the error itself is the event
/// Cholesky factor applied to these.
using XiNormals = std::array<double, 3>;

/// One forward-model draw for an event, summed over shocks.
struct ImpactSample {
  GridShape shape;
  std::vector<QuantileCounts> mort;
  std::vector<QuantileCounts> disp;
  std::vector<QuantileCounts> rem;
  std::vector<std::int64_t> builddam;
  PerImpact<double> xi{};
  /// Local error per shock (in ordering) and cell; zero where the shock is below threshold.
  std::vector<std::vector<PerImpact<double>>> eps;
};

/// Forward model bound to one event and one parameter set.
///
/// Construction precomputes the covariate part of the vulnerability and the error Cholesky
/// factors, so repeated draws only pay for the random parts.
class ForwardModel {
 public:
  ForwardModel(const EventBundle& event, const ModelParams& params, SimulationSettings settings = {})
      : event_(&event), params_(params), settings_(settings), cov_(build_error_covariances(params)) {
    if (event.hazards.empty()) throw InputError("event '" + event.id + "': empty hazard list");
    for (double k : params.kappa)
      if (!(k > 0.0)) throw ParameterError("curve width kappa must be > 0");
    const std::size_t n = event.shape.cells();
    if (event.exposure.population.size() != n || event.covariates.vs30.size() != n ||
        event.covariates.gnic.size() != n)
      throw InputError("event '" + event.id + "': exposure/covariate grids do not match the grid");
    for (const auto& h : event.hazards)
      if (h.intensity.size() != n) throw InputError("event '" + event.id + "': hazard/exposure dimension mismatch");

    order_.resize(event.hazards.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(),
              [&](std::size_t a, std::size_t b) { return event.hazards[a].order < event.hazards[b].order; });

    people_vuln_.resize(n);
    building_vuln_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (int q = 0; q < kQuantiles; ++q)
        people_vuln_[j][static_cast<std::size_t>(q)] =
            covariate_vulnerability(cell_covariates(event.covariates, j, q), params.beta);
      building_vuln_[j] = covariate_vulnerability(cell_covariates(event.covariates, j, kBuildingQuantile), params.beta);
    }
  }

  [[nodiscard]] const EventBundle& event() const { return *event_; }
  [[nodiscard]] const ModelParams& params() const { return params_; }
  [[nodiscard]] const ErrorCovariances& covariances() const { return cov_; }
  [[nodiscard]] const std::vector<std::size_t>& hazard_order() const { return order_; }

  [[nodiscard]] PerImpact<double> event_error(const XiNormals& z) const {
    const Eigen::Vector3d xi = cov_.event_chol * Eigen::Vector3d(z[0], z[1], z[2]);
    return {xi[0], xi[1], xi[2]};
  }

  /// Draws one realization and reports every count to the sink:
  ///   sink.people(step, cell, quantile, mort, disp)
  ///   sink.buildings(step, cell, damaged)
  ///   sink.local_error(step, cell, eps)
  /// where `step` is the position of the shock in ordering sequence. Returns the realized
  /// event-wide error. When `xi_normals` is null the normals are drawn from `g` first.
  template <class Sink>
  PerImpact<double> run(Engine& g, const XiNormals* xi_normals, Sink& sink) const {
    std::normal_distribution<double> normal;
    XiNormals z{};
    if (xi_normals) {
      z = *xi_normals;
    } else {
      for (double& v : z) v = normal(g);
    }
    const PerImpact<double> xi = event_error(z);

    const auto& ev = *event_;
    const std::size_t n = ev.shape.cells();
    std::vector<QuantileCounts> remaining_people = ev.exposure.population;
    const bool have_buildings = ev.exposure.buildings.has_value();
    std::vector<std::int64_t> remaining_buildings;
    if (have_buildings) remaining_buildings = *ev.exposure.buildings;

    for (std::size_t step = 0; step < order_.size(); ++step) {
      const HazardInstance& h = ev.hazards[order_[step]];
      const double flag_v = flag_vulnerability({h.first_haz, h.night}, params_.beta);
      for (std::size_t j = 0; j < n; ++j) {
        const double intensity = h.intensity[j];
        if (!(intensity >= settings_.intensity_threshold)) continue;
        const Eigen::Vector3d e =
            cov_.local_chol * Eigen::Vector3d(normal(g), normal(g), normal(g));
        sink.local_error(step, j, PerImpact<double>{e[0], e[1], e[2]});
        const double shift_mort = intensity + flag_v + e[0] + xi[0];
        const double shift_disp = intensity + flag_v + e[1] + xi[1];
        for (std::size_t q = 0; q < kQuantiles; ++q) {
          std::int64_t& pool = remaining_people[j][q];
          if (pool == 0) continue;
          const double v = people_vuln_[j][q];
          const double p_mort = stats::normal_cdf(shift_mort + v, params_.mu[0], params_.kappa[0]);
          const double p_disp =
              std::max(stats::normal_cdf(shift_disp + v, params_.mu[1], params_.kappa[1]) - p_mort, 0.0);
          const std::int64_t mort = sample_binomial(g, pool, p_mort);
          std::int64_t disp = 0;
          if (p_mort < 1.0) disp = sample_binomial(g, pool - mort, std::min(1.0, p_disp / (1.0 - p_mort)));
          pool -= mort + disp;
          sink.people(step, j, q, mort, disp);
        }
        if (have_buildings) {
          std::int64_t& pool = remaining_buildings[j];
          const double p_bd = stats::normal_cdf(intensity + flag_v + building_vuln_[j] + e[2] + xi[2],
                                                params_.mu[2], params_.kappa[2]);
          const std::int64_t damaged = sample_binomial(g, pool, p_bd);
          pool -= damaged;
          sink.buildings(step, j, damaged);
        }
      }
    }
    return xi;
  }

  /// Realized probability that a building in each cell is damaged by at least one shock,
  /// drawing fresh event-wide and local errors but no counts.
  [[nodiscard]] std::vector<double> damage_probabilities(Engine& g) const {
    std::normal_distribution<double> normal;
    XiNormals z{};
    for (double& v : z) v = normal(g);
    const PerImpact<double> xi = event_error(z);
    const auto& ev = *event_;
    const std::size_t n = ev.shape.cells();
    std::vector<double> undamaged(n, 1.0);
    for (std::size_t idx : order_) {
      const HazardInstance& h = ev.hazards[idx];
      const double flag_v = flag_vulnerability({h.first_haz, h.night}, params_.beta);
      for (std::size_t j = 0; j < n; ++j) {
        if (!(h.intensity[j] >= settings_.intensity_threshold)) continue;
        const Eigen::Vector3d e = cov_.local_chol * Eigen::Vector3d(normal(g), normal(g), normal(g));
        const double p = stats::normal_cdf(h.intensity[j] + flag_v + building_vuln_[j] + e[2] + xi[2],
                                           params_.mu[2], params_.kappa[2]);
        undamaged[j] *= 1.0 - p;
      }
    }
    for (double& u : undamaged) u = 1.0 - u;
    return undamaged;
  }

 private:
  const EventBundle* event_;
  ModelParams params_;
  SimulationSettings settings_;
  ErrorCovariances cov_;
  std::vector<std::size_t> order_;
  std::vector<QuantileValues> people_vuln_;
  std::vector<double> building_vuln_;
};

/// Sink that accumulates per-cell totals over shocks and quantiles.
struct CellTotals {
  std::vector<std::int64_t> mort;
  std::vector<std::int64_t> disp;
  std::vector<std::int64_t> builddam;

  void reset(std::size_t cells) {
    mort.assign(cells, 0);
    disp.assign(cells, 0);
    builddam.assign(cells, 0);
  }
  void people(std::size_t, std::size_t cell, std::size_t, std::int64_t m, std::int64_t d) {
    mort[cell] += m;
    disp[cell] += d;
  }
  void buildings(std::size_t, std::size_t cell, std::int64_t b) { builddam[cell] += b; }
  void local_error(std::size_t, std::size_t, const PerImpact<double>&) {}

  [[nodiscard]] const std::vector<std::int64_t>& of(ImpactType t) const {
    switch (t) {
      case ImpactType::Mort: return mort;
      case ImpactType::Disp: return disp;
      case ImpactType::BuildDam: return builddam;
    }
    return mort;
  }
};

namespace detail {
struct SampleSink {
  ImpactSample* s;
  void people(std::size_t, std::size_t cell, std::size_t q, std::int64_t m, std::int64_t d) {
    s->mort[cell][q] += m;
    s->disp[cell][q] += d;
  }
  void buildings(std::size_t, std::size_t cell, std::int64_t b) { s->builddam[cell] += b; }
  void local_error(std::size_t step, std::size_t cell, const PerImpact<double>& e) { s->eps[step][cell] = e; }
};
}  // namespace detail

/// Full forward draw with all randomness fixed by the engine state.
inline ImpactSample sample_event_impact(const ForwardModel& model, Engine& g, const XiNormals* xi_normals = nullptr) {
  const auto& ev = model.event();
  const std::size_t n = ev.shape.cells();
  ImpactSample s;
  s.shape = ev.shape;
  s.mort.assign(n, QuantileCounts{});
  s.disp.assign(n, QuantileCounts{});
  s.builddam.assign(n, 0);
  s.eps.assign(ev.hazards.size(), std::vector<PerImpact<double>>(n, PerImpact<double>{}));
  detail::SampleSink sink{&s};
  s.xi = model.run(g, xi_normals, sink);
  s.rem = ev.exposure.population;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t q = 0; q < kQuantiles; ++q) s.rem[j][q] -= s.mort[j][q] + s.disp[j][q];
  return s;
}

inline ImpactSample sample_event_impact(const EventBundle& event, const ModelParams& params, std::uint64_t seed,
                                        SimulationSettings settings = {}) {
  const ForwardModel model(event, params, settings);
  Engine g = StreamKey(seed).engine();
  return sample_event_impact(model, g);
}

/// Regional totals over shocks, quantiles and cells.
inline std::map<std::string, PerImpact<std::int64_t>> aggregate_impacts(const ImpactSample& s,
                                                                         const RegionMap& regions) {
  std::map<std::string, PerImpact<std::int64_t>> out;
  const std::size_t n = s.shape.cells();
  for (const auto& [name, cells] : regions.regions) {
    PerImpact<std::int64_t> tot{};
    for (std::size_t j : cells) {
      if (j >= n) throw InputError("region '" + name + "' references cell outside the grid");
      for (std::size_t q = 0; q < kQuantiles; ++q) {
        tot[0] += s.mort[j][q];
        tot[1] += s.disp[j][q];
      }
      tot[2] += s.builddam[j];
    }
    out.emplace(name, tot);
  }
  return out;
}

/// Per-cell totals over shocks and quantiles.
inline PerImpact<std::vector<std::int64_t>> gridded_impacts(const ImpactSample& s) {
  const std::size_t n = s.shape.cells();
  PerImpact<std::vector<std::int64_t>> out{std::vector<std::int64_t>(n, 0), std::vector<std::int64_t>(n, 0),
                                           s.builddam};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t q = 0; q < kQuantiles; ++q) {
      out[0][j] += s.mort[j][q];
      out[1][j] += s.disp[j][q];
    }
  return out;
}

}  // namespace quakesr
