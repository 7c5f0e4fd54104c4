#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/parallel.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/loss/scoring.hpp"
#include "quakesr/model/simulator.hpp"

namespace quakesr {

/// One observed coordinate of an event: the cells of a region and an impact type.
struct ObservedCoordinate {
  const std::vector<std::size_t>* cells = nullptr;
  ImpactType type = ImpactType::Mort;
  std::int64_t observed = 0;
};

/// An event with its observation vector resolved and transformed once.
struct PreparedEvent {
  const EventBundle* event = nullptr;
  std::uint64_t stream_tag = 0;  // derived from the event id, independent of event order
  std::vector<ObservedCoordinate> coords;
  std::vector<double> observed;  // transformed

  PreparedEvent(const EventBundle& e, const LossConfig& config) : event(&e), stream_tag(fnv1a(e.id)) {
    if (e.observations.records.empty()) throw InputError("event '" + e.id + "' has no observations");
    for (const auto& o : e.observations.records) {
      auto it = e.regions.regions.find(o.region);
      if (it == e.regions.regions.end())
        throw InputError("event '" + e.id + "': observation references undefined region '" + o.region + "'");
      coords.push_back({&it->second, o.type, o.value});
      observed.push_back(transform(static_cast<double>(o.value), o.type, config));
    }
  }

  [[nodiscard]] std::size_t dimension() const { return coords.size(); }

  /// Simulated values at the observed coordinates, untransformed.
  [[nodiscard]] std::vector<std::int64_t> collect(const CellTotals& totals) const {
    std::vector<std::int64_t> out;
    out.reserve(coords.size());
    for (const auto& c : coords) {
      const auto& layer = totals.of(c.type);
      std::int64_t s = 0;
      for (std::size_t j : *c.cells) s += layer[j];
      out.push_back(s);
    }
    return out;
  }

  [[nodiscard]] std::vector<double> transformed(const std::vector<std::int64_t>& values, const LossConfig& config) const {
    std::vector<double> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k)
      out[k] = transform(static_cast<double>(values[k]), coords[k].type, config);
    return out;
  }
};

/// The set of events a loss is computed over; events without observations are dropped and
/// reported in `warnings`.
struct LossProblem {
  std::vector<PreparedEvent> events;
  std::vector<std::string> warnings;
  LossConfig config;

  LossProblem(std::span<const EventBundle> bundles, const LossConfig& cfg) : config(cfg) {
    config.validate();
    for (const auto& e : bundles) {
      if (e.observations.records.empty()) {
        warnings.push_back("event '" + e.id + "' has no observations and is excluded from the loss");
        continue;
      }
      events.emplace_back(e, config);
    }
    if (events.empty()) throw InputError("loss needs at least one event with observations");
  }
};

/// Per-event normals for the event-wide error, one set per replicate.
using XiNormalsField = std::vector<std::vector<XiNormals>>;

inline std::size_t draws_per_event(const LossConfig& c) {
  return static_cast<std::size_t>(c.kind == LossKind::Energy ? c.replicates : c.pseudo_marginal_repeats);
}

/// Simulated observation vectors for one event (untransformed), one per replicate.
inline std::vector<std::vector<std::int64_t>> simulate_observed(const PreparedEvent& pe, const ModelParams& params,
                                                                std::size_t replicates, StreamKey key,
                                                                const std::vector<XiNormals>* xi = nullptr,
                                                                double threshold = kDefaultIntensityThreshold) {
  const ForwardModel model(*pe.event, params, SimulationSettings{threshold});
  const StreamKey event_key = key.child(pe.stream_tag);
  CellTotals totals;
  std::vector<std::vector<std::int64_t>> out;
  out.reserve(replicates);
  for (std::size_t m = 0; m < replicates; ++m) {
    Engine g = event_key.child(static_cast<std::uint64_t>(m)).engine();
    totals.reset(pe.event->shape.cells());
    model.run(g, xi ? &(*xi).at(m) : nullptr, totals);
    out.push_back(pe.collect(totals));
  }
  return out;
}

/// Energy score of one event's observations against M forward draws.
inline double event_loss(const PreparedEvent& pe, const ModelParams& params, const LossConfig& config, StreamKey key,
                         const std::vector<XiNormals>* xi = nullptr) {
  const auto sims = simulate_observed(pe, params, static_cast<std::size_t>(config.replicates), key, xi,
                                      config.intensity_threshold);
  std::vector<std::vector<double>> xs;
  xs.reserve(sims.size());
  for (const auto& s : sims) xs.push_back(pe.transformed(s, config));
  return energy_score(pe.observed, xs);
}

/// Mean Euclidean distance over single-draw repeats.
inline double euclidean_event_loss(const PreparedEvent& pe, const ModelParams& params, const LossConfig& config,
                                   StreamKey key, const std::vector<XiNormals>* xi = nullptr) {
  const auto sims = simulate_observed(pe, params, static_cast<std::size_t>(config.pseudo_marginal_repeats), key, xi,
                                      config.intensity_threshold);
  double total = 0.0;
  for (const auto& s : sims) total += euclidean_distance(pe.transformed(s, config), pe.observed);
  return total / static_cast<double>(sims.size());
}

inline double event_loss_of_kind(const PreparedEvent& pe, const ModelParams& params, const LossConfig& config,
                                 StreamKey key, const std::vector<XiNormals>* xi = nullptr) {
  return config.kind == LossKind::Energy ? event_loss(pe, params, config, key, xi)
                                         : euclidean_event_loss(pe, params, config, key, xi);
}

/// Mean per-event loss. Event streams are keyed by event id, so the value does not depend on
/// the order of events or on the number of worker threads.
inline double dataset_loss(const LossProblem& problem, const ModelParams& params, StreamKey key,
                           const XiNormalsField* xi = nullptr, unsigned threads = 1) {
  const std::size_t n = problem.events.size();
  if (n == 0) throw InputError("dataset loss over zero events");
  std::vector<double> per_event(n);
  parallel_for(n, threads, [&](std::size_t i) {
    per_event[i] = event_loss_of_kind(problem.events[i], params, problem.config, key, xi ? &(*xi).at(i) : nullptr);
  });
  // fixed summation order by event id keeps the mean bit-identical under permutation
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return problem.events[a].event->id < problem.events[b].event->id; });
  double s = 0.0;
  for (std::size_t i : order) s += per_event[i];
  return s / static_cast<double>(n);
}

inline double dataset_loss(std::span<const EventBundle> events, const ModelParams& params, const LossConfig& config,
                           StreamKey key) {
  if (events.empty()) throw InputError("dataset loss over zero events");
  return dataset_loss(LossProblem(events, config), params, key);
}

}  // namespace quakesr
