#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quakesr/eval/metrics.hpp"
#include "quakesr/eval/predict.hpp"

namespace quakesr::eval {

/// Whole-event mortality forecast against what was observed.
struct EventForecast {
  std::string event_id;
  std::int64_t observed = 0;
  double median = 0.0;
  AlertLevel predicted_alert = AlertLevel::Green;
  AlertLevel observed_alert = AlertLevel::Green;
  PagerResult pager;
  std::size_t observed_bin = 0;
  double rps = 0.0;
};

/// Events need a "total" region and at least one mortality observation; others are skipped and
/// named in `skipped`.
inline std::vector<EventForecast> event_forecasts(const PredictiveSummary& summary,
                                                  const std::vector<EventBundle>& events,
                                                  std::vector<std::string>* skipped = nullptr) {
  std::vector<EventForecast> out;
  for (const auto& e : events) {
    const auto* c = summary.find(e.id, "total", ImpactType::Mort);
    const bool has_mort = std::any_of(e.observations.records.begin(), e.observations.records.end(),
                                      [](const Observation& o) { return o.type == ImpactType::Mort; });
    if (!c || !has_mort) {
      if (skipped) skipped->push_back(e.id);
      continue;
    }
    EventForecast f;
    f.event_id = e.id;
    f.observed = synth::observed_total_mortality(e);
    f.median = c->median;
    f.predicted_alert = gdacs_alert(f.median);
    f.observed_alert = gdacs_alert(static_cast<double>(f.observed));
    f.pager = pager_bins(std::vector<double>(c->samples.begin(), c->samples.end()));
    f.observed_bin = pager_bin(static_cast<double>(f.observed));
    f.rps = rps(f.pager.probs, f.observed_bin);
    out.push_back(f);
  }
  return out;
}

struct PointScores {
  std::vector<synth::PointBuilding> points;
  std::vector<double> scores;  // modelled damage probability of each building's cell
};

/// Modelled damage probability for every surveyed building of the given events.
inline PointScores score_points(const std::vector<synth::PointBuilding>& points,
                                const std::vector<EventBundle>& events, const std::vector<ModelParams>& thetas,
                                std::size_t draws, StreamKey key) {
  PointScores out;
  for (const auto& e : events) {
    std::vector<const synth::PointBuilding*> mine;
    for (const auto& p : points)
      if (p.event_id == e.id) mine.push_back(&p);
    if (mine.empty()) continue;
    const auto prob = cell_damage_probability(e, thetas, draws, key.child(fnv1a(e.id)));
    for (const auto* p : mine) {
      if (p->cell >= prob.size()) throw InputError("surveyed building references a cell outside event '" + e.id + "'");
      out.points.push_back(*p);
      out.scores.push_back(prob[p->cell]);
    }
  }
  return out;
}

}  // namespace quakesr::eval
