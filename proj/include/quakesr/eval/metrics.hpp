#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/synth/generator.hpp"

namespace quakesr::eval {

enum class AlertLevel { Green, Orange, Red };

inline std::string_view to_string(AlertLevel a) {
  switch (a) {
    case AlertLevel::Green: return "green";
    case AlertLevel::Orange: return "orange";
    case AlertLevel::Red: return "red";
  }
  return "?";
}

/// Traffic-light fatality alert on half-open ranges [0, 10), [10, 100), [100, inf).
inline AlertLevel gdacs_alert(double median_mortality) {
  if (!(median_mortality >= 0.0)) throw InputError("median mortality must be non-negative");
  if (median_mortality < 10.0) return AlertLevel::Green;
  if (median_mortality < 100.0) return AlertLevel::Orange;
  return AlertLevel::Red;
}

inline constexpr std::size_t kPagerBins = 7;
using PagerProbs = std::array<double, kPagerBins>;

/// Upper edges of the fatality bins [0,1), [1,10), ..., [1e4,1e5), [1e5,1e7).
inline constexpr std::array<double, kPagerBins> kPagerUpper{1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e7};

inline std::size_t pager_bin(double fatalities) {
  if (!(fatalities >= 0.0)) throw InputError("fatality count must be non-negative");
  for (std::size_t k = 0; k < kPagerBins; ++k)
    if (fatalities < kPagerUpper[k]) return k;
  return kPagerBins - 1;
}

struct PagerResult {
  PagerProbs probs{};
  std::int64_t clipped = 0;  // samples at or above the top edge, counted in the top bin
};

inline PagerResult pager_bins(const std::vector<double>& mortality_samples) {
  if (mortality_samples.empty()) throw InputError("no mortality samples");
  PagerResult r;
  for (double x : mortality_samples) {
    if (x >= kPagerUpper.back()) ++r.clipped;
    r.probs[pager_bin(x)] += 1.0;
  }
  for (double& p : r.probs) p /= static_cast<double>(mortality_samples.size());
  return r;
}

/// Ranked probability score over the ordered bins, normalised by K - 1.
inline double rps(const PagerProbs& forecast, std::size_t outcome_bin) {
  if (outcome_bin >= kPagerBins) throw InputError("outcome bin out of range");
  double total = 0.0;
  for (double p : forecast) {
    if (!(p >= 0.0)) throw InputError("forecast probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("forecast probabilities must sum to 1");
  double f = 0.0, s = 0.0;
  for (std::size_t k = 0; k < kPagerBins; ++k) {
    f += forecast[k];
    const double o = k >= outcome_bin ? 1.0 : 0.0;
    s += (f - o) * (f - o);
  }
  return s / static_cast<double>(kPagerBins - 1);
}

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // from (0, 0) to (1, 1)
  double auc = 0.0;
};

/// ROC curve over the unique scores (descending) and its trapezoidal area, which equals the
/// rank-averaged concordance probability under ties.
inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
  std::int64_t pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw InputError("ROC needs both positive and negative labels");
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocResult r;
  r.points.push_back({INFINITY, 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double t = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == t) {
      (labels[idx[i]] ? tp : fp) += 1;
      ++i;
    }
    r.points.push_back({t, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  for (std::size_t k = 1; k < r.points.size(); ++k)
    r.auc += (r.points[k].fpr - r.points[k - 1].fpr) * 0.5 * (r.points[k].tpr + r.points[k - 1].tpr);
  return r;
}

struct BinnedDamageRow {
  std::string event_id;
  double intensity_bin = 0.0;
  std::int64_t buildings = 0;
  double observed_fraction = 0.0;
  double mean_modeled = 0.0;  // NaN when no modelled probabilities were given
};

/// Buildings grouped per event by maximum intensity rounded to the nearest `bin_width`;
/// "possibly damaged" labels are excluded. `modeled` is aligned with `points` or empty.
inline std::vector<BinnedDamageRow> intensity_binned_damage(const std::vector<synth::PointBuilding>& points,
                                                            const std::vector<double>& modeled = {},
                                                            double bin_width = 0.5) {
  if (!modeled.empty() && modeled.size() != points.size())
    throw InputError("modelled probabilities must align with the points");
  if (!(bin_width > 0.0)) throw InputError("bin width must be > 0");
  struct Acc {
    std::int64_t n = 0, damaged = 0;
    double p = 0.0;
  };
  std::map<std::pair<std::string, double>, Acc> acc;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pb = points[i];
    if (pb.label == synth::DamageLabel::Possibly) continue;
    const double bin = std::round(pb.intensity / bin_width) * bin_width;
    auto& a = acc[{pb.event_id, bin}];
    ++a.n;
    a.damaged += pb.label == synth::DamageLabel::Damaged;
    if (!modeled.empty()) a.p += modeled[i];
  }
  std::vector<BinnedDamageRow> rows;
  for (const auto& [key, a] : acc) {
    const double n = static_cast<double>(a.n);
    rows.push_back({key.first, key.second, a.n, static_cast<double>(a.damaged) / n,
                    modeled.empty() ? std::nan("") : a.p / n});
  }
  return rows;
}


struct EventAuc {
  std::string event_id;
  std::size_t buildings = 0;
  double auc = 0.0;
};

/// ROC area computed separately for every event's surveyed buildings. Events whose labels are
/// all one class are skipped; "possibly damaged" labels are excluded.
inline std::vector<EventAuc> per_event_auc(const std::vector<synth::PointBuilding>& points,
                                           const std::vector<double>& scores) {
  if (scores.size() != points.size()) throw InputError("scores must align with the points");
  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].label == synth::DamageLabel::Possibly) continue;
    auto& g = groups[points[i].event_id];
    g.first.push_back(scores[i]);
    g.second.push_back(points[i].label == synth::DamageLabel::Damaged ? 1 : 0);
  }
  std::vector<EventAuc> out;
  for (const auto& [id, g] : groups) {
    const auto pos = std::count(g.second.begin(), g.second.end(), 1);
    if (pos == 0 || pos == static_cast<long>(g.second.size())) continue;
    out.push_back({id, g.second.size(), roc_auc(g.first, g.second).auc});
  }
  return out;
}

}  // namespace quakesr::eval
