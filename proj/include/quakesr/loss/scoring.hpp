#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/model/types.hpp"

namespace quakesr {

enum class LossKind { Energy, Euclidean };

inline std::string_view to_string(LossKind k) { return k == LossKind::Energy ? "energy" : "euclidean"; }

inline LossKind loss_kind_from_string(std::string_view s) {
  if (s == "energy") return LossKind::Energy;
  if (s == "euclidean") return LossKind::Euclidean;
  throw ConfigError("unknown loss kind '" + std::string(s) + "'");
}

struct LossConfig {
  PerImpact<double> weights{7.0, 1.0, 0.6};
  double log_offset = 10.0;
  int replicates = 100;               // M, samples per energy score
  int pseudo_marginal_repeats = 10;   // single-draw repeats averaged in Euclidean mode
  LossKind kind = LossKind::Energy;
  double intensity_threshold = kDefaultIntensityThreshold;

  void validate() const {
    for (double w : weights)
      if (!(w > 0.0)) throw ConfigError("impact weights must be > 0");
    if (!(log_offset > 0.0)) throw ConfigError("log offset must be > 0");
    if (replicates < 1) throw ConfigError("replicate count M must be >= 1");
    if (pseudo_marginal_repeats < 1) throw ConfigError("pseudo-marginal repeats must be >= 1");
  }
};

/// Weighted log scale on which observed and simulated counts are compared.
inline double transform(double value, ImpactType type, const LossConfig& config) {
  if (!(value >= 0.0)) throw InputError("impact value must be non-negative");
  return config.weights[index(type)] * std::log(value + config.log_offset);
}

namespace detail {
inline double euclid(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}
}  // namespace detail

/// Euclidean distance between two vectors of equal dimension.
inline double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InputError("dimension mismatch in Euclidean distance");
  return detail::euclid(a.data(), b.data(), a.size());
}

/// Sample energy score of observation `y` against the ensemble `xs`:
///   (1/M) sum_j |x_j - y|  -  (1/(2 M^2)) sum_i sum_j |x_i - x_j|
/// The one-dimensional case uses the sorted-sample identity for the double sum.
inline double energy_score(const std::vector<double>& y, const std::vector<std::vector<double>>& xs) {
  const std::size_t d = y.size();
  const std::size_t m = xs.size();
  if (d == 0) throw InputError("energy score needs dimension >= 1");
  if (m == 0) throw InputError("energy score needs at least one sample");
  for (const auto& x : xs)
    if (x.size() != d) throw InputError("dimension mismatch in energy score");
  const double md = static_cast<double>(m);

  double fit = 0.0;
  for (const auto& x : xs) fit += detail::euclid(x.data(), y.data(), d);
  fit /= md;

  double spread = 0.0;
  if (d == 1) {
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = xs[i][0];
    std::sort(v.begin(), v.end());
    for (std::size_t k = 0; k < m; ++k) spread += (2.0 * static_cast<double>(k) + 1.0 - md) * v[k];
    spread *= 2.0;
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) spread += 2.0 * detail::euclid(xs[i].data(), xs[j].data(), d);
  }
  return fit - spread / (2.0 * md * md);
}

}  // namespace quakesr
