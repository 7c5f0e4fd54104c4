#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/core/stats.hpp"
#include "quakesr/model/params.hpp"
#include "quakesr/model/vulnerability.hpp"

namespace quakesr {

struct Interval {
  double lower = 0.0;
  double upper = 1.0;

  /// Open interval, except that the probability-space ends 0 and 1 are attainable: the normal
  /// CDF saturates to exactly 0 or 1 in floating point long before the true value gets there.
  [[nodiscard]] bool contains(double p) const {
    const bool above = lower <= 0.0 ? p >= lower : p > lower;
    const bool below = upper >= 1.0 ? p <= upper : p < upper;
    return above && below;
  }
};

/// One row of the impact-probability screen, all evaluated at the same intensity.
struct ScreenRow {
  double intensity = 0.0;
  std::optional<Interval> mort;
  std::optional<Interval> mort_plus_disp;
  std::optional<Interval> builddam;
  bool disp_exceeds_mort = false;
};

/// Bounds at zero vulnerability (used when fitting real events).
inline std::vector<ScreenRow> default_real_data_screen() {
  return {
      {4.6, Interval{0.0, 1e-6}, Interval{0.0, 0.01}, Interval{0.0, 0.05}, false},
      {7.0, Interval{0.0, 0.01}, Interval{0.0, 0.2}, Interval{1e-6, 0.4}, false},
      {8.0, std::nullopt, std::nullopt, std::nullopt, true},
      {9.5, Interval{1e-6, 1.0}, Interval{0.2, 1.0}, Interval{0.3, 1.0}, false},
  };
}

/// Relaxed bounds applied at the vulnerability extremes (used with simulated events).
inline std::vector<ScreenRow> default_extremes_screen() {
  return {
      {4.6, Interval{0.0, 0.03}, Interval{0.0, 0.1}, Interval{0.0, 0.15}, false},
      {7.0, Interval{0.0, 0.15}, Interval{0.0, 0.6}, Interval{1e-6, 0.75}, false},
      {8.0, std::nullopt, std::nullopt, std::nullopt, true},
      {9.5, Interval{1e-6, 1.0}, Interval{0.2, 1.0}, Interval{0.3, 1.0}, false},
  };
}

enum class ScreenMode { RealData, SimulatedExtremes, Off };

inline std::string_view to_string(ScreenMode m) {
  switch (m) {
    case ScreenMode::RealData: return "real-data";
    case ScreenMode::SimulatedExtremes: return "simulated-extremes";
    case ScreenMode::Off: return "off";
  }
  return "?";
}

inline ScreenMode screen_mode_from_string(std::string_view s) {
  if (s == "real-data") return ScreenMode::RealData;
  if (s == "simulated-extremes") return ScreenMode::SimulatedExtremes;
  if (s == "off") return ScreenMode::Off;
  throw ConfigError("unknown higher-level prior mode '" + std::string(s) + "'");
}

struct BoxBound {
  double lower = 0.0;
  double upper = 1.0;
  bool upper_open = false;
};

/// Box bounds for the non-regression parameters, indexed from the first curve centre.
/// Order: mu x3, kappa x3, sigma x3, sigma_local_mort, rho.
using BoxBounds = std::array<BoxBound, 11>;

inline BoxBounds default_box_bounds() {
  return {{
      {9.0, 13.5},  {6.5, 10.5}, {6.5, 10.0},              // mu: mort, disp, builddam
      {0.25, 3.0},  {0.25, 3.0}, {0.25, 3.0},              // kappa
      {0.0, 1.5},   {0.0, 1.5},  {0.0, 1.5},               // sigma
      {0.0, 2.0},                                          // sigma_local_mort
      {0.0, 1.0, true},                                    // rho; 1 is a degenerate covariance
  }};
}

struct PriorSpec {
  BoxBounds box = default_box_bounds();
  double beta_location = 0.0;
  double beta_scale = 0.2;
  ScreenMode mode = ScreenMode::RealData;
  std::vector<ScreenRow> real_data_rows = default_real_data_screen();
  std::vector<ScreenRow> extremes_rows = default_extremes_screen();
  std::optional<CovariatePercentiles> percentiles;  // required in extremes mode
  std::size_t dummy_count = 0;                      // extra Laplace coefficients unused by the model

  void validate() const {
    for (const auto& b : box)
      if (!(b.lower < b.upper)) throw ConfigError("prior box lower bound must be below upper bound");
    if (!(beta_scale > 0.0)) throw ConfigError("Laplace scale must be > 0");
    for (const auto* rows : {&real_data_rows, &extremes_rows}) {
      for (double want : {4.6, 7.0, 8.0, 9.5}) {
        const bool found = std::any_of(rows->begin(), rows->end(),
                                       [&](const ScreenRow& r) { return std::abs(r.intensity - want) < 1e-9; });
        if (!found) throw ConfigError("screen table must cover intensity " + std::to_string(want));
      }
    }
    if (mode == ScreenMode::SimulatedExtremes && !percentiles)
      throw ConfigError("simulated-extremes screen requires covariate percentiles");
  }
};

/// Lowest and highest vulnerability reachable from 1st/99th covariate percentiles, with the
/// shock flags and their interaction enumerated jointly.
inline std::pair<double, double> vulnerability_extremes(const std::array<double, kBetaCount>& beta,
                                                        const CovariatePercentiles& pct) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    if (!std::isfinite(pct.p01[k]) || !std::isfinite(pct.p99[k]))
      throw InputError("missing covariate percentile for term " + std::to_string(k + 1));
    const double a = beta[k] * pct.p01[k];
    const double b = beta[k] * pct.p99[k];
    lo += std::min(a, b);
    hi += std::max(a, b);
  }
  double flag_lo = std::numeric_limits<double>::infinity();
  double flag_hi = -std::numeric_limits<double>::infinity();
  for (int f = 0; f <= 1; ++f)
    for (int n = 0; n <= 1; ++n) {
      const double v = flag_vulnerability({f == 1, n == 1}, beta);
      flag_lo = std::min(flag_lo, v);
      flag_hi = std::max(flag_hi, v);
    }
  return {lo + flag_lo, hi + flag_hi};
}

struct ScreenResult {
  bool pass = true;
  double intensity = 0.0;
  double vulnerability = 0.0;
  std::string quantity;
  Interval bound;
  double value = 0.0;

  [[nodiscard]] std::string describe() const {
    if (pass) return "pass";
    return quantity + " = " + std::to_string(value) + " outside (" + std::to_string(bound.lower) + ", " +
           std::to_string(bound.upper) + ") at intensity " + std::to_string(intensity) + " (vulnerability " +
           std::to_string(vulnerability) + ")";
  }
};

namespace detail {
inline ScreenResult check_rows(const ModelParams& p, const std::vector<ScreenRow>& rows, double vuln) {
  for (double k : p.kappa)
    if (!(k > 0.0)) return {false, 0.0, vuln, "kappa", {0.0, 0.0}, k};
  for (const auto& row : rows) {
    const double d = row.intensity + vuln;
    const auto probs = impact_probabilities(d, d, d, p);
    auto check = [&](const std::optional<Interval>& bound, const char* name, double value) -> std::optional<ScreenResult> {
      if (bound && !bound->contains(value)) return ScreenResult{false, row.intensity, vuln, name, *bound, value};
      return std::nullopt;
    };
    if (auto r = check(row.mort, "p_mort", probs.mort)) return *r;
    if (auto r = check(row.mort_plus_disp, "p_mort + p_disp", probs.mort + probs.disp)) return *r;
    if (auto r = check(row.builddam, "p_builddam", probs.builddam)) return *r;
    if (row.disp_exceeds_mort && !(probs.disp > probs.mort))
      return ScreenResult{false, row.intensity, vuln, "p_disp", {probs.mort, 1.0}, probs.disp};
  }
  return {};
}
}  // namespace detail

/// Impact-probability screen with both error terms at zero. Real-data mode evaluates at zero
/// vulnerability; extremes mode evaluates at both vulnerability extremes with relaxed bounds.
inline ScreenResult higher_level_check(const ModelParams& p, const PriorSpec& spec) {
  switch (spec.mode) {
    case ScreenMode::Off: return {};
    case ScreenMode::RealData: return detail::check_rows(p, spec.real_data_rows, 0.0);
    case ScreenMode::SimulatedExtremes: {
      if (!spec.percentiles) throw ConfigError("simulated-extremes screen requires covariate percentiles");
      const auto [lo, hi] = vulnerability_extremes(p.beta, *spec.percentiles);
      if (auto r = detail::check_rows(p, spec.extremes_rows, lo); !r.pass) return r;
      return detail::check_rows(p, spec.extremes_rows, hi);
    }
  }
  return {};
}

inline bool within_box(const ModelParams& p, const PriorSpec& spec) {
  const std::array<double, 11> v{p.mu[0],    p.mu[1],    p.mu[2],    p.kappa[0],         p.kappa[1], p.kappa[2],
                                 p.sigma[0], p.sigma[1], p.sigma[2], p.sigma_local_mort, p.rho};
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto& b = spec.box[k];
    if (!(v[k] >= b.lower)) return false;
    if (b.upper_open ? !(v[k] < b.upper) : !(v[k] <= b.upper)) return false;
  }
  for (double b : p.beta)
    if (!std::isfinite(b)) return false;
  for (double d : p.dummies)
    if (!std::isfinite(d)) return false;
  return true;
}

/// Log prior density up to the constant of the uniform parts; -inf outside the support.
inline double log_prior_density(const ModelParams& p, const PriorSpec& spec) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (p.dummies.size() != spec.dummy_count) return kNegInf;
  if (!within_box(p, spec)) return kNegInf;
  if (!higher_level_check(p, spec).pass) return kNegInf;
  double lp = 0.0;
  for (double b : p.beta) lp += stats::laplace_log_density(b, spec.beta_location, spec.beta_scale);
  for (double d : p.dummies) lp += stats::laplace_log_density(d, spec.beta_location, spec.beta_scale);
  return lp;
}

template <class Urbg>
double sample_laplace(Urbg& g, double location, double scale) {
  double u = uniform01(g) - 0.5;
  while (u == -0.5) u = uniform01(g) - 0.5;
  return location - scale * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
}

/// Rejection sampler for the two-stage prior: box-uniform / Laplace draws retried until the
/// impact-probability screen passes.
class PriorSampler {
 public:
  static constexpr std::int64_t kWindow = 100000;
  static constexpr double kMinAcceptance = 1e-4;

  explicit PriorSampler(PriorSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  [[nodiscard]] const PriorSpec& spec() const { return spec_; }

  template <class Urbg>
  ModelParams draw_unscreened(Urbg& g) const {
    ModelParams p;
    for (double& b : p.beta) b = sample_laplace(g, spec_.beta_location, spec_.beta_scale);
    std::array<double, 11> v{};
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto& b = spec_.box[k];
      do {
        v[k] = b.lower + (b.upper - b.lower) * uniform01(g);
      } while (b.upper_open && v[k] >= b.upper);
    }
    p.mu = {v[0], v[1], v[2]};
    p.kappa = {v[3], v[4], v[5]};
    p.sigma = {v[6], v[7], v[8]};
    p.sigma_local_mort = v[9];
    p.rho = v[10];
    for (std::size_t i = 0; i < spec_.dummy_count; ++i)
      p.dummies.push_back(sample_laplace(g, spec_.beta_location, spec_.beta_scale));
    return p;
  }

  template <class Urbg>
  ModelParams sample(Urbg& g) {
    for (;;) {
      ModelParams p = draw_unscreened(g);
      ++attempts_;
      ++window_attempts_;
      const bool ok = higher_level_check(p, spec_).pass;
      if (ok) {
        ++accepted_;
        ++window_accepted_;
      }
      if (window_attempts_ >= kWindow) {
        if (static_cast<double>(window_accepted_) < kMinAcceptance * static_cast<double>(window_attempts_))
          throw ConfigError("prior acceptance rate below 1e-4: box bounds and screen are inconsistent");
        window_attempts_ = 0;
        window_accepted_ = 0;
      }
      if (ok) return p;
    }
  }

  [[nodiscard]] double acceptance_rate() const {
    return attempts_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(attempts_);
  }
  [[nodiscard]] std::int64_t attempts() const { return attempts_; }

 private:
  PriorSpec spec_;
  std::int64_t attempts_ = 0;
  std::int64_t accepted_ = 0;
  std::int64_t window_attempts_ = 0;
  std::int64_t window_accepted_ = 0;
};

/// Convenience one-shot draw.
template <class Urbg>
ModelParams sample_prior(Urbg& g, const PriorSpec& spec) {
  PriorSampler s(spec);
  return s.sample(g);
}

}  // namespace quakesr
