#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/stats.hpp"
#include "quakesr/model/params.hpp"
#include "quakesr/model/types.hpp"

namespace quakesr {

/// Standardized covariates of one cell, with GNIc already resolved to one income quantile.
struct CellCovariates {
  double vs30 = 0.0;
  double popdens = 0.0;
  double shdi = 0.0;
  double gnic = 0.0;
  double eqfreq = 0.0;
};

struct HazardFlags {
  bool first_haz = false;
  bool night = false;
};

/// Quantile index used for building damage, which is not split by income.
inline constexpr int kBuildingQuantile = -1;

inline CellCovariates cell_covariates(const CovariateGrid& cv, std::size_t cell, int quantile) {
  CellCovariates c{cv.vs30[cell], cv.popdens[cell], cv.shdi[cell], 0.0, cv.eqfreq[cell]};
  if (quantile == kBuildingQuantile) {
    // median income: midpoint of the two central quantiles
    c.gnic = 0.5 * (cv.gnic[cell][3] + cv.gnic[cell][4]);
  } else {
    c.gnic = cv.gnic[cell].at(static_cast<std::size_t>(quantile));
  }
  return c;
}

inline double flag_vulnerability(HazardFlags flags, const std::array<double, kBetaCount>& beta) {
  const double f = flags.first_haz ? 1.0 : 0.0;
  const double n = flags.night ? 1.0 : 0.0;
  return beta[5] * f + beta[6] * n + beta[7] * f * n;
}

inline double covariate_vulnerability(const CellCovariates& c, const std::array<double, kBetaCount>& beta) {
  for (double v : {c.vs30, c.popdens, c.shdi, c.gnic, c.eqfreq}) require_finite(v, "vulnerability covariate");
  return beta[0] * c.vs30 + beta[1] * c.popdens + beta[2] * c.shdi + beta[3] * c.gnic + beta[4] * c.eqfreq;
}

/// Linear vulnerability term including the FirstHaz x Night interaction.
inline double compute_vulnerability(const CellCovariates& c, HazardFlags flags,
                                    const std::array<double, kBetaCount>& beta) {
  return covariate_vulnerability(c, beta) + flag_vulnerability(flags, beta);
}

/// GNIc of the q-th of eight equal-population quantiles (q in 1..8). The outer national
/// deciles are dropped and the remaining eight are spread over the full percentile range.
inline double split_gnic(double gnic_cell, const DecileShares& shares, int quantile) {
  if (quantile < 1 || quantile > kQuantiles) throw InputError("income quantile must be in 1..8");
  const double a = 100.0 * (quantile - 1) / kQuantiles;
  const double b = 100.0 * quantile / kQuantiles;
  const double lo = 0.8 * a + 10.0;
  const double hi = 0.8 * b + 10.0;
  const auto decile = static_cast<std::size_t>(std::lround(lo / 10.0));
  const double share = shares.at(decile);
  if (!(share > 0.0) || !std::isfinite(share)) {
    throw InputError("missing income share for percentiles " + std::to_string(decile * 10) + "-" +
                     std::to_string(decile * 10 + 10));
  }
  return gnic_cell * share * 100.0 / (hi - lo);
}

inline double transform_vs30(double raw) {
  if (!(raw > 0.0)) throw InputError("Vs30 must be positive");
  return std::log(raw);
}
inline double transform_popdens(double raw) {
  if (!(raw >= 0.0)) throw InputError("population density must be non-negative");
  return std::log(raw + 0.1);
}
inline double transform_eqfreq(double raw) {
  if (!(raw >= 0.0)) throw InputError("earthquake frequency must be non-negative");
  return std::log(raw + 0.001);
}

namespace detail {
inline Scaling fit_scaling(const std::vector<double>& xs) {
  Scaling s{stats::mean(xs), std::sqrt(stats::variance(xs))};
  if (!(s.sd > 0.0)) s.sd = 1.0;
  return s;
}
}  // namespace detail

/// Mean/sd of each transformed covariate pooled over every cell of the given events.
inline StandardizationConstants compute_standardization(std::span<const EventBundle> events) {
  std::vector<double> vs30, popdens, shdi, gnic, eqfreq;
  for (const auto& e : events) {
    const auto& cv = e.covariates;
    for (std::size_t j = 0; j < cv.vs30_raw.size(); ++j) {
      vs30.push_back(transform_vs30(cv.vs30_raw[j]));
      popdens.push_back(transform_popdens(cv.popdens_raw[j]));
      shdi.push_back(cv.shdi_raw[j]);
      eqfreq.push_back(transform_eqfreq(cv.eqfreq_raw[j]));
      for (int q = 1; q <= kQuantiles; ++q) gnic.push_back(split_gnic(cv.gnic_raw[j], cv.income_shares, q));
    }
  }
  if (vs30.empty()) throw InputError("cannot standardize covariates without cells");
  return {detail::fit_scaling(vs30), detail::fit_scaling(popdens), detail::fit_scaling(shdi),
          detail::fit_scaling(gnic), detail::fit_scaling(eqfreq)};
}

/// Recomputes the standardized layers of an event from its raw layers.
inline void apply_standardization(EventBundle& e, const StandardizationConstants& k) {
  auto& cv = e.covariates;
  const std::size_t n = e.shape.cells();
  for (const auto* raw : {&cv.vs30_raw, &cv.popdens_raw, &cv.shdi_raw, &cv.gnic_raw, &cv.eqfreq_raw})
    if (raw->size() != n) throw InputError("event '" + e.id + "': raw covariate grid has wrong dimensions");
  cv.vs30.resize(n);
  cv.popdens.resize(n);
  cv.shdi.resize(n);
  cv.eqfreq.resize(n);
  cv.gnic.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    cv.vs30[j] = k.vs30.apply(transform_vs30(cv.vs30_raw[j]));
    cv.popdens[j] = k.popdens.apply(transform_popdens(cv.popdens_raw[j]));
    cv.shdi[j] = k.shdi.apply(cv.shdi_raw[j]);
    cv.eqfreq[j] = k.eqfreq.apply(transform_eqfreq(cv.eqfreq_raw[j]));
    for (int q = 1; q <= kQuantiles; ++q)
      cv.gnic[j][static_cast<std::size_t>(q - 1)] = k.gnic.apply(split_gnic(cv.gnic_raw[j], cv.income_shares, q));
  }
  e.standardization = k;
}

/// 1st / 99th percentiles of each standardized covariate.
struct CovariatePercentiles {
  std::array<double, 5> p01{};
  std::array<double, 5> p99{};
};

inline CovariatePercentiles compute_covariate_percentiles(std::span<const EventBundle> events) {
  std::array<std::vector<double>, 5> layers;
  for (const auto& e : events) {
    const auto& cv = e.covariates;
    for (std::size_t j = 0; j < cv.vs30.size(); ++j) {
      layers[0].push_back(cv.vs30[j]);
      layers[1].push_back(cv.popdens[j]);
      layers[2].push_back(cv.shdi[j]);
      for (double g : cv.gnic[j]) layers[3].push_back(g);
      layers[4].push_back(cv.eqfreq[j]);
    }
  }
  CovariatePercentiles out;
  for (std::size_t k = 0; k < 5; ++k) {
    if (layers[k].empty()) throw InputError("cannot compute covariate percentiles without cells");
    std::sort(layers[k].begin(), layers[k].end());
    out.p01[k] = stats::quantile_sorted(layers[k], 0.01);
    out.p99[k] = stats::quantile_sorted(layers[k], 0.99);
  }
  return out;
}

/// Latent damage: shaking plus vulnerability and both error terms, zero below the threshold.
inline double latent_damage(double intensity, double vulnerability, double eps, double xi,
                            double threshold = kDefaultIntensityThreshold) {
  for (double v : {intensity, vulnerability, eps, xi}) require_finite(v, "latent damage input");
  return intensity >= threshold ? intensity + vulnerability + eps + xi : 0.0;
}

struct ImpactProbabilities {
  double mort = 0.0;
  double disp = 0.0;
  double builddam = 0.0;
};

/// Normal-CDF damage curves. Displacement is what the displacement curve adds on top of
/// mortality, so mort + disp never exceeds one.
inline ImpactProbabilities impact_probabilities(double d_mort, double d_disp, double d_builddam,
                                                const ModelParams& p) {
  for (double k : p.kappa)
    if (!(k > 0.0)) throw ParameterError("curve width kappa must be > 0");
  ImpactProbabilities out;
  out.mort = stats::normal_cdf(d_mort, p.mu[0], p.kappa[0]);
  out.disp = std::max(stats::normal_cdf(d_disp, p.mu[1], p.kappa[1]) - out.mort, 0.0);
  out.builddam = stats::normal_cdf(d_builddam, p.mu[2], p.kappa[2]);
  return out;
}

}  // namespace quakesr
