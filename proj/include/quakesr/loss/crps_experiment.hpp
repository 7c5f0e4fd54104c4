#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/parallel.hpp"
#include "quakesr/core/rng.hpp"

namespace quakesr {

struct CrpsBiasRow {
  int m = 0;
  double sigma = 0.0;
  double mean_score = 0.0;
  std::int64_t trials = 0;
};

/// Finite-sample bias of the univariate energy score (CRPS).
///
/// Each trial draws an observation from N(0, 1) and M standard normals; the ensemble for each
/// sigma is the same normals scaled by sigma, so all sigma columns share random numbers. Trials
/// run in fixed blocks with their own streams, which makes the table independent of `threads`.
inline std::vector<CrpsBiasRow> crps_bias_experiment(const std::vector<int>& m_values,
                                                     const std::vector<double>& sigma_values, std::int64_t trials,
                                                     std::uint64_t seed, unsigned threads = 1) {
  if (trials < 1) throw ConfigError("CRPS experiment needs at least one trial");
  for (int m : m_values)
    if (m < 1) throw ConfigError("ensemble size M must be >= 1");
  for (double s : sigma_values)
    if (!(s > 0.0)) throw ConfigError("ensemble sd sigma must be > 0");

  constexpr std::int64_t kBlock = 2000;
  const std::int64_t blocks = (trials + kBlock - 1) / kBlock;
  const StreamKey root(seed);
  std::vector<CrpsBiasRow> rows;
  for (int m : m_values) {
    const std::size_t ns = sigma_values.size();
    std::vector<std::vector<double>> block_sums(static_cast<std::size_t>(blocks), std::vector<double>(ns, 0.0));
    parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t b) {
      Engine g = root.child(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(b)).engine();
      std::normal_distribution<double> normal;
      std::vector<double> z(static_cast<std::size_t>(m));
      const std::int64_t begin = static_cast<std::int64_t>(b) * kBlock;
      const std::int64_t end = std::min(trials, begin + kBlock);
      const double md = m;
      for (std::int64_t t = begin; t < end; ++t) {
        const double y = normal(g);
        for (double& v : z) v = normal(g);
        std::sort(z.begin(), z.end());
        double spread = 0.0;  // sum_i sum_j |z_i - z_j| / 2
        for (std::size_t k = 0; k < z.size(); ++k) spread += (2.0 * static_cast<double>(k) + 1.0 - md) * z[k];
        for (std::size_t s = 0; s < ns; ++s) {
          const double sigma = sigma_values[s];
          double fit = 0.0;
          for (double v : z) fit += std::abs(sigma * v - y);
          block_sums[b][s] += fit / md - sigma * spread / (md * md);
        }
      }
    });
    for (std::size_t s = 0; s < ns; ++s) {
      double total = 0.0;
      for (const auto& bs : block_sums) total += bs[s];
      rows.push_back({m, sigma_values[s], total / static_cast<double>(trials), trials});
    }
  }
  return rows;
}

/// Sigma with the lowest mean score for ensemble size m.
inline double crps_bias_argmin(const std::vector<CrpsBiasRow>& rows, int m) {
  const CrpsBiasRow* best = nullptr;
  for (const auto& r : rows)
    if (r.m == m && (!best || r.mean_score < best->mean_score)) best = &r;
  if (!best) throw InputError("no rows for requested M");
  return best->sigma;
}

}  // namespace quakesr
