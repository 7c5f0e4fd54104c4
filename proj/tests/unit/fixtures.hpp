#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "quakesr/model/params.hpp"
#include "quakesr/model/types.hpp"

namespace quakesr::testing {

/// Small event with zero standardized covariates and one shock of the given intensity.
inline EventBundle make_event(const std::string& id, int rows, int cols,
                              const std::function<double(int, int)>& intensity, std::int64_t pop_per_quantile = 100,
                              std::int64_t buildings = 50) {
  EventBundle e;
  e.id = id;
  e.shape = {rows, cols};
  const std::size_t n = e.shape.cells();
  HazardInstance h;
  h.intensity.resize(n);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) h.intensity[static_cast<std::size_t>(r * cols + c)] = intensity(r, c);
  h.first_haz = true;
  h.order = 0;
  e.hazards.push_back(h);
  QuantileCounts q;
  q.fill(pop_per_quantile);
  e.exposure.population.assign(n, q);
  e.exposure.buildings = std::vector<std::int64_t>(n, buildings);
  auto& cv = e.covariates;
  cv.vs30_raw.assign(n, 400.0);
  cv.popdens_raw.assign(n, 100.0);
  cv.shdi_raw.assign(n, 0.7);
  cv.gnic_raw.assign(n, 10000.0);
  cv.eqfreq_raw.assign(n, 0.1);
  cv.income_shares.fill(0.1);
  cv.vs30.assign(n, 0.0);
  cv.popdens.assign(n, 0.0);
  cv.shdi.assign(n, 0.0);
  cv.eqfreq.assign(n, 0.0);
  cv.gnic.assign(n, QuantileValues{});
  std::vector<std::size_t> all(n);
  for (std::size_t j = 0; j < n; ++j) all[j] = j;
  e.regions.regions["total"] = all;
  return e;
}

/// A parameter set in the interior of the prior box.
inline ModelParams typical_params() {
  ModelParams p;
  p.beta = {0.1, -0.05, -0.1, 0.05, -0.1, 0.05, 0.1, -0.05};
  p.mu = {10.5, 8.5, 8.0};
  p.kappa = {1.2, 1.2, 1.0};
  p.sigma = {0.6, 0.6, 0.5};
  p.sigma_local_mort = 0.8;
  p.rho = 0.5;
  return p;
}

}  // namespace quakesr::testing
