#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quakesr/core/errors.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/eval/predict.hpp"
#include "quakesr/io/checkpoint.hpp"
#include "quakesr/loss/scoring.hpp"
#include "quakesr/mcmc/engine.hpp"
#include "quakesr/prior/prior.hpp"
#include "quakesr/smc/engine.hpp"
#include "quakesr/synth/generator.hpp"

namespace quakesr::io {

/// Every setting of a run, read from one flat JSON object with dotted keys, e.g.
///
///     { "seed": 7, "smc.particles": 200, "loss.replicates": 30, "prior.mode": "simulated-extremes" }
///
/// Keys that are absent keep their defaults; unknown keys are rejected.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;

  synth::GenConfig data;
  double train_ratio = 2.0 / 3.0;
  synth::SplitMode split = synth::SplitMode::Stratified;

  LossConfig loss;
  PriorSpec prior;
  smc::SmcConfig smc;
  mcmc::McmcConfig mcmc;
  eval::PredictConfig predict;
  double coverage_level = 0.9;
  std::size_t damage_draws = 100;

  std::vector<int> crps_m{5, 10, 20, 50, 100};
  double crps_sigma_min = 0.5;
  double crps_sigma_max = 1.3;
  double crps_sigma_step = 0.05;
  std::int64_t crps_trials = 100000;

  [[nodiscard]] std::vector<double> crps_sigmas() const {
    std::vector<double> out;
    const auto n = static_cast<int>(std::floor((crps_sigma_max - crps_sigma_min) / crps_sigma_step + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(crps_sigma_min + crps_sigma_step * i);
    return out;
  }

  /// Engine configs with the shared seed, thread count and replicate count filled in.
  [[nodiscard]] smc::SmcConfig smc_config() const {
    auto c = smc;
    c.seed = seed.value_or(0);
    c.threads = threads;
    c.replicates = loss.replicates;
    return c;
  }
  [[nodiscard]] mcmc::McmcConfig mcmc_config() const {
    auto c = mcmc;
    c.seed = seed.value_or(0);
    c.threads = threads;
    return c;
  }
  [[nodiscard]] synth::GenConfig gen_config() const {
    auto c = data;
    c.seed = seed.value_or(0);
    return c;
  }

  void validate() const {
    if (!seed) throw ConfigError("a seed is required (config key 'seed' or --seed)");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("data.train_ratio must lie in (0, 1)");
    data.validate();
    loss.validate();
    auto pr = prior;  // percentiles come from the training events at fit time
    if (pr.mode == ScreenMode::SimulatedExtremes && !pr.percentiles) pr.mode = ScreenMode::Off;
    pr.validate();
    smc_config().validate();
    mcmc_config().validate();
    if (!(coverage_level > 0.0 && coverage_level < 1.0)) throw ConfigError("eval.coverage_level must lie in (0, 1)");
    if (predict.draws < 1) throw ConfigError("predict.draws must be >= 1");
    if (damage_draws < 1) throw ConfigError("eval.damage_draws must be >= 1");
    if (!(crps_sigma_min > 0.0 && crps_sigma_step > 0.0 && crps_sigma_max >= crps_sigma_min))
      throw ConfigError("crps sigma grid is invalid");
    if (crps_trials < 1) throw ConfigError("crps.trials must be >= 1");
  }

  /// Resolved settings as a flat JSON object. Thread count is left out: it never changes results.
  [[nodiscard]] nlohmann::json to_json() const;

  /// Hash of the resolved settings; checkpoints record it.
  [[nodiscard]] std::string hash() const { return hex64(fnv1a(to_json().dump())); }
};

namespace detail {

struct Binder {
  const nlohmann::json& j;
  std::vector<std::string> used;

  template <class T>
  void operator()(const std::string& key, T& target) {
    used.push_back(key);
    if (!j.contains(key)) return;
    try {
      target = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }
  template <class T, std::size_t N>
  void array(const std::string& key, std::array<T, N>& target) {
    used.push_back(key);
    if (!j.contains(key)) return;
    std::vector<T> v;
    try {
      v = j.at(key).get<std::vector<T>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
    if (v.size() != N) throw ConfigError("config key '" + key + "' needs " + std::to_string(N) + " values");
    std::copy(v.begin(), v.end(), target.begin());
  }
  template <class E, class Parse>
  void enumeration(const std::string& key, E& target, Parse parse) {
    used.push_back(key);
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) throw ConfigError("config key '" + key + "' must be a string");
    target = parse(j.at(key).get<std::string>());
  }
};

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "energy") return LossKind::Energy;
  if (s == "euclidean") return LossKind::Euclidean;
  throw ConfigError("unknown loss kind '" + s + "'");
}

inline std::string loss_kind_name(LossKind k) { return k == LossKind::Energy ? "energy" : "euclidean"; }

inline std::string split_name(synth::SplitMode m) { return m == synth::SplitMode::Stratified ? "stratified" : "random"; }

/// Single binding list shared by parsing and serialization, so the two cannot drift apart.
template <class Visit>
void bind(RunConfig& c, Visit&& v) {
  v("threads", c.threads);
  v("data.events", c.data.events);
  v("data.min_side", c.data.min_side);
  v("data.max_side", c.data.max_side);
  v("data.block_size", c.data.block_size);
  v("data.total_only_weight", c.data.total_only_weight);
  v("data.min_clusters", c.data.min_clusters);
  v("data.max_clusters", c.data.max_clusters);
  v("data.peak_min", c.data.peak_min);
  v("data.peak_max", c.data.peak_max);
  v("data.decay_min", c.data.decay_min);
  v("data.decay_max", c.data.decay_max);
  v("data.noise_amplitude", c.data.noise_amplitude);
  v("data.pop_log_mean", c.data.pop_log_mean);
  v("data.pop_log_sd", c.data.pop_log_sd);
  v("data.persons_per_building", c.data.persons_per_building);
  v("data.night_probability", c.data.night_probability);
  v("data.point_fraction", c.data.point_fraction);
  v("data.point_window", c.data.point_window);
  v("data.train_ratio", c.train_ratio);
  v("data.sigma_mort_true", c.data.theta_true.sigma[0]);
  v("loss.replicates", c.loss.replicates);
  v("loss.pseudo_marginal_repeats", c.loss.pseudo_marginal_repeats);
  v("loss.log_offset", c.loss.log_offset);
  v("loss.intensity_threshold", c.loss.intensity_threshold);
  v("prior.beta_scale", c.prior.beta_scale);
  v("prior.dummies", c.prior.dummy_count);
  v("smc.particles", c.smc.particles);
  v("smc.resample_threshold", c.smc.resample_threshold);
  v("smc.initial_alpha", c.smc.initial_alpha);
  v("smc.shrink_divisor", c.smc.shrink_divisor);
  v("smc.allow_small_replicates", c.smc.allow_small_replicates);
  v("smc.min_relative_decrease", c.smc.min_relative_decrease);
  v("smc.max_steps", c.smc.max_steps);
  v("mcmc.iterations", c.mcmc.iterations);
  v("mcmc.warmup", c.mcmc.warmup);
  v("mcmc.omega", c.mcmc.omega);
  v("mcmc.rho_pm", c.mcmc.rho_pm);
  v("mcmc.thin", c.mcmc.thin);
  v("mcmc.chains", c.mcmc.chains);
  v("predict.draws", c.predict.draws);
  v("predict.quantile_levels", c.predict.quantile_levels);
  v("eval.coverage_level", c.coverage_level);
  v("eval.damage_draws", c.damage_draws);
  v("crps.m_values", c.crps_m);
  v("crps.sigma_min", c.crps_sigma_min);
  v("crps.sigma_max", c.crps_sigma_max);
  v("crps.sigma_step", c.crps_sigma_step);
  v("crps.trials", c.crps_trials);
}

}  // namespace detail

inline nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  RunConfig copy = *this;
  detail::bind(copy, [&](const std::string& key, const auto& value) { j[key] = value; });
  j.erase("threads");
  if (seed) j["seed"] = *seed;
  j["data.split"] = detail::split_name(split);
  j["loss.kind"] = detail::loss_kind_name(loss.kind);
  j["loss.weights"] = std::vector<double>(loss.weights.begin(), loss.weights.end());
  j["prior.mode"] = std::string(to_string(prior.mode));
  return j;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run configuration must be a JSON object");
  RunConfig c;
  detail::Binder b{j, {}};
  detail::bind(c, b);
  b.used.push_back("seed");
  if (j.contains("seed")) {
    const auto& sj = j["seed"];
    if (!sj.is_number_integer() || (!sj.is_number_unsigned() && sj.get<std::int64_t>() < 0)) throw ConfigError("config key 'seed' must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  b.enumeration("data.split", c.split, [](const std::string& s) { return synth::split_mode_from_string(s); });
  b.enumeration("loss.kind", c.loss.kind, detail::loss_kind_from_string);
  b.array("loss.weights", c.loss.weights);
  b.enumeration("prior.mode", c.prior.mode, [](const std::string& s) { return screen_mode_from_string(s); });
  for (const auto& [key, value] : j.items())
    if (std::find(b.used.begin(), b.used.end(), key) == b.used.end())
      throw ConfigError("unknown config key '" + key + "'");
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
  return parse_run_config(j);
}

}  // namespace quakesr::io
