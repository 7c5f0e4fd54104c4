#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "quakesr/core/rng.hpp"
#include "quakesr/io/csv.hpp"
#include "quakesr/smc/engine.hpp"

namespace quakesr::io {

inline constexpr int kCheckpointFormatVersion = 1;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

// JSON numbers cannot carry inf/nan; those travel as strings
inline nlohmann::json encode(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline double decode(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>(), "checkpoint");
  throw IntegrityError("checkpoint: expected a number");
}

}  // namespace detail

/// Persists a particle population together with the hash of the configuration that produced
/// it. The seed and step index are the complete RNG state, since every stream is derived from
/// them.
inline void save_population(const smc::ParticlePopulation& pop, const std::string& config_hash,
                            const fs::path& path) {
  using nlohmann::json;
  json p;
  p["format_version"] = kCheckpointFormatVersion;
  p["config_hash"] = config_hash;
  p["seed"] = pop.seed;
  p["step"] = pop.step;
  p["delta"] = detail::encode(pop.delta);
  p["alpha"] = detail::encode(pop.alpha);
  p["finished"] = pop.finished;
  p["stop_reason"] = pop.stop_reason;
  json parts = json::array();
  for (const auto& q : pop.particles) {
    json theta = json::array();
    for (Eigen::Index k = 0; k < q.theta.size(); ++k) theta.push_back(detail::encode(q.theta[k]));
    parts.push_back({{"theta", theta}, {"score", detail::encode(q.score)}, {"alive", q.alive}});
  }
  p["particles"] = parts;
  json trace = json::array();
  for (const auto& s : pop.trace)
    trace.push_back({{"step", s.step},
                     {"delta", detail::encode(s.delta)},
                     {"ess", s.ess},
                     {"acc_rate", detail::encode(s.acc_rate)},
                     {"sim_acc_rate", detail::encode(s.sim_acc_rate)},
                     {"alpha", detail::encode(s.alpha)},
                     {"mean_loss", detail::encode(s.mean_loss)},
                     {"resampled", s.resampled},
                     {"simulations", s.simulations},
                     {"seconds", s.seconds}});
  p["trace"] = trace;
  const std::string body = p.dump();
  json doc;
  doc["payload"] = std::move(p);
  doc["payload_hash"] = hex64(fnv1a(body));
  write_text_atomic(path, doc.dump() + "\n");
}

struct LoadedPopulation {
  smc::ParticlePopulation population;
  std::string config_hash;
  bool config_mismatch = false;
};

/// Reads a checkpoint. A corrupt or truncated file raises IntegrityError. A checkpoint written
/// under a different configuration raises ConfigError unless `allow_config_mismatch` is set.
inline LoadedPopulation load_population(const fs::path& path, const std::string& expected_config_hash,
                                        bool allow_config_mismatch = false) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open checkpoint");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception&) {
    throw IntegrityError(path.string() + ": checkpoint is not valid JSON (truncated or corrupt)");
  }
  if (!doc.is_object() || !doc.contains("payload") || !doc.contains("payload_hash"))
    throw IntegrityError(path.string() + ": checkpoint lacks payload or payload_hash");
  const json& p = doc["payload"];
  if (hex64(fnv1a(p.dump())) != doc["payload_hash"])
    throw IntegrityError(path.string() + ": checkpoint payload hash does not match its contents");

  LoadedPopulation out;
  try {
    if (p.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw IntegrityError(path.string() + ": unsupported checkpoint format version");
    out.config_hash = p.at("config_hash").get<std::string>();
    auto& pop = out.population;
    pop.seed = p.at("seed").get<std::uint64_t>();
    pop.step = p.at("step").get<int>();
    pop.delta = detail::decode(p.at("delta"));
    pop.alpha = detail::decode(p.at("alpha"));
    pop.finished = p.at("finished").get<bool>();
    pop.stop_reason = p.at("stop_reason").get<std::string>();
    for (const auto& q : p.at("particles")) {
      smc::Particle part;
      const auto& th = q.at("theta");
      part.theta.resize(static_cast<Eigen::Index>(th.size()));
      for (std::size_t k = 0; k < th.size(); ++k) part.theta[static_cast<Eigen::Index>(k)] = detail::decode(th[k]);
      part.score = detail::decode(q.at("score"));
      part.alive = q.at("alive").get<bool>();
      pop.particles.push_back(std::move(part));
    }
    for (const auto& s : p.at("trace")) {
      smc::StepSummary r;
      r.step = s.at("step").get<int>();
      r.delta = detail::decode(s.at("delta"));
      r.ess = s.at("ess").get<std::size_t>();
      r.acc_rate = detail::decode(s.at("acc_rate"));
      r.sim_acc_rate = detail::decode(s.at("sim_acc_rate"));
      r.alpha = detail::decode(s.at("alpha"));
      r.mean_loss = detail::decode(s.at("mean_loss"));
      r.resampled = s.at("resampled").get<bool>();
      r.simulations = s.at("simulations").get<std::int64_t>();
      r.seconds = s.at("seconds").get<double>();
      pop.trace.push_back(r);
    }
  } catch (const json::exception& e) {
    throw IntegrityError(path.string() + ": checkpoint field missing or mistyped (" + e.what() + ")");
  }
  if (out.config_hash != expected_config_hash) {
    if (!allow_config_mismatch)
      throw ConfigError(path.string() + ": checkpoint was written under config hash " + out.config_hash +
                        ", current config hash is " + expected_config_hash +
                        " (pass the override flag to resume anyway)");
    out.config_mismatch = true;
  }
  return out;
}

}  // namespace quakesr::io
