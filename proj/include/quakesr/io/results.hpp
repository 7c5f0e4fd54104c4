#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quakesr/io/csv.hpp"
#include "quakesr/mcmc/engine.hpp"
#include "quakesr/model/params.hpp"
#include "quakesr/smc/engine.hpp"

namespace quakesr::io {

/// Tolerance trace, one row per SMC step. Wall time is left out so reruns compare byte-equal.
inline void save_trace(const std::vector<smc::StepSummary>& trace, const fs::path& path) {
  Table t{{"step", "delta", "ess", "acc_rate", "sim_acc_rate", "alpha", "mean_loss", "resampled", "simulations"}, {}};
  for (const auto& s : trace)
    t.rows.push_back({std::to_string(s.step), format_double(s.delta), std::to_string(s.ess),
                      format_double(s.acc_rate), format_double(s.sim_acc_rate), format_double(s.alpha),
                      format_double(s.mean_loss), s.resampled ? "1" : "0", std::to_string(s.simulations)});
  write_table(path, t);
}

inline std::vector<smc::StepSummary> load_trace(const fs::path& path) {
  const auto t = read_table(path);
  const std::string w = path.string();
  std::vector<smc::StepSummary> out;
  for (const auto& r : t.rows) {
    smc::StepSummary s;
    s.step = static_cast<int>(parse_int(r[t.column("step", w)], w));
    s.delta = parse_double(r[t.column("delta", w)], w);
    s.ess = static_cast<std::size_t>(parse_int(r[t.column("ess", w)], w));
    s.acc_rate = parse_double(r[t.column("acc_rate", w)], w);
    s.sim_acc_rate = parse_double(r[t.column("sim_acc_rate", w)], w);
    s.alpha = parse_double(r[t.column("alpha", w)], w);
    s.mean_loss = parse_double(r[t.column("mean_loss", w)], w);
    s.resampled = r[t.column("resampled", w)] == "1";
    s.simulations = parse_int(r[t.column("simulations", w)], w);
    out.push_back(s);
  }
  return out;
}

/// Posterior draws: one row per draw, parameter columns in canonical order, then the loss.
struct PosteriorSamples {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> draws;
  std::vector<double> losses;

  [[nodiscard]] std::vector<ModelParams> params() const {
    std::vector<ModelParams> out;
    out.reserve(draws.size());
    for (const auto& d : draws) out.push_back(ModelParams::from_vector(d));
    return out;
  }

  [[nodiscard]] Eigen::VectorXd mean() const {
    if (draws.empty()) throw InputError("no posterior draws");
    Eigen::VectorXd m = Eigen::VectorXd::Zero(draws.front().size());
    for (const auto& d : draws) m += d;
    return m / static_cast<double>(draws.size());
  }
};

inline void save_posterior(const PosteriorSamples& s, const fs::path& path) {
  Table t{s.names, {}};
  t.header.push_back("loss");
  for (std::size_t i = 0; i < s.draws.size(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index k = 0; k < s.draws[i].size(); ++k) row.push_back(format_double(s.draws[i][k]));
    row.push_back(format_double(s.losses.at(i)));
    t.rows.push_back(std::move(row));
  }
  write_table(path, t);
}

inline PosteriorSamples load_posterior(const fs::path& path) {
  const auto t = read_table(path);
  const std::string w = path.string();
  std::size_t dummies = 0;
  while (std::find(t.header.begin(), t.header.end(), "dummy_" + std::to_string(dummies + 1)) != t.header.end())
    ++dummies;
  PosteriorSamples s;
  s.names = parameter_names(dummies);
  std::vector<std::size_t> cols;
  for (const auto& n : s.names) cols.push_back(t.column(n, w));
  const auto lc = t.column("loss", w);
  for (const auto& r : t.rows) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) v[static_cast<Eigen::Index>(k)] = parse_double(r[cols[k]], w);
    s.draws.push_back(std::move(v));
    s.losses.push_back(parse_double(r[lc], w));
  }
  if (s.draws.empty()) throw InputError(w + ": posterior file holds no draws");
  return s;
}

inline PosteriorSamples posterior_from_population(const smc::ParticlePopulation& pop,
                                                  const std::vector<std::string>& names) {
  PosteriorSamples s;
  s.names = names;
  for (const auto& p : pop.particles)
    if (p.alive) {
      s.draws.push_back(p.theta);
      s.losses.push_back(p.score);
    }
  return s;
}

inline PosteriorSamples posterior_from_mcmc(const mcmc::McmcResult& r, const std::vector<std::string>& names) {
  PosteriorSamples s;
  s.names = names;
  for (const auto& c : r.chains) {
    s.draws.insert(s.draws.end(), c.samples.begin(), c.samples.end());
    s.losses.insert(s.losses.end(), c.sample_losses.begin(), c.sample_losses.end());
  }
  return s;
}

/// Every MCMC iteration of every chain.
inline void save_mcmc_trace(const mcmc::McmcResult& r, const std::vector<std::string>& names, const fs::path& path) {
  Table t{{"chain", "iteration"}, {}};
  t.header.insert(t.header.end(), names.begin(), names.end());
  t.header.push_back("loss");
  t.header.push_back("accepted");
  for (std::size_t c = 0; c < r.chains.size(); ++c)
    for (const auto& row : r.chains[c].trace) {
      std::vector<std::string> out{std::to_string(c), std::to_string(row.iteration)};
      for (Eigen::Index k = 0; k < row.theta.size(); ++k) out.push_back(format_double(row.theta[k]));
      out.push_back(format_double(row.loss));
      out.push_back(row.accepted ? "1" : "0");
      t.rows.push_back(std::move(out));
    }
  write_table(path, t);
}

}  // namespace quakesr::io
