#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quakesr/eval/report.hpp"
#include "quakesr/inference/problem.hpp"
#include "quakesr/io/bundle.hpp"
#include "quakesr/io/checkpoint.hpp"
#include "quakesr/io/config.hpp"
#include "quakesr/io/results.hpp"
#include "quakesr/loss/crps_experiment.hpp"
#include "quakesr/mcmc/engine.hpp"
#include "quakesr/smc/engine.hpp"

#ifndef QUAKESR_VERSION
#define QUAKESR_VERSION "0.1.0"
#endif

namespace quakesr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

/// Bad invocation: missing inputs, wrong combination of flags.
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string checkpoint_dir;
  std::string out;
  std::string data;
  std::string fit;
  std::string subset = "test";
  bool use_truth = false;
  std::string resume_from;
  bool allow_config_mismatch = false;
  std::string init_from;
  std::string crps_dir;
};

struct Run {
  Options opt;
  io::RunConfig cfg;
  fs::path out;
  std::vector<std::string> artifacts;
  std::vector<std::string> warnings;
  json metrics = json::object();

  void wrote(const fs::path& p) { artifacts.push_back(p.lexically_relative(out).generic_string()); }
  void warn(const std::vector<std::string>& ws) { warnings.insert(warnings.end(), ws.begin(), ws.end()); }
  [[nodiscard]] StreamKey key(std::string_view tag) const { return StreamKey(*cfg.seed).child(tag); }
};

// ---------------------------------------------------------------------------------------------
// shared helpers

inline io::Dataset require_dataset(const Run& run) {
  if (run.opt.data.empty()) throw UsageError(run.opt.command + " needs --data <dataset directory>");
  return io::load_dataset(run.opt.data);
}

inline std::vector<EventBundle> subset_events(const Run& run, const io::Dataset& ds) {
  const auto& s = run.opt.subset;
  if (s == "all") return ds.events;
  if (s == "train") return ds.train();
  if (s == "test") {
    if (ds.test_ids.empty()) throw UsageError("dataset has no train/test split; use --subset all");
    return ds.test();
  }
  throw UsageError("--subset must be train, test or all");
}

inline PriorSpec prior_for(const io::RunConfig& cfg, const std::vector<EventBundle>& events) {
  PriorSpec spec = cfg.prior;
  if (spec.mode == ScreenMode::SimulatedExtremes) spec.percentiles = compute_covariate_percentiles(events);
  return spec;
}

/// Parameter population used for prediction: the fitted posterior, or the generator's truth.
inline std::vector<ModelParams> prediction_params(const Run& run, const io::Dataset& ds) {
  if (run.opt.use_truth) {
    if (!ds.truth) throw UsageError("--use-truth needs a dataset with truth.json");
    return {ds.truth->theta};
  }
  if (run.opt.fit.empty())
    throw UsageError(run.opt.command + " needs a fitted population: pass --fit <dir> from `fit smc` or `fit mcmc` " +
                     "(or --use-truth for synthetic data)");
  const fs::path p = fs::path(run.opt.fit) / "posterior.csv";
  if (!fs::exists(p))
    throw UsageError("no fitted population at " + p.string() + "; run `fit smc` or `fit mcmc` first");
  return io::load_posterior(p).params();
}

inline std::string level_name(double q) {
  return "q" + io::format_double(q);
}

inline io::Table predictive_table(const eval::PredictiveSummary& s, const std::vector<EventBundle>& events,
                                  const std::vector<double>& levels) {
  io::Table t{{"event_id", "region", "type", "observed", "mean", "median"}, {}};
  for (double q : levels) t.header.push_back(level_name(q));
  for (const auto& c : s.coordinates) {
    std::string observed = "NA";
    for (const auto& e : events)
      if (e.id == c.event_id)
        for (const auto& o : e.observations.records)
          if (o.region == c.region && o.type == c.type) observed = std::to_string(o.value);
    std::vector<std::string> row{c.event_id, c.region, std::string(to_string(c.type)), observed,
                                 io::format_double(c.mean), io::format_double(c.median)};
    for (double q : levels) row.push_back(io::format_double(c.quantile(q)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline io::Table interval_table(const eval::PredictiveSummary& s, const std::vector<EventBundle>& events,
                                double level) {
  io::Table t{{"event_id", "region", "type", "observed", "median", "lower", "upper", "level", "covered"}, {}};
  const double lo = 0.5 - level / 2.0, hi = 0.5 + level / 2.0;
  for (const auto& e : events)
    for (const auto& o : e.observations.records) {
      const auto* c = s.find(e.id, o.region, o.type);
      if (!c) continue;
      const double l = c->quantile(lo), u = c->quantile(hi);
      const auto v = static_cast<double>(o.value);
      t.rows.push_back({e.id, o.region, std::string(to_string(o.type)), std::to_string(o.value),
                        io::format_double(c->median), io::format_double(l), io::format_double(u),
                        io::format_double(level), (v >= l && v <= u) ? "1" : "0"});
    }
  return t;
}

inline io::Table roc_table(const eval::PointScores& ps) {
  io::Table t{{"event_id", "threshold", "fpr", "tpr"}, {}};
  auto add = [&](const std::string& id, const std::vector<double>& scores, const std::vector<int>& labels) {
    const auto r = eval::roc_auc(scores, labels);
    for (const auto& p : r.points)
      t.rows.push_back({id, io::format_double(p.threshold), io::format_double(p.fpr), io::format_double(p.tpr)});
  };
  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
  std::vector<double> all_s;
  std::vector<int> all_l;
  for (std::size_t i = 0; i < ps.points.size(); ++i) {
    if (ps.points[i].label == synth::DamageLabel::Possibly) continue;
    const int l = ps.points[i].label == synth::DamageLabel::Damaged;
    all_s.push_back(ps.scores[i]);
    all_l.push_back(l);
    groups[ps.points[i].event_id].first.push_back(ps.scores[i]);
    groups[ps.points[i].event_id].second.push_back(l);
  }
  const auto has_both = [](const std::vector<int>& l) {
    const auto pos = std::count(l.begin(), l.end(), 1);
    return pos > 0 && pos < static_cast<long>(l.size());
  };
  if (has_both(all_l)) add("all", all_s, all_l);
  for (const auto& [id, g] : groups)
    if (has_both(g.second)) add(id, g.first, g.second);
  return t;
}

inline io::Table binned_table(const eval::PointScores& ps) {
  io::Table t{{"event_id", "intensity_bin", "buildings", "observed_fraction", "mean_modeled"}, {}};
  for (const auto& r : eval::intensity_binned_damage(ps.points, ps.scores))
    t.rows.push_back({r.event_id, io::format_double(r.intensity_bin), std::to_string(r.buildings),
                      io::format_double(r.observed_fraction), io::format_double(r.mean_modeled)});
  return t;
}

inline io::Table crps_table(const std::vector<CrpsBiasRow>& rows) {
  io::Table t{{"m", "sigma", "mean_score", "trials"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.m), io::format_double(r.sigma), io::format_double(r.mean_score),
                      std::to_string(r.trials)});
  return t;
}

inline void save(Run& run, const fs::path& name, const io::Table& t) {
  io::write_table(run.out / name, t);
  run.wrote(run.out / name);
}

// ---------------------------------------------------------------------------------------------
// commands

inline void cmd_simulate(Run& run) {
  const auto gen = run.cfg.gen_config();
  auto ds = synth::generate_dataset(gen);
  run.warn(ds.warnings);
  const auto split = synth::split_train_test(ds.events, run.cfg.train_ratio, run.cfg.split, *run.cfg.seed);
  io::Dataset d;
  d.events = std::move(ds.events);
  for (const auto& e : split.train) d.train_ids.push_back(e.id);
  for (const auto& e : split.test) d.test_ids.push_back(e.id);
  d.truth = ds.truth;
  d.points = std::move(ds.points);
  io::save_dataset(d, run.out);
  run.wrote(run.out / "dataset.json");
  run.metrics["events"] = d.events.size();
  run.metrics["train_events"] = d.train_ids.size();
  run.metrics["test_events"] = d.test_ids.size();
  run.metrics["surveyed_buildings"] = d.points.size();
  std::size_t obs = 0;
  for (const auto& e : d.events) obs += e.observations.records.size();
  run.metrics["observations"] = obs;
}

inline void cmd_fit_smc(Run& run) {
  const auto ds = require_dataset(run);
  const auto train = ds.train();
  const LossProblem lp(train, run.cfg.loss);
  run.warn(lp.warnings);
  QuakeProblem problem(lp, prior_for(run.cfg, train));
  const auto sc = run.cfg.smc_config();
  run.warn(sc.warnings());
  const std::string hash = run.cfg.hash();

  std::optional<smc::ParticlePopulation> resume;
  if (!run.opt.resume_from.empty()) {
    auto loaded = io::load_population(run.opt.resume_from, hash, run.opt.allow_config_mismatch);
    if (loaded.config_mismatch)
      run.warnings.push_back("resumed from a checkpoint written under config hash " + loaded.config_hash);
    run.metrics["resumed_from_step"] = loaded.population.step;
    resume = std::move(loaded.population);
  }
  const fs::path ckdir = run.opt.checkpoint_dir;
  if (!ckdir.empty()) fs::create_directories(ckdir);
  const auto on_step = [&](const smc::ParticlePopulation& pop) {
    if (!ckdir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "smc_step_%04d.json", pop.step);
      io::save_population(pop, hash, ckdir / name);
    }
  };
  const auto pop = smc::run_smc(sc, problem, std::move(resume), on_step);

  io::save_trace(pop.trace, run.out / "trace.csv");
  run.wrote(run.out / "trace.csv");
  io::save_posterior(io::posterior_from_population(pop, problem.names()), run.out / "posterior.csv");
  run.wrote(run.out / "posterior.csv");
  io::save_population(pop, hash, run.out / "population.json");
  run.wrote(run.out / "population.json");

  run.metrics["steps"] = pop.step;
  run.metrics["stop_reason"] = pop.stop_reason;
  run.metrics["final_delta"] = pop.delta;
  run.metrics["alive_particles"] = pop.ess();
  if (!pop.trace.empty()) {
    run.metrics["initial_mean_loss"] = pop.trace.front().mean_loss;
    run.metrics["final_mean_loss"] = pop.trace.back().mean_loss;
  }
  json secs = json::array();
  for (const auto& s : pop.trace) secs.push_back(s.seconds);
  run.metrics["step_seconds"] = secs;
}

inline void cmd_fit_mcmc(Run& run) {
  const auto ds = require_dataset(run);
  const auto train = ds.train();
  const LossProblem lp(train, run.cfg.loss);
  run.warn(lp.warnings);
  QuakeProblem problem(lp, prior_for(run.cfg, train));
  const auto mc = run.cfg.mcmc_config();

  std::vector<Eigen::VectorXd> starts;
  if (!run.opt.init_from.empty()) {
    const auto post = io::load_posterior(fs::path(run.opt.init_from) / "posterior.csv");
    if (post.draws.front().size() != static_cast<Eigen::Index>(problem.dimension()))
      throw UsageError("--init-from posterior has a different parameter count than this config");
    const auto mean = post.mean();
    for (int c = 0; c < mc.chains; ++c) {
      if (c == 0 && std::isfinite(problem.log_prior(mean))) {
        starts.push_back(mean);
      } else {
        starts.push_back(post.draws[static_cast<std::size_t>(c) * post.draws.size() / static_cast<std::size_t>(mc.chains)]);
      }
    }
  }
  const auto result = mcmc::run_mcmc(mc, problem, starts);
  run.warn(result.warnings);
  const auto names = problem.names();
  io::save_mcmc_trace(result, names, run.out / "mcmc_trace.csv");
  run.wrote(run.out / "mcmc_trace.csv");
  io::save_posterior(io::posterior_from_mcmc(result, names), run.out / "posterior.csv");
  run.wrote(run.out / "posterior.csv");

  json diag;
  json rhat = json::object(), ess = json::object();
  for (std::size_t k = 0; k < names.size(); ++k) {
    rhat[names[k]] = std::isfinite(result.rhat[k]) ? json(result.rhat[k]) : json(nullptr);
    ess[names[k]] = result.ess[k];
  }
  diag["rhat"] = rhat;
  diag["ess"] = ess;
  json acc = json::array();
  for (const auto& c : result.chains)
    acc.push_back({{"overall", c.acceptance}, {"post_warmup", c.acceptance_post_warmup}});
  diag["acceptance"] = acc;
  diag["warnings"] = result.warnings;
  io::write_text_atomic(run.out / "diagnostics.json", diag.dump(2) + "\n");
  run.wrote(run.out / "diagnostics.json");
  run.metrics["samples"] = result.pooled_samples().size();
  run.metrics["acceptance_post_warmup"] = result.chains.front().acceptance_post_warmup;
}

inline void cmd_predict(Run& run) {
  const auto ds = require_dataset(run);
  const auto thetas = prediction_params(run, ds);
  const auto events = subset_events(run, ds);
  auto pc = run.cfg.predict;
  pc.threads = run.cfg.threads;
  pc.intensity_threshold = run.cfg.loss.intensity_threshold;
  const auto s = eval::posterior_predictive(events, thetas, pc, run.key("predict"));
  save(run, "predictive.csv", predictive_table(s, events, pc.quantile_levels));

  io::Table cells{{"event_id", "cell", "mort", "disp", "builddam"}, {}};
  for (const auto& [id, means] : s.cell_means)
    for (std::size_t j = 0; j < means[0].size(); ++j)
      cells.rows.push_back({id, std::to_string(j), io::format_double(means[0][j]), io::format_double(means[1][j]),
                            io::format_double(means[2][j])});
  save(run, "cell_means.csv", cells);
  run.metrics["events"] = events.size();
  run.metrics["coordinates"] = s.coordinates.size();
  run.metrics["parameter_draws"] = thetas.size();
}

inline void cmd_evaluate(Run& run) {
  const auto ds = require_dataset(run);
  const auto thetas = prediction_params(run, ds);
  const auto events = subset_events(run, ds);
  auto pc = run.cfg.predict;
  pc.threads = run.cfg.threads;
  pc.intensity_threshold = run.cfg.loss.intensity_threshold;
  const auto s = eval::posterior_predictive(events, thetas, pc, run.key("predict"));

  const auto cov = eval::coverage_report(s, events, run.cfg.coverage_level);
  save(run, "intervals.csv", interval_table(s, events, run.cfg.coverage_level));
  run.metrics["coverage_level"] = cov.level;
  run.metrics["coverage"] = cov.overall();
  run.metrics["coverage_observations"] = cov.observations;
  for (auto t : kImpactTypes)
    if (cov.observations_by_type[index(t)] > 0)
      run.metrics["coverage_" + std::string(to_string(t))] = cov.by_type(t);

  std::vector<std::string> skipped;
  const auto fc = eval::event_forecasts(s, events, &skipped);
  if (!skipped.empty())
    run.warnings.push_back(std::to_string(skipped.size()) + " event(s) without whole-event mortality skipped in alert scoring");
  io::Table ft{{"event_id", "observed", "median", "predicted_alert", "observed_alert", "observed_bin", "rps"}, {}};
  for (std::size_t k = 0; k < eval::kPagerBins; ++k) ft.header.push_back("p_bin" + std::to_string(k));
  double rps_sum = 0.0, hits = 0.0;
  for (const auto& f : fc) {
    std::vector<std::string> row{f.event_id,
                                 std::to_string(f.observed),
                                 io::format_double(f.median),
                                 std::string(eval::to_string(f.predicted_alert)),
                                 std::string(eval::to_string(f.observed_alert)),
                                 std::to_string(f.observed_bin),
                                 io::format_double(f.rps)};
    for (double p : f.pager.probs) row.push_back(io::format_double(p));
    ft.rows.push_back(std::move(row));
    rps_sum += f.rps;
    hits += f.predicted_alert == f.observed_alert;
  }
  save(run, "forecasts.csv", ft);
  if (!fc.empty()) {
    run.metrics["mean_rps"] = rps_sum / static_cast<double>(fc.size());
    run.metrics["alert_accuracy"] = hits / static_cast<double>(fc.size());
  }

  if (!ds.points.empty()) {
    const auto ps = eval::score_points(ds.points, events, thetas, run.cfg.damage_draws, run.key("damage"));
    if (!ps.points.empty()) {
      save(run, "roc.csv", roc_table(ps));
      save(run, "binned_damage.csv", binned_table(ps));
      const auto per_event = eval::per_event_auc(ps.points, ps.scores);
      io::Table at{{"event_id", "buildings", "auc"}, {}};
      double sum = 0.0;
      for (const auto& a : per_event) {
        at.rows.push_back({a.event_id, std::to_string(a.buildings), io::format_double(a.auc)});
        sum += a.auc;
      }
      save(run, "event_auc.csv", at);
      if (!per_event.empty()) run.metrics["mean_event_auc"] = sum / static_cast<double>(per_event.size());
      run.metrics["auc_events"] = per_event.size();
    }
  }
  io::write_text_atomic(run.out / "metrics.json", run.metrics.dump(2) + "\n");
  run.wrote(run.out / "metrics.json");
}

inline void cmd_crps(Run& run) {
  const auto rows = crps_bias_experiment(run.cfg.crps_m, run.cfg.crps_sigmas(), run.cfg.crps_trials, *run.cfg.seed,
                                         run.cfg.threads);
  save(run, "crps_bias.csv", crps_table(rows));
  json argmin = json::object();
  for (int m : run.cfg.crps_m) argmin[std::to_string(m)] = crps_bias_argmin(rows, m);
  run.metrics["argmin_sigma"] = argmin;
}

inline void cmd_export(Run& run) {
  const auto ds = require_dataset(run);
  if (run.opt.fit.empty()) throw UsageError("export-figure-data needs --fit <dir>");
  const fs::path fit = run.opt.fit;
  const auto post_path = fit / "posterior.csv";
  if (!fs::exists(post_path)) throw UsageError("no fitted population at " + post_path.string());
  const auto post = io::load_posterior(post_path);

  if (fs::exists(fit / "trace.csv")) {
    io::save_trace(io::load_trace(fit / "trace.csv"), run.out / "tolerance_trace.csv");
    run.wrote(run.out / "tolerance_trace.csv");
  } else {
    run.warnings.push_back("fit has no SMC trace; tolerance_trace.csv not written");
  }

  // prior draws under the spec the fit used, as many as there are posterior draws
  const std::size_t dummies = post.names.size() - kCoreParamCount;
  auto cfg = run.cfg;
  cfg.prior.dummy_count = dummies;
  PriorSampler sampler(prior_for(cfg, ds.train()));
  io::Table pp{{"source"}, {}};
  pp.header.insert(pp.header.end(), post.names.begin(), post.names.end());
  const StreamKey pk = run.key("export-prior");
  for (std::size_t i = 0; i < post.draws.size(); ++i) {
    Engine g = pk.child(static_cast<std::uint64_t>(i)).engine();
    const auto v = sampler.sample(g).to_vector();
    std::vector<std::string> row{"prior"};
    for (Eigen::Index k = 0; k < v.size(); ++k) row.push_back(io::format_double(v[k]));
    pp.rows.push_back(std::move(row));
  }
  for (const auto& d : post.draws) {
    std::vector<std::string> row{"posterior"};
    for (Eigen::Index k = 0; k < d.size(); ++k) row.push_back(io::format_double(d[k]));
    pp.rows.push_back(std::move(row));
  }
  save(run, "prior_posterior_samples.csv", pp);

  const auto thetas = post.params();
  const auto events = subset_events(run, ds);
  auto pc = run.cfg.predict;
  pc.threads = run.cfg.threads;
  pc.intensity_threshold = run.cfg.loss.intensity_threshold;
  const auto s = eval::posterior_predictive(events, thetas, pc, run.key("predict"));
  save(run, "predictive_intervals.csv", interval_table(s, events, run.cfg.coverage_level));

  if (!ds.points.empty()) {
    const auto ps = eval::score_points(ds.points, events, thetas, run.cfg.damage_draws, run.key("damage"));
    save(run, "roc_points.csv", roc_table(ps));
    save(run, "binned_damage.csv", binned_table(ps));
  } else {
    run.warnings.push_back("dataset has no surveyed buildings; ROC and binned-damage tables not written");
  }

  if (!run.opt.crps_dir.empty()) {
    const auto t = io::read_table(fs::path(run.opt.crps_dir) / "crps_bias.csv");
    save(run, "crps_bias.csv", t);
  } else {
    save(run, "crps_bias.csv",
         crps_table(crps_bias_experiment(run.cfg.crps_m, run.cfg.crps_sigmas(), run.cfg.crps_trials, *run.cfg.seed,
                                         run.cfg.threads)));
  }
}

// ---------------------------------------------------------------------------------------------

inline void write_summary(const fs::path& dir, const Options& opt, const io::RunConfig* cfg, const Run* run,
                          int code, const std::string& error, double seconds) {
  json s;
  s["command"] = opt.command;
  s["exit_code"] = code;
  s["status"] = code == kSuccess ? "ok" : "error";
  if (!error.empty()) s["error"] = error;
  s["version"] = QUAKESR_VERSION;
  s["wall_seconds"] = seconds;
  if (cfg && cfg->seed) {
    s["seed"] = *cfg->seed;
    s["config_hash"] = cfg->hash();
    s["threads"] = cfg->threads;
  }
  if (run) {
    s["artifacts"] = run->artifacts;
    s["warnings"] = run->warnings;
    s["metrics"] = run->metrics;
  }
  try {
    io::write_text_atomic(dir / "run_summary.json", s.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "warning: could not write run summary: " << e.what() << "\n";
  }
}

/// Entry point of the command-line tool. Returns the process exit status.
inline int run(int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();
  Options opt;
  CLI::App app{"Earthquake impact model: simulation, calibration and evaluation"};
  app.set_version_flag("--version", std::string(QUAKESR_VERSION));
  app.require_subcommand(1);
  app.add_option("--config", opt.config_path, "Run configuration (flat JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "Master random seed (overrides the config)");
  app.add_option("--threads", opt.threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--checkpoint-dir", opt.checkpoint_dir, "Directory for per-step checkpoints");
  app.add_option("--out", opt.out, "Output directory")->required();

  auto* sim = app.add_subcommand("simulate-data", "Generate a synthetic dataset with known parameters")->fallthrough();
  auto* fit = app.add_subcommand("fit", "Calibrate the model on the training events")->fallthrough();
  fit->require_subcommand(1);
  auto* fit_smc = fit->add_subcommand("smc", "Sequential Monte Carlo ABC")->fallthrough();
  auto* fit_mcmc = fit->add_subcommand("mcmc", "Generalized-Bayes adaptive Metropolis")->fallthrough();
  auto* predict = app.add_subcommand("predict", "Posterior predictive draws")->fallthrough();
  auto* evaluate = app.add_subcommand("evaluate", "Coverage, alert, RPS and ROC scores")->fallthrough();
  auto* crps = app.add_subcommand("crps-experiment", "Finite-ensemble bias of the CRPS")->fallthrough();
  auto* exp = app.add_subcommand("export-figure-data", "Write the CSV tables behind the figures")->fallthrough();

  for (auto* sc : {fit_smc, fit_mcmc, predict, evaluate, exp})
    sc->add_option("--data", opt.data, "Dataset directory")->check(CLI::ExistingDirectory);
  for (auto* sc : {predict, evaluate, exp}) {
    sc->add_option("--fit", opt.fit, "Directory of a finished fit");
    sc->add_option("--subset", opt.subset, "Events to score: train, test or all")
        ->check(CLI::IsMember({"train", "test", "all"}));
  }
  for (auto* sc : {predict, evaluate}) sc->add_flag("--use-truth", opt.use_truth, "Use the generator's parameters");
  fit_smc->add_option("--resume-from", opt.resume_from, "Checkpoint to continue from")->check(CLI::ExistingFile);
  fit_smc->add_flag("--allow-config-mismatch", opt.allow_config_mismatch,
                    "Resume even if the checkpoint was written under another config");
  fit_mcmc->add_option("--init-from", opt.init_from, "Fit directory whose posterior seeds the chains")
      ->check(CLI::ExistingDirectory);
  exp->add_option("--crps", opt.crps_dir, "crps-experiment output to reuse")->check(CLI::ExistingDirectory);

  // the summary goes to --out even when parsing fails
  fs::path summary_dir = ".";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string_view(argv[i]) == "--out") summary_dir = argv[i + 1];

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    opt.command = "usage";
    if (fs::is_directory(summary_dir))
      write_summary(summary_dir, opt, nullptr, nullptr, kUsageError, e.what(), 0.0);
    return kUsageError;
  }

  if (sim->parsed()) opt.command = "simulate-data";
  else if (fit_smc->parsed()) opt.command = "fit smc";
  else if (fit_mcmc->parsed()) opt.command = "fit mcmc";
  else if (predict->parsed()) opt.command = "predict";
  else if (evaluate->parsed()) opt.command = "evaluate";
  else if (crps->parsed()) opt.command = "crps-experiment";
  else if (exp->parsed()) opt.command = "export-figure-data";

  Run run;
  run.opt = opt;
  run.out = opt.out;
  int code = kSuccess;
  std::string error;
  bool have_cfg = false;
  try {
    fs::create_directories(run.out);
    run.cfg = opt.config_path.empty() ? io::parse_run_config(json::object()) : io::load_run_config(opt.config_path);
    if (opt.seed) run.cfg.seed = opt.seed;
    if (opt.threads) run.cfg.threads = *opt.threads;
    have_cfg = true;
    run.cfg.validate();

    if (opt.command == "simulate-data") cmd_simulate(run);
    else if (opt.command == "fit smc") cmd_fit_smc(run);
    else if (opt.command == "fit mcmc") cmd_fit_mcmc(run);
    else if (opt.command == "predict") cmd_predict(run);
    else if (opt.command == "evaluate") cmd_evaluate(run);
    else if (opt.command == "crps-experiment") cmd_crps(run);
    else if (opt.command == "export-figure-data") cmd_export(run);
  } catch (const ConfigError& e) {
    code = kUsageError;
    error = e.what();
  } catch (const InputError& e) {
    code = kUsageError;
    error = e.what();
  } catch (const ParameterError& e) {
    code = kUsageError;
    error = e.what();
  } catch (const IntegrityError& e) {
    code = kUsageError;
    error = e.what();
  } catch (const std::exception& e) {
    code = kRuntimeFailure;
    error = e.what();
  }
  if (!error.empty()) std::cerr << "error: " << error << "\n";
  for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path dir = fs::is_directory(run.out) ? run.out : summary_dir;
  write_summary(dir, opt, have_cfg ? &run.cfg : nullptr, &run, code, error, secs);
  return code;
}

}  // namespace quakesr::cli
