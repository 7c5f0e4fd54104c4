#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quakesr/io/csv.hpp"
#include "quakesr/model/params.hpp"
#include "quakesr/model/types.hpp"
#include "quakesr/model/vulnerability.hpp"
#include "quakesr/synth/generator.hpp"

namespace quakesr::io {

using json = nlohmann::json;

inline constexpr int kBundleFormatVersion = 1;

namespace detail {

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

template <class T>
T field(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key)) throw InputError(file.string() + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(file.string() + ": field '" + key + "' has the wrong type");
  }
}

inline json scaling_json(const Scaling& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

inline Scaling scaling_from(const json& j, const char* key, const fs::path& file) {
  const auto obj = field<json>(j, key, file);
  Scaling s{field<double>(obj, "mean", file), field<double>(obj, "sd", file)};
  if (!(s.sd > 0.0) || !std::isfinite(s.mean))
    throw InputError(file.string() + ": standardization constants for '" + key + "' are invalid");
  return s;
}

inline std::vector<double> as_doubles(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

inline std::vector<std::int64_t> as_counts(const std::vector<double>& v, const fs::path& file) {
  std::vector<std::int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0) || v[i] != std::floor(v[i]) || v[i] > 9.0e15)
      throw InputError(file.string() + ": counts must be non-negative integers");
    out[i] = static_cast<std::int64_t>(v[i]);
  }
  return out;
}

}  // namespace detail

/// Writes one event as manifest.json plus CSV grid layers into `dir`.
inline void save_bundle(const EventBundle& e, const fs::path& dir) {
  validate(e);
  fs::create_directories(dir);
  const int rows = e.shape.rows, cols = e.shape.cols;
  const std::size_t n = e.shape.cells();
  json m;
  m["format_version"] = kBundleFormatVersion;
  m["id"] = e.id;
  m["grid"] = {{"rows", rows},
               {"cols", cols},
               {"origin_lon", e.georef.origin_lon},
               {"origin_lat", e.georef.origin_lat},
               {"cell_size_arcmin", e.georef.cell_size_arcmin}};

  json hz = json::array();
  for (std::size_t i = 0; i < e.hazards.size(); ++i) {
    const auto& h = e.hazards[i];
    const std::string file = "hazard_" + std::to_string(i) + ".csv";
    write_matrix(dir / file, rows, cols, h.intensity);
    hz.push_back({{"file", file}, {"order", h.order}, {"first_haz", h.first_haz}, {"night", h.night}});
  }
  m["hazards"] = hz;

  json pop = json::array();
  for (std::size_t q = 0; q < kQuantiles; ++q) {
    std::vector<double> layer(n);
    for (std::size_t j = 0; j < n; ++j) layer[j] = static_cast<double>(e.exposure.population[j][q]);
    const std::string file = "population_q" + std::to_string(q + 1) + ".csv";
    write_matrix(dir / file, rows, cols, layer);
    pop.push_back(file);
  }
  m["exposure"]["population"] = pop;
  if (e.exposure.buildings) {
    write_matrix(dir / "buildings.csv", rows, cols, detail::as_doubles(*e.exposure.buildings));
    m["exposure"]["buildings"] = "buildings.csv";
  }

  const auto& cv = e.covariates;
  write_matrix(dir / "vs30.csv", rows, cols, cv.vs30_raw);
  write_matrix(dir / "popdens.csv", rows, cols, cv.popdens_raw);
  write_matrix(dir / "shdi.csv", rows, cols, cv.shdi_raw);
  write_matrix(dir / "gnic.csv", rows, cols, cv.gnic_raw);
  write_matrix(dir / "eqfreq.csv", rows, cols, cv.eqfreq_raw);
  m["covariates"] = {{"vs30", "vs30.csv"},
                     {"popdens", "popdens.csv"},
                     {"shdi", "shdi.csv"},
                     {"gnic", "gnic.csv"},
                     {"eqfreq", "eqfreq.csv"},
                     {"income_shares", std::vector<double>(cv.income_shares.begin(), cv.income_shares.end())}};
  const auto& k = e.standardization;
  m["standardization"] = {{"vs30", detail::scaling_json(k.vs30)},
                          {"popdens", detail::scaling_json(k.popdens)},
                          {"shdi", detail::scaling_json(k.shdi)},
                          {"gnic", detail::scaling_json(k.gnic)},
                          {"eqfreq", detail::scaling_json(k.eqfreq)}};

  Table regions{{"region", "cell"}, {}};
  for (const auto& [name, cells] : e.regions.regions)
    for (std::size_t c : cells) regions.rows.push_back({name, std::to_string(c)});
  write_table(dir / "regions.csv", regions);
  m["regions"] = {{"file", "regions.csv"}, {"partitions_grid", e.regions.partitions_grid}};

  Table obs{{"region", "type", "value"}, {}};
  for (const auto& o : e.observations.records)
    obs.rows.push_back({o.region, std::string(to_string(o.type)), std::to_string(o.value)});
  write_table(dir / "observations.csv", obs);
  m["observations"] = "observations.csv";
  m["first_haz_convention"] =
      e.first_haz_convention == FirstHazConvention::NoPredecessor ? "no-predecessor" : "preceded-by-foreshock";
  m["provenance"] = e.provenance;
  detail::write_json(dir / "manifest.json", m);
}

/// Loads and validates one event bundle. Standardized covariate layers are recomputed from the
/// raw layers with the manifest's constants.
inline EventBundle load_bundle(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw InputError(mpath.string() + ": manifest not found");
  const json m = detail::read_json(mpath);
  const int version = detail::field<int>(m, "format_version", mpath);
  if (version != kBundleFormatVersion)
    throw InputError(mpath.string() + ": field 'format_version' is " + std::to_string(version) +
                     ", this build reads version " + std::to_string(kBundleFormatVersion));
  auto layer_path = [&](const std::string& file) {
    const fs::path p = dir / file;
    if (!fs::exists(p)) throw InputError(mpath.string() + ": referenced file '" + file + "' is missing");
    return p;
  };

  EventBundle e;
  e.id = detail::field<std::string>(m, "id", mpath);
  const auto grid = detail::field<json>(m, "grid", mpath);
  e.shape = {detail::field<int>(grid, "rows", mpath), detail::field<int>(grid, "cols", mpath)};
  if (e.shape.rows <= 0 || e.shape.cols <= 0) throw InputError(mpath.string() + ": field 'grid' has non-positive size");
  e.georef = {detail::field<double>(grid, "origin_lon", mpath), detail::field<double>(grid, "origin_lat", mpath),
              detail::field<double>(grid, "cell_size_arcmin", mpath)};
  const int rows = e.shape.rows, cols = e.shape.cols;
  const std::size_t n = e.shape.cells();

  for (const auto& h : detail::field<json>(m, "hazards", mpath)) {
    HazardInstance hi;
    hi.intensity = read_matrix(layer_path(detail::field<std::string>(h, "file", mpath)), rows, cols);
    hi.order = detail::field<int>(h, "order", mpath);
    hi.first_haz = detail::field<bool>(h, "first_haz", mpath);
    hi.night = detail::field<bool>(h, "night", mpath);
    e.hazards.push_back(std::move(hi));
  }

  const auto exposure = detail::field<json>(m, "exposure", mpath);
  const auto pop_files = detail::field<std::vector<std::string>>(exposure, "population", mpath);
  if (pop_files.size() != kQuantiles)
    throw InputError(mpath.string() + ": field 'exposure.population' must list " + std::to_string(kQuantiles) +
                     " quantile layers");
  e.exposure.population.assign(n, QuantileCounts{});
  for (std::size_t q = 0; q < kQuantiles; ++q) {
    const auto p = layer_path(pop_files[q]);
    const auto counts = detail::as_counts(read_matrix(p, rows, cols), p);
    for (std::size_t j = 0; j < n; ++j) e.exposure.population[j][q] = counts[j];
  }
  if (exposure.contains("buildings")) {
    const auto p = layer_path(detail::field<std::string>(exposure, "buildings", mpath));
    e.exposure.buildings = detail::as_counts(read_matrix(p, rows, cols), p);
  }

  const auto cvj = detail::field<json>(m, "covariates", mpath);
  auto& cv = e.covariates;
  cv.vs30_raw = read_matrix(layer_path(detail::field<std::string>(cvj, "vs30", mpath)), rows, cols);
  cv.popdens_raw = read_matrix(layer_path(detail::field<std::string>(cvj, "popdens", mpath)), rows, cols);
  cv.shdi_raw = read_matrix(layer_path(detail::field<std::string>(cvj, "shdi", mpath)), rows, cols);
  cv.gnic_raw = read_matrix(layer_path(detail::field<std::string>(cvj, "gnic", mpath)), rows, cols);
  cv.eqfreq_raw = read_matrix(layer_path(detail::field<std::string>(cvj, "eqfreq", mpath)), rows, cols);
  const auto shares = detail::field<std::vector<double>>(cvj, "income_shares", mpath);
  if (shares.size() != 10) throw InputError(mpath.string() + ": field 'covariates.income_shares' needs 10 deciles");
  std::copy(shares.begin(), shares.end(), cv.income_shares.begin());

  const auto st = detail::field<json>(m, "standardization", mpath);
  const StandardizationConstants k{detail::scaling_from(st, "vs30", mpath), detail::scaling_from(st, "popdens", mpath),
                                   detail::scaling_from(st, "shdi", mpath), detail::scaling_from(st, "gnic", mpath),
                                   detail::scaling_from(st, "eqfreq", mpath)};
  try {
    apply_standardization(e, k);
  } catch (const InputError& err) {
    throw InputError(mpath.string() + ": covariates: " + err.what());
  }

  const auto rj = detail::field<json>(m, "regions", mpath);
  const auto rpath = layer_path(detail::field<std::string>(rj, "file", mpath));
  const auto rt = read_table(rpath);
  const auto rc = rt.column("region", rpath.string()), cc = rt.column("cell", rpath.string());
  for (const auto& row : rt.rows) {
    const auto cell = parse_int(row[cc], rpath.string());
    if (cell < 0 || static_cast<std::size_t>(cell) >= n)
      throw InputError(rpath.string() + ": region '" + row[rc] + "' references cell " + row[cc] +
                       " outside the " + std::to_string(rows) + "x" + std::to_string(cols) + " grid");
    e.regions.regions[row[rc]].push_back(static_cast<std::size_t>(cell));
  }
  e.regions.partitions_grid = detail::field<bool>(rj, "partitions_grid", mpath);

  const auto opath = layer_path(detail::field<std::string>(m, "observations", mpath));
  const auto ot = read_table(opath);
  const auto orc = ot.column("region", opath.string()), otc = ot.column("type", opath.string()),
             ovc = ot.column("value", opath.string());
  for (const auto& row : ot.rows) {
    if (!e.regions.contains(row[orc]))
      throw InputError(opath.string() + ": observation references undefined region '" + row[orc] + "'");
    ImpactType type;
    try {
      type = impact_type_from_string(row[otc]);
    } catch (const InputError& err) {
      throw InputError(opath.string() + ": field 'type': " + err.what());
    }
    e.observations.records.push_back({e.id, row[orc], type, parse_int(row[ovc], opath.string())});
  }

  const auto conv = m.value("first_haz_convention", std::string("no-predecessor"));
  if (conv == "no-predecessor") {
    e.first_haz_convention = FirstHazConvention::NoPredecessor;
  } else if (conv == "preceded-by-foreshock") {
    e.first_haz_convention = FirstHazConvention::PrecededByForeshock;
  } else {
    throw InputError(mpath.string() + ": field 'first_haz_convention' has unknown value '" + conv + "'");
  }
  e.provenance = m.value("provenance", std::string());
  try {
    validate(e);
  } catch (const InputError& err) {
    throw InputError(mpath.string() + ": " + err.what());
  }
  return e;
}

// ---------------------------------------------------------------------------------------------
// datasets: a directory of bundles plus optional split, truth and surveyed buildings

struct Dataset {
  std::vector<EventBundle> events;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::optional<synth::SyntheticTruth> truth;
  std::vector<synth::PointBuilding> points;

  [[nodiscard]] std::vector<EventBundle> select(const std::vector<std::string>& ids) const {
    std::vector<EventBundle> out;
    for (const auto& id : ids) {
      auto it = std::find_if(events.begin(), events.end(), [&](const EventBundle& e) { return e.id == id; });
      if (it == events.end()) throw InputError("dataset has no event '" + id + "'");
      out.push_back(*it);
    }
    return out;
  }
  [[nodiscard]] std::vector<EventBundle> train() const { return train_ids.empty() ? events : select(train_ids); }
  [[nodiscard]] std::vector<EventBundle> test() const { return select(test_ids); }
};

inline json params_json(const ModelParams& p) {
  const auto names = parameter_names(p.dummies.size());
  const auto v = p.to_vector();
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = v[static_cast<Eigen::Index>(i)];
  return j;
}

inline ModelParams params_from_json(const json& j, const fs::path& file) {
  const auto core = parameter_names();
  std::vector<double> v;
  for (const auto& name : core) v.push_back(detail::field<double>(j, name.c_str(), file));
  for (std::size_t d = 1; j.contains("dummy_" + std::to_string(d)); ++d)
    v.push_back(j.at("dummy_" + std::to_string(d)).get<double>());
  return ModelParams::from_vector(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

inline void save_points(const std::vector<synth::PointBuilding>& points, const fs::path& path) {
  Table t{{"event_id", "cell", "lon", "lat", "intensity", "label"}, {}};
  t.rows.reserve(points.size());
  for (const auto& p : points)
    t.rows.push_back({p.event_id, std::to_string(p.cell), format_double(p.lon), format_double(p.lat),
                      format_double(p.intensity), std::string(synth::to_string(p.label))});
  write_table(path, t);
}

inline std::vector<synth::PointBuilding> load_points(const fs::path& path) {
  const auto t = read_table(path);
  const std::string w = path.string();
  const auto ie = t.column("event_id", w), ic = t.column("cell", w), ilon = t.column("lon", w),
             ilat = t.column("lat", w), ii = t.column("intensity", w), il = t.column("label", w);
  std::vector<synth::PointBuilding> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    const auto cell = parse_int(r[ic], w);
    if (cell < 0) throw InputError(w + ": field 'cell' must be non-negative");
    out.push_back({r[ie], static_cast<std::size_t>(cell), parse_double(r[ilon], w), parse_double(r[ilat], w),
                   parse_double(r[ii], w), synth::damage_label_from_string(r[il])});
  }
  return out;
}

inline void save_truth(const synth::SyntheticTruth& truth, const fs::path& path) {
  json j;
  j["theta"] = params_json(truth.theta);
  j["seed"] = truth.seed;
  json xi = json::object();
  for (const auto& [id, v] : truth.event_xi) xi[id] = std::vector<double>(v.begin(), v.end());
  j["event_xi"] = xi;
  detail::write_json(path, j);
}

inline synth::SyntheticTruth load_truth(const fs::path& path) {
  const json j = detail::read_json(path);
  synth::SyntheticTruth t;
  t.theta = params_from_json(detail::field<json>(j, "theta", path), path);
  t.seed = detail::field<std::uint64_t>(j, "seed", path);
  const auto xi = detail::field<json>(j, "event_xi", path);
  for (const auto& [id, v] : xi.items()) {
    const auto xs = v.get<std::vector<double>>();
    if (xs.size() != 3) throw InputError(path.string() + ": field 'event_xi." + id + "' needs 3 values");
    t.event_xi[id] = {xs[0], xs[1], xs[2]};
  }
  return t;
}

/// Layout: dataset.json, events/<id>/..., optional truth.json and points.csv.
inline void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "events");
  json m;
  m["format_version"] = kBundleFormatVersion;
  json ids = json::array();
  for (const auto& e : ds.events) {
    save_bundle(e, dir / "events" / e.id);
    ids.push_back(e.id);
  }
  m["events"] = ids;
  if (!ds.test_ids.empty()) m["split"] = {{"train", ds.train_ids}, {"test", ds.test_ids}};
  if (ds.truth) {
    save_truth(*ds.truth, dir / "truth.json");
    m["truth"] = "truth.json";
  }
  if (!ds.points.empty()) {
    save_points(ds.points, dir / "points.csv");
    m["points"] = "points.csv";
  }
  detail::write_json(dir / "dataset.json", m);
}

inline Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "dataset.json";
  if (!fs::exists(mpath)) throw InputError(mpath.string() + ": dataset manifest not found");
  const json m = detail::read_json(mpath);
  const int version = detail::field<int>(m, "format_version", mpath);
  if (version != kBundleFormatVersion)
    throw InputError(mpath.string() + ": field 'format_version' is " + std::to_string(version) +
                     ", this build reads version " + std::to_string(kBundleFormatVersion));
  Dataset ds;
  for (const auto& id : detail::field<std::vector<std::string>>(m, "events", mpath)) {
    auto e = load_bundle(dir / "events" / id);
    if (e.id != id) throw InputError(mpath.string() + ": event directory '" + id + "' holds event '" + e.id + "'");
    ds.events.push_back(std::move(e));
  }
  if (m.contains("split")) {
    ds.train_ids = detail::field<std::vector<std::string>>(m["split"], "train", mpath);
    ds.test_ids = detail::field<std::vector<std::string>>(m["split"], "test", mpath);
    ds.select(ds.train_ids);
    ds.select(ds.test_ids);
  }
  if (m.contains("truth")) ds.truth = load_truth(dir / m["truth"].get<std::string>());
  if (m.contains("points")) ds.points = load_points(dir / m["points"].get<std::string>());
  return ds;
}

}  // namespace quakesr::io
