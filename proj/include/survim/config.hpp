#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include "core_data.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "simlab.hpp"

namespace survim {

using Json = nlohmann::json;

namespace config {

inline void allow_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigurationError(where + " must be a JSON object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigurationError("unknown key '" + k + "' in " + where);
}

template <class T>
T get(const Json& j, const char* key, const T& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigurationError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

inline Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigurationError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

inline MeasureSpec parse_measure(const Json& j) {
  allow_keys(j, {"kind", "tau"}, "measure");
  if (!j.contains("kind") || !j.contains("tau")) throw ConfigurationError("measure needs 'kind' and 'tau'");
  return MeasureSpec::parse(get<std::string>(j, "kind", "", "measure"), get<double>(j, "tau", 0.0, "measure"));
}

inline NuisanceSpec parse_nuisance(const Json& j, const std::string& where) {
  allow_keys(j, {"family", "basis"}, where);
  NuisanceSpec s;
  s.family = get<std::string>(j, "family", s.family, where);
  s.basis = get<std::string>(j, "basis", s.basis, where);
  if (s.family != "marginal-km" && s.family != "lognormal-aft" && s.family != "discrete-hazard" && s.family != "injected")
    throw ConfigurationError("unknown nuisance family '" + s.family + "' in " + where);
  return s;
}

inline RegressionLearnerSpec parse_learner(const Json& j) {
  allow_keys(j, {"family", "basis", "k"}, "learner");
  RegressionLearnerSpec s;
  const auto fam = get<std::string>(j, "family", "least-squares", "learner");
  if (fam == "least-squares") s.family = RegressionLearnerSpec::Family::LeastSquaresBasis;
  else if (fam == "knn") s.family = RegressionLearnerSpec::Family::Knn;
  else throw ConfigurationError("unknown learner family '" + fam + "' (expected least-squares or knn)");
  s.basis = get<std::string>(j, "basis", s.basis, "learner");
  s.k = get<std::size_t>(j, "k", s.k, "learner");
  return s;
}

inline BoostConfig parse_boost(const Json& j) {
  allow_keys(j, {"mstop", "zeta", "learning_rate", "cv_folds", "subsample"}, "boost");
  BoostConfig b;
  b.mstop_candidates = get<std::vector<int>>(j, "mstop", b.mstop_candidates, "boost");
  b.zeta_candidates = get<std::vector<double>>(j, "zeta", b.zeta_candidates, "boost");
  b.learning_rate = get<double>(j, "learning_rate", b.learning_rate, "boost");
  b.cv_folds = get<int>(j, "cv_folds", b.cv_folds, "boost");
  b.subsample = get<double>(j, "subsample", b.subsample, "boost");
  if (!(b.subsample > 0.0 && b.subsample <= 1.0)) throw ConfigurationError("boost subsample must lie in (0, 1]");
  for (int m : b.mstop_candidates)
    if (m < 0) throw ConfigurationError("boost mstop candidates must be non-negative");
  for (double z : b.zeta_candidates)
    if (!(z > 0.0)) throw ConfigurationError("boost zeta candidates must be positive");
  return b;
}

inline GridPolicy parse_grid(const Json& j) {
  allow_keys(j, {"policy", "J"}, "grid");
  GridPolicy g;
  const auto pol = get<std::string>(j, "policy", "event-times", "grid");
  if (pol == "event-times") g.kind = GridPolicy::Kind::EventTimes;
  else if (pol == "equal-spacing") g.kind = GridPolicy::Kind::EqualSpacing;
  else throw ConfigurationError("unknown grid policy '" + pol + "'");
  g.J = get<std::size_t>(j, "J", g.J, "grid");
  return g;
}

/// Resolves 1-based indices or feature names to 0-based columns.
inline std::vector<std::size_t> parse_set(const Json& j, const std::vector<std::string>& names, std::size_t p) {
  if (!j.is_array() || j.empty()) throw ConfigurationError("'s' must be a non-empty array of feature indices or names");
  std::vector<std::size_t> out;
  for (const auto& e : j) {
    if (e.is_number_integer()) {
      const auto k = e.get<long long>();
      if (k < 1 || static_cast<std::size_t>(k) > p)
        throw ConfigurationError("feature index " + std::to_string(k) + " out of range 1.." + std::to_string(p));
      out.push_back(static_cast<std::size_t>(k - 1));
    } else if (e.is_string()) {
      const auto name = e.get<std::string>();
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ConfigurationError("unknown feature '" + name + "'");
      out.push_back(static_cast<std::size_t>(it - names.begin()));
    } else {
      throw ConfigurationError("'s' entries must be integers or strings");
    }
  }
  return out;
}

inline constexpr std::initializer_list<const char*> kEstimatorKeys = {
    "measure", "s", "algorithm", "K", "reps", "seed", "alpha", "eta_floor", "nuisance",
    "learner", "oracle", "grid", "boost", "clamp"};

struct RunOptions {
  std::string algorithm = "crossfit";
  int reps = 1;
  std::uint64_t seed = 1;
};

/// Fills estimator settings from the shared keys; `s` needs the feature names.
inline EstimatorConfig parse_estimator(const Json& j, const std::vector<std::string>& names, std::size_t p,
                                       RunOptions& opts, const std::string& where) {
  EstimatorConfig c;
  if (!j.contains("measure")) throw ConfigurationError(where + " needs a 'measure'");
  if (!j.contains("s")) throw ConfigurationError(where + " needs a feature set 's'");
  c.measure = parse_measure(j.at("measure"));
  c.s = parse_set(j.at("s"), names, p);
  opts.algorithm = get<std::string>(j, "algorithm", opts.algorithm, where);
  if (opts.algorithm != "crossfit" && opts.algorithm != "samplesplit")
    throw ConfigurationError("algorithm must be crossfit or samplesplit");
  opts.reps = get<int>(j, "reps", opts.reps, where);
  if (opts.reps < 1) throw ConfigurationError("reps must be at least 1");
  if (opts.reps > 1 && opts.algorithm != "samplesplit")
    throw ConfigurationError("reps > 1 requires algorithm samplesplit");
  opts.seed = get<std::uint64_t>(j, "seed", opts.seed, where);
  c.K = get<int>(j, "K", c.K, where);
  if (c.K < 1) throw ConfigurationError("K must be at least 1");
  c.alpha = get<double>(j, "alpha", c.alpha, where);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigurationError("alpha must lie in (0, 1)");
  c.eta_floor = get<double>(j, "eta_floor", c.eta_floor, where);
  if (!(c.eta_floor > 0.0 && c.eta_floor <= 1.0)) throw ConfigurationError("eta_floor must lie in (0, 1]");
  if (j.contains("nuisance")) {
    const auto& n = j.at("nuisance");
    allow_keys(n, {"event", "censoring"}, "nuisance");
    if (n.contains("event")) c.event = parse_nuisance(n.at("event"), "nuisance.event");
    if (n.contains("censoring")) c.censoring = parse_nuisance(n.at("censoring"), "nuisance.censoring");
  }
  if (j.contains("learner")) c.learner = parse_learner(j.at("learner"));
  const auto oracle = get<std::string>(j, "oracle", "cdf", where);
  if (oracle == "cdf") c.oracle = OracleMethod::Cdf;
  else if (oracle == "pseudo-outcome") c.oracle = OracleMethod::PseudoOutcome;
  else throw ConfigurationError("oracle must be cdf or pseudo-outcome");
  if (j.contains("grid")) c.grid = parse_grid(j.at("grid"));
  if (j.contains("boost")) c.boost = parse_boost(j.at("boost"));
  c.clamp = get<bool>(j, "clamp", c.clamp, where);
  return c;
}

inline Json strip(const Json& j, std::initializer_list<const char*> keys) {
  Json out = j;
  for (const char* k : keys) out.erase(k);
  return out;
}

struct EstimateDocument {
  std::string dataset;
  std::string time_col = "time", status_col = "status";
  EstimatorConfig estimator;
  RunOptions run;
};

inline EstimateDocument parse_estimate(const Json& j) {
  std::vector<const char*> keys(kEstimatorKeys.begin(), kEstimatorKeys.end());
  keys.insert(keys.end(), {"dataset", "time_column", "status_column"});
  if (!j.is_object()) throw ConfigurationError("estimate config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw ConfigurationError("unknown key '" + k + "' in estimate config");
  EstimateDocument d;
  d.dataset = get<std::string>(j, "dataset", "", "estimate config");
  if (d.dataset.empty()) throw ConfigurationError("estimate config needs 'dataset'");
  d.time_col = get<std::string>(j, "time_column", d.time_col, "estimate config");
  d.status_col = get<std::string>(j, "status_column", d.status_col, "estimate config");
  return d;
}

inline StudyConfig parse_study(const Json& j) {
  std::vector<const char*> keys(kEstimatorKeys.begin(), kEstimatorKeys.end());
  keys.insert(keys.end(), {"scenarios", "n", "replicates", "truth_mc_size", "truth", "true_nuisances", "profile"});
  if (!j.is_object()) throw ConfigurationError("study config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw ConfigurationError("unknown key '" + k + "' in study config");
  StudyConfig c;
  if (!j.contains("scenarios")) throw ConfigurationError("study config needs 'scenarios'");
  const auto ns = get<std::vector<std::size_t>>(j, "n", {1000}, "study config");
  std::size_t p = 0;
  for (const auto& sc : j.at("scenarios")) {
    allow_keys(sc, {"scenario", "censor_beta0"}, "scenarios[]");
    StudyCell cell;
    cell.scenario = get<int>(sc, "scenario", 0, "scenarios[]");
    cell.censor_beta0 = get<double>(sc, "censor_beta0", 0.0, "scenarios[]");
    const auto dim = scenario_dimension(cell.scenario);
    if (p == 0) p = dim;
    else if (p != dim) throw ConfigurationError("all scenarios in one study must share the feature dimension");
    for (auto n : ns) {
      cell.n = n;
      c.cells.push_back(cell);
    }
  }
  if (c.cells.empty()) throw ConfigurationError("study config needs at least one scenario");
  std::vector<std::string> names;
  for (std::size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
  RunOptions opts;
  c.estimator = parse_estimator(j, names, p, opts, "study config");
  c.algorithm = opts.algorithm;
  c.reps = opts.reps;
  c.seed = opts.seed;
  c.replicates = get<int>(j, "replicates", 0, "study config");
  c.truth_mc_size = get<std::size_t>(j, "truth_mc_size", c.truth_mc_size, "study config");
  if (j.contains("truth")) c.truth = get<double>(j, "truth", 0.0, "study config");
  c.true_nuisances = get<bool>(j, "true_nuisances", false, "study config");
  return c;
}

struct OracleDocument {
  int scenario = 1;
  MeasureSpec measure;
  std::vector<std::size_t> s;
  std::size_t mc_size = 2000000;
  std::uint64_t seed = 20240601;
};

inline OracleDocument parse_oracle(const Json& j) {
  allow_keys(j, {"scenario", "measure", "s", "mc_size", "seed"}, "oracle config");
  OracleDocument d;
  d.scenario = get<int>(j, "scenario", 0, "oracle config");
  const auto p = scenario_dimension(d.scenario);
  if (!j.contains("measure") || !j.contains("s")) throw ConfigurationError("oracle config needs 'measure' and 's'");
  d.measure = parse_measure(j.at("measure"));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
  d.s = parse_set(j.at("s"), names, p);
  d.mc_size = get<std::size_t>(j, "mc_size", d.mc_size, "oracle config");
  d.seed = get<std::uint64_t>(j, "seed", d.seed, "oracle config");
  return d;
}

/// FNV-1a over the canonical JSON dump.
inline std::uint64_t hash(const Json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace config
}  // namespace survim
