#include <CLI11.hpp>

#include <survim/survim.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using survim::Json;

namespace {

struct Common {
  std::string config;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<double> subsample;
};

void add_common(CLI::App* cmd, Common& c, bool need_config) {
  auto* opt = cmd->add_option("--config", c.config, "JSON configuration file");
  if (need_config) opt->required();
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory");
}

void add_subsample(CLI::App* cmd, Common& c) {
  cmd->add_option("--subsample", c.subsample, "boosting subsample fraction (overrides the config)")
      ->check(CLI::Range(0.0, 1.0));
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw survim::ConfigurationError("cannot write '" + p.string() + "'");
  return f;
}

Json provenance(const Json& cfg, std::uint64_t seed) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(survim::config::hash(cfg)));
  return {{"config_hash", hash}, {"seed", seed}, {"version", SURVIM_VERSION}};
}

std::string f17(double v) { return survim::detail::fmt17(v); }

// ---------------------------------------------------------------- estimate

int cmd_estimate(const Common& c) {
  Json j = survim::config::read_file(c.config);
  if (c.seed) j["seed"] = *c.seed;
  const auto doc = survim::config::parse_estimate(j);
  fs::path data_path = doc.dataset;
  if (data_path.is_relative() && !fs::exists(data_path)) data_path = fs::path(c.config).parent_path() / data_path;
  const auto data = survim::load_dataset_file(data_path.string(), doc.time_col, doc.status_col);
  survim::config::RunOptions run;
  auto est = survim::config::parse_estimator(survim::config::strip(j, {"dataset", "time_column", "status_column"}),
                                             data.feature_names(), data.p(), run, "estimate config");
  est.threads = c.threads;
  if (c.subsample) est.boost.subsample = *c.subsample;
  survim::check_identification(data, est.measure.tau);

  Json res;
  if (run.reps > 1) {
    const auto a = survim::repeat_and_aggregate(data, est, run.reps, run.seed);
    res = {{"psi", a.psi}, {"se", a.se}, {"ci_lower", a.ci_lower}, {"ci_upper", a.ci_upper},
           {"p_one_sided", a.p_aggregated}, {"v_full", a.v_full}, {"v_reduced", a.v_reduced}};
  } else {
    const auto e = survim::run_estimator(data, est, run.algorithm, run.seed);
    res = {{"psi", e.psi}, {"se", e.se}, {"ci_lower", e.ci_lower}, {"ci_upper", e.ci_upper},
           {"p_one_sided", e.p_one_sided}, {"v_full", e.v_full}, {"v_reduced", e.v_reduced}};
    Json folds = Json::array();
    for (const auto& f : e.folds)
      folds.push_back({{"fold", f.fold}, {"n", f.n}, {"v1", f.v1}, {"v2", f.v2}, {"v1_reduced", f.v1s},
                       {"sigma2", f.sigma2}});
    res["folds"] = folds;
    res["fold_retries"] = e.fold_retries;
  }
  res["algorithm"] = run.algorithm;
  res["seed"] = run.seed;
  res["reps"] = run.reps;
  res["measure"] = {{"kind", est.measure.name()}, {"tau", est.measure.tau}};
  Json s1 = Json::array();
  for (auto k : est.s) s1.push_back(k + 1);
  res["s"] = s1;
  res["provenance"] = provenance(j, run.seed);

  const fs::path out(c.out);
  open_out(out / "result.json") << res.dump(2) << "\n";
  auto csv = open_out(out / "result.csv");
  csv << "psi,se,ci_lower,ci_upper,p_one_sided,v_full,v_reduced,algorithm,seed,reps\n";
  csv << f17(res["psi"]) << "," << f17(res["se"]) << "," << f17(res["ci_lower"]) << "," << f17(res["ci_upper"]) << ","
      << f17(res["p_one_sided"]) << "," << f17(res["v_full"]) << "," << f17(res["v_reduced"]) << "," << run.algorithm
      << "," << run.seed << "," << run.reps << "\n";
  std::cout << res.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- profiles

Json estimator_block(const std::string& measure, double tau, Json s, const std::string& algorithm,
                     const std::string& event_basis) {
  return {{"measure", {{"kind", measure}, {"tau", tau}}},
          {"s", s},
          {"algorithm", algorithm},
          {"K", 5},
          {"nuisance",
           {{"event", {{"family", "lognormal-aft"}, {"basis", event_basis}}},
            {"censoring", {{"family", "lognormal-aft"}, {"basis", "main"}}}}},
          {"learner", {{"family", "least-squares"}, {"basis", "quadratic(1,2,3,4,5,6)"}}}};
}

std::optional<Json> profile_config(const std::string& name) {
  if (name == "paper-fig1") {
    Json j = estimator_block("auc", 0.5, {6}, "samplesplit", "main+pairs(1:2,3:4,1:5)");
    j["scenarios"] = {{{"scenario", 1}}};
    j["n"] = {1000};
    j["replicates"] = 200;
    j["seed"] = 2024;
    j["truth"] = 0.0;
    return j;
  }
  if (name == "calibration") {
    Json j = estimator_block("auc", 0.5, {1}, "crossfit", "main+pairs");
    j["learner"]["basis"] = "quadratic";
    j["scenarios"] = {{{"scenario", 3}}};
    j["n"] = {1000};
    j["replicates"] = 200;
    j["seed"] = 2025;
    j["truth_mc_size"] = 2000000;
    return j;
  }
  if (name == "fig1-full") {
    Json j = profile_config("paper-fig1").value();
    j["n"] = {500, 750, 1000, 1250, 1500};
    j["replicates"] = 500;
    return j;
  }
  return std::nullopt;
}

int run_study_to(const Json& j, const Common& c) {
  auto cfg = survim::config::parse_study(j);
  if (c.seed) cfg.seed = *c.seed;
  cfg.threads = c.threads;
  if (c.subsample) cfg.estimator.boost.subsample = *c.subsample;
  const std::size_t total = cfg.cells.size() * static_cast<std::size_t>(cfg.replicates);
  std::size_t done = 0;
  cfg.progress = [&](const survim::ReplicateRow& r) {
    std::cerr << "[" << ++done << "/" << total << "] cell " << r.cell << " replicate " << r.replicate
              << (r.ok ? " ok" : " failed: " + r.error) << "\n";
  };
  const auto res = survim::run_study(cfg);
  const fs::path out(c.out);
  {
    auto f = open_out(out / "replicates.csv");
    survim::write_replicates(f, res.rows);
  }
  {
    auto f = open_out(out / "summary.csv");
    survim::write_summary(f, res.summary);
  }
  Json prov = provenance(j, cfg.seed);
  open_out(out / "provenance.json") << prov.dump(2) << "\n";
  survim::write_summary(std::cout, res.summary);
  return 0;
}

int cmd_simulate(const Common& c, const std::string& profile) {
  if (!profile.empty()) {
    const auto j = profile_config(profile);
    if (!j) throw survim::ConfigurationError("unknown profile '" + profile + "'");
    if (c.config.empty()) {
      const fs::path out(c.out);
      open_out(out / (profile + ".json")) << j->dump(2) << "\n";
      std::cout << j->dump(2) << "\n";
      return 0;
    }
  }
  if (c.config.empty()) throw survim::ConfigurationError("simulate needs --config or --profile");
  return run_study_to(survim::config::read_file(c.config), c);
}

// ------------------------------------------------------------------ oracle

int cmd_oracle(const Common& c) {
  Json j = survim::config::read_file(c.config);
  if (c.seed) j["seed"] = *c.seed;
  const auto d = survim::config::parse_oracle(j);
  const auto t = survim::true_vim_mc(d.scenario, d.measure, d.s, d.mc_size, d.seed);
  Json res = {{"psi", t.value}, {"mc_se", t.mc_se}, {"v_full", t.v_full}, {"v_reduced", t.v_reduced},
              {"scenario", d.scenario}, {"measure", {{"kind", d.measure.name()}, {"tau", d.measure.tau}}},
              {"mc_size", d.mc_size}, {"provenance", provenance(j, d.seed)}};
  open_out(fs::path(c.out) / "oracle.json") << res.dump(2) << "\n";
  std::cout << res.dump(2) << "\n";
  return 0;
}

// --------------------------------------------------------------- reproduce

int cmd_reproduce(const Common& c, const std::string& profile) {
  if (profile == "table-s1") {
    const fs::path out(c.out);
    auto f = open_out(out / "table_s1.csv");
    f << "scenario,set,measure,tau,psi,mc_se\n";
    struct Row {
      int scenario;
      std::vector<std::size_t> s;
      std::string label;
    };
    const std::vector<Row> rows{{1, {0}, "x1"}, {1, {5}, "x6"}, {1, {0, 5}, "x1+x6"}, {2, {0}, "x1"},
                                {2, {5}, "x6"}, {3, {0}, "x1"},  {3, {1}, "x2"}};
    const std::vector<std::pair<std::string, double>> measures{
        {"auc", 0.5}, {"auc", 0.9}, {"brier", 0.5}, {"brier", 0.9}, {"cindex", 0.9}};
    const std::uint64_t seed = c.seed.value_or(20240601);
    for (const auto& r : rows)
      for (const auto& [kind, tau] : measures) {
        const auto t = survim::true_vim_mc(r.scenario, survim::MeasureSpec::parse(kind, tau), r.s, 2000000, seed);
        f << r.scenario << "," << r.label << "," << kind << "," << tau << "," << f17(t.value) << "," << f17(t.mc_se)
          << "\n";
        std::cerr << "scenario " << r.scenario << " " << r.label << " " << kind << "(" << tau << ") = " << t.value
                  << " (mc se " << t.mc_se << ")\n";
      }
    return 0;
  }
  const auto j = profile_config(profile);
  if (!j) throw survim::ConfigurationError("unknown profile '" + profile + "' (table-s1, paper-fig1, calibration, fig1-full)");
  return run_study_to(*j, c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable importance for right-censored survival outcomes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(SURVIM_VERSION));

  Common est, sim, orc, rep;
  std::string sim_profile, rep_profile;
  auto* c_est = app.add_subcommand("estimate", "estimate a VIM on a dataset");
  add_common(c_est, est, true);
  add_subsample(c_est, est);
  auto* c_sim = app.add_subcommand("simulate", "run a simulation study or emit a profile config");
  add_common(c_sim, sim, false);
  add_subsample(c_sim, sim);
  c_sim->add_option("--profile", sim_profile, "named study profile");
  auto* c_orc = app.add_subcommand("oracle", "Monte Carlo truth for a scenario VIM");
  add_common(c_orc, orc, true);
  auto* c_rep = app.add_subcommand("reproduce", "run a named reproduction profile");
  add_common(c_rep, rep, false);
  c_rep->add_option("profile", rep_profile, "profile name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*c_est) return cmd_estimate(est);
    if (*c_sim) return cmd_simulate(sim, sim_profile);
    if (*c_orc) return cmd_oracle(orc);
    if (*c_rep) return cmd_reproduce(rep, rep_profile);
  } catch (const survim::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const survim::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
