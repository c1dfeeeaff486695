#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("survim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_json(const std::string& name, const Json& j) const {
    const auto p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  CliRun run(const std::string& args) const {
    const auto o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + SURVIM_CLI_PATH + "\" " + args + " > \"" + o.string() + "\" 2> \"" +
                            e.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }

  static Json toy_estimate() {
    return {{"dataset", std::string(SURVIM_DATA_DIR) + "/toy.csv"},
            {"measure", {{"kind", "auc"}, {"tau", 1.0}}},
            {"s", {"x1"}},
            {"K", 2},
            {"seed", 7},
            {"nuisance", {{"event", {{"family", "lognormal-aft"}}}, {"censoring", {{"family", "lognormal-aft"}}}}},
            {"learner", {{"family", "least-squares"}, {"basis", "main"}}}};
  }

  static Json micro_study() {
    return {{"measure", {{"kind", "auc"}, {"tau", 0.5}}},
            {"s", {1}},
            {"K", 2},
            {"learner", {{"family", "least-squares"}, {"basis", "quadratic"}}},
            {"scenarios", {{{"scenario", 3}}}},
            {"n", {200}},
            {"replicates", 2},
            {"seed", 11},
            {"truth", 0.117},
            {"true_nuisances", true}};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, EstimateOnToyDataWritesAllFields) {
  const auto cfg = write_json("est.json", toy_estimate());
  const auto r = run("estimate --config \"" + cfg.string() + "\" --out \"" + (dir_ / "o").string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = Json::parse(slurp(dir_ / "o" / "result.json"));
  for (const char* k : {"psi", "se", "ci_lower", "ci_upper", "p_one_sided", "v_full", "v_reduced", "algorithm", "seed",
                        "reps", "measure", "s", "folds", "provenance"})
    EXPECT_TRUE(res.contains(k)) << k;
  for (const char* k : {"config_hash", "seed", "version"}) EXPECT_TRUE(res["provenance"].contains(k)) << k;
  EXPECT_LE(res["ci_lower"].get<double>(), res["psi"].get<double>());
  EXPECT_GE(res["ci_upper"].get<double>(), res["psi"].get<double>());
  EXPECT_EQ(res["s"], Json::array({1}));
  EXPECT_TRUE(fs::exists(dir_ / "o" / "result.csv"));
  EXPECT_EQ(Json::parse(r.out), res);
}

TEST_F(Cli, EstimateIsSeedDeterministic) {
  const auto cfg = write_json("est.json", toy_estimate());
  const auto a = run("estimate --config \"" + cfg.string() + "\" --out \"" + (dir_ / "a").string() + "\"");
  const auto b = run("estimate --config \"" + cfg.string() + "\" --out \"" + (dir_ / "b").string() + "\"");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "result.csv"), slurp(dir_ / "b" / "result.csv"));
}

TEST_F(Cli, UnknownFeatureNameExitsTwo) {
  auto j = toy_estimate();
  j["s"] = {"age"};
  const auto r = run("estimate --config \"" + write_json("est.json", j).string() + "\" --out \"" + dir_.string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("age"), std::string::npos) << r.err;
}

TEST_F(Cli, TauBeyondLastEventExitsTwo) {
  auto j = toy_estimate();
  j["measure"]["tau"] = 50.0;
  const auto r = run("estimate --config \"" + write_json("est.json", j).string() + "\" --out \"" + dir_.string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("not identified"), std::string::npos) << r.err;
}

TEST_F(Cli, NumericalFailureExitsThree) {
  // one event at or before tau: some fold is left without one
  auto j = toy_estimate();
  j["measure"]["tau"] = 0.19;
  j["K"] = 5;
  const auto r = run("estimate --config \"" + write_json("est.json", j).string() + "\" --out \"" + dir_.string() + "\"");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("fold"), std::string::npos) << r.err;
}

TEST_F(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run("estimate").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  const auto cfg = write_json("est.json", toy_estimate());
  EXPECT_EQ(run("estimate --config \"" + cfg.string() + "\" --subsample 1.5").code, 2);
  EXPECT_EQ(run("estimate --config \"" + (dir_ / "missing.json").string() + "\"").code, 2);
}

TEST_F(Cli, CindexEstimateAcceptsSubsampleFlag) {
  auto j = toy_estimate();
  j["measure"] = {{"kind", "cindex"}, {"tau", 1.0}};
  j["boost"] = {{"mstop", {10, 30}}, {"zeta", {0.05}}, {"cv_folds", 2}};
  const auto cfg = write_json("est.json", j);
  const auto a = run("estimate --config \"" + cfg.string() + "\" --out \"" + (dir_ / "a").string() + "\" --subsample 0.5");
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run("estimate --config \"" + cfg.string() + "\" --out \"" + (dir_ / "b").string() + "\"");
  ASSERT_EQ(b.code, 0) << b.err;
  const auto ra = Json::parse(slurp(dir_ / "a" / "result.json")), rb = Json::parse(slurp(dir_ / "b" / "result.json"));
  EXPECT_TRUE(std::isfinite(ra["psi"].get<double>()));
  EXPECT_NE(ra["psi"].get<double>(), rb["psi"].get<double>());
}

TEST_F(Cli, MicroStudyIsReproducible) {
  const auto cfg = write_json("sim.json", micro_study());
  const auto a = run("simulate --config \"" + cfg.string() + "\" --out \"" + (dir_ / "a").string() + "\"");
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run("simulate --config \"" + cfg.string() + "\" --out \"" + (dir_ / "b").string() + "\"");
  ASSERT_EQ(b.code, 0) << b.err;
  const auto rows = slurp(dir_ / "a" / "replicates.csv");
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 3);
  EXPECT_EQ(rows, slurp(dir_ / "b" / "replicates.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.csv"), slurp(dir_ / "b" / "summary.csv"));
  const auto prov = Json::parse(slurp(dir_ / "a" / "provenance.json"));
  EXPECT_EQ(prov["seed"], 11);
  EXPECT_TRUE(prov.contains("config_hash"));
}

TEST_F(Cli, ProfileEmitsConfig) {
  const auto r = run("simulate --profile paper-fig1 --out \"" + dir_.string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["measure"]["kind"], "auc");
  EXPECT_EQ(j["s"], Json::array({6}));
  EXPECT_EQ(j["replicates"], 200);
  EXPECT_EQ(j, Json::parse(slurp(dir_ / "paper-fig1.json")));
  EXPECT_EQ(run("simulate --profile nope").code, 2);
}

TEST_F(Cli, OracleRejectsUnsupportedSet) {
  const Json j = {{"scenario", 3}, {"measure", {{"kind", "auc"}, {"tau", 0.5}}}, {"s", {1, 2}}, {"mc_size", 10000}};
  const auto r = run("oracle --config \"" + write_json("orc.json", j).string() + "\" --out \"" + dir_.string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, OracleScenarioOneValues) {
  Json j = {{"scenario", 1}, {"measure", {{"kind", "auc"}, {"tau", 0.5}}}, {"s", {1, 6}}, {"mc_size", 300000}, {"seed", 3}};
  auto r = run("oracle --config \"" + write_json("a.json", j).string() + "\" --out \"" + (dir_ / "a").string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  auto res = Json::parse(r.out);
  EXPECT_NEAR(res["psi"].get<double>(), 0.116, 0.004 + 3.0 * res["mc_se"].get<double>());
  EXPECT_TRUE(res["provenance"].contains("config_hash"));
  j["s"] = {6};
  r = run("oracle --config \"" + write_json("b.json", j).string() + "\" --out \"" + (dir_ / "b").string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  res = Json::parse(r.out);
  EXPECT_LE(std::abs(res["psi"].get<double>()), 3.0 * res["mc_se"].get<double>() + 1e-12);
}
