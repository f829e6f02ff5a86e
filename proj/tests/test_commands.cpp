#include <gtest/gtest.h>

#include <json.hpp>

#include <regex>
#include <sstream>

#include "commands.hpp"
#include "moo/io.hpp"
#include "moo/toy_problem.hpp"

namespace moo::cli {
namespace {

using nlohmann::json;

class CommandsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("moo_cmd_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, json doc) {
    if (!doc.contains("output_dir")) doc["output_dir"] = (dir_ / (name + "_out")).string();
    const auto path = dir_ / (name + ".json");
    io::write_file(path, doc.dump());
    return path;
  }

  int solve(const std::string& vec, json* result = nullptr, SolverConfig solver = {}) {
    std::ostringstream out, err;
    const int rc = cmd_solve(std::nullopt, vec, solver, out, err);
    if (result && rc == kExitOk) *result = json::parse(out.str());
    err_ = err.str();
    return rc;
  }

  fs::path dir_;
  std::string err_;
};

TEST_F(CommandsTest, ConfigDefaults) {
  const auto toy = parse_run_config("{}");
  EXPECT_EQ(toy.problem, ProblemKind::Toy2D);
  EXPECT_EQ(toy.train.combinator, CombinatorKind::MGDADecoupled);
  EXPECT_EQ(toy.train.lr, 5e-3);
  EXPECT_EQ(toy.train.max_steps, 5000);
  EXPECT_EQ(toy.train.solver.max_iterations, 20);
  EXPECT_EQ(toy.init, kToyInit);

  const auto dpo = parse_run_config(R"({"problem": "dpo-sim"})");
  EXPECT_EQ(dpo.train.lr, 0.05);
  EXPECT_EQ(dpo.train.groupdro_eta, 0.1);
  EXPECT_EQ(dpo.train.max_steps, 200);
  EXPECT_EQ(dpo.dpo.beta, 0.5);
  EXPECT_EQ(dpo.dpo.spec.num_objectives, 4u);
}

TEST_F(CommandsTest, ConfigRejections) {
  EXPECT_THROW(parse_run_config("{"), ConfigError);
  EXPECT_THROW(parse_run_config("[]"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"beta": 1})"), ConfigError);  // dpo-only key
  EXPECT_THROW(parse_run_config(R"({"problem": "dpo-sim", "init": [0, 0]})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"max_steps": 0})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"max_steps": 1.5})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"lr": "fast"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"solver": {"tol": 1}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"init": [1]})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"problem": "dpo-sim", "rho": 2})"), ConfigError);
  try {
    parse_run_config(R"({"combinator": "pcgrad"})");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (auto kind : kAllCombinators) EXPECT_NE(msg.find(to_string(kind)), std::string::npos);
  }
}

TEST_F(CommandsTest, RunUnknownCombinatorExits2) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(write_config("bad", {{"combinator", "pcgrad"}}), out, err), kExitConfig);
  EXPECT_NE(err.str().find("mgda-normalised"), std::string::npos);
  EXPECT_EQ(cmd_run(dir_ / "missing.json", out, err), kExitConfig);
}

TEST_F(CommandsTest, RunWritesOutputs) {
  std::ostringstream out, err;
  const auto cfg = write_config("ok", {{"combinator", "mgda-decoupled"}});
  ASSERT_EQ(cmd_run(cfg, out, err), kExitOk) << err.str();
  const auto od = dir_ / "ok_out";
  const auto summary = json::parse(io::read_file(od / "summary.json"));
  EXPECT_EQ(summary["problem"], "toy2d");
  ASSERT_TRUE(summary["converged_at"].is_number_integer());
  EXPECT_NEAR(summary["converged_at"].get<double>(), 265.0, 10.0);
  const auto traj = io::trajectory_from_csv(io::read_file(od / "trajectory.csv"));
  EXPECT_EQ(traj.records.back().step, summary["converged_at"].get<std::int64_t>());
  EXPECT_TRUE(json::parse(io::read_file(od / "timing.json"))["wall_time"].is_number());
}

TEST_F(CommandsTest, RunSingleStepDoesNotConverge) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(write_config("one", {{"max_steps", 1}}), out, err), kExitOk);
  const auto summary = json::parse(io::read_file(dir_ / "one_out" / "summary.json"));
  EXPECT_TRUE(summary["converged_at"].is_null());
  EXPECT_EQ(summary["steps"], 1);
}

TEST_F(CommandsTest, SolveOpposite) {
  json r;
  ASSERT_EQ(solve("[[1,0],[-1,0]]", &r), kExitOk);
  EXPECT_NEAR(r["weights"][0].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(r["weights"][1].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(r["norm"].get<double>(), 0.0, 1e-12);
}

TEST_F(CommandsTest, SolveOrthogonal) {
  json r;
  ASSERT_EQ(solve("[[2,0],[0,1]]", &r), kExitOk);
  EXPECT_NEAR(r["weights"][0].get<double>(), 0.2, 1e-9);
  EXPECT_NEAR(r["weights"][1].get<double>(), 0.8, 1e-9);
  EXPECT_NEAR(r["point"][0].get<double>(), 0.4, 1e-9);
  EXPECT_NEAR(r["point"][1].get<double>(), 0.8, 1e-9);
  EXPECT_NEAR(r["norm"].get<double>(), 0.8944271909999159, 1e-9);
}

TEST_F(CommandsTest, SolveSingleAndObjectForm) {
  json r;
  ASSERT_EQ(solve("[[1,0]]", &r), kExitOk);
  EXPECT_EQ(r["weights"], json::array({1.0}));
  EXPECT_EQ(r["norm"], 1.0);
  ASSERT_EQ(solve(R"({"vectors": [[3,4]]})", &r), kExitOk);
  EXPECT_EQ(r["norm"], 5.0);
}

TEST_F(CommandsTest, SolveFromFile) {
  io::write_file(dir_ / "v.json", "[[1,2,3],[-1,0,1],[0,-2,1]]");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(dir_ / "v.json", std::nullopt, {}, out, err), kExitOk);
  const auto r = json::parse(out.str());
  EXPECT_LE(r["kkt_residual"].get<double>(), 1e-6);
}

TEST_F(CommandsTest, SolveMalformed) {
  EXPECT_EQ(solve("[[1,0],[1]]"), kExitConfig);
  EXPECT_FALSE(err_.empty());
  EXPECT_EQ(solve("[[1,0"), kExitConfig);
  EXPECT_EQ(solve("[]"), kExitConfig);
  EXPECT_EQ(solve("[[\"a\"]]"), kExitConfig);
  EXPECT_EQ(solve("[[1,0]]", nullptr, SolverConfig{0, 1e-8}), kExitConfig);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_solve(std::nullopt, std::nullopt, {}, out, err), kExitConfig);
  EXPECT_EQ(cmd_solve(dir_ / "nope.json", std::nullopt, {}, out, err), kExitConfig);
}

TEST_F(CommandsTest, ReproduceFig3OutputsAndDeterminism) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_reproduce_fig3(dir_ / "a", 1500, out, err), kExitOk);
  ASSERT_EQ(cmd_reproduce_fig3(dir_ / "b", 1500, out, err), kExitOk);
  for (const char* f : {"uniform.csv", "groupdro.csv", "mgda.csv", "mgda-normalised.csv",
                        "mgda-decoupled.csv", "fig3.svg", "summary.json", "summary.txt"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(io::read_file(dir_ / "a" / f), io::read_file(dir_ / "b" / f)) << f;
  }
  const auto svg = io::read_file(dir_ / "a" / "fig3.svg");
  const std::regex polyline("<polyline");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), polyline), std::sregex_iterator()),
            5);
  const auto summary = json::parse(io::read_file(dir_ / "a" / "summary.json"));
  EXPECT_TRUE(summary["converged_at"]["mgda"].is_null());
  EXPECT_TRUE(summary["converged_at"]["mgda-decoupled"].is_number_integer());
  EXPECT_EQ(cmd_reproduce_fig3(dir_ / "c", 0, out, err), kExitConfig);
}

TEST_F(CommandsTest, DpoSimIdenticalObjectives) {
  std::ostringstream out, err;
  for (const auto* name : {"uniform", "mgda", "mgda-normalised", "mgda-decoupled", "groupdro"}) {
    const auto path = write_config(std::string("rho1_") + name,
                                   {{"problem", "dpo-sim"}, {"rho", 1.0}, {"max_steps", 50},
                                    {"combinator", name}});
    ASSERT_EQ(cmd_dpo_sim(path, out, err), kExitOk) << err.str();
    const auto r = json::parse(io::read_file(dir_ / (std::string("rho1_") + name + "_out") / "final_losses.json"));
    const auto losses = r["final_losses"].get<std::vector<double>>();
    for (double l : losses) EXPECT_NEAR(l, losses[0], 1e-6) << name;
    EXPECT_LT(losses[0], r["initial_losses"][0].get<double>()) << name;
  }
}

TEST_F(CommandsTest, DpoSimDeterministicAndRoundTrips) {
  std::ostringstream out, err;
  const json base = {{"problem", "dpo-sim"}, {"max_steps", 30}, {"seed", 11}};
  json a = base, b = base;
  a["output_dir"] = (dir_ / "a").string();
  b["output_dir"] = (dir_ / "b").string();
  ASSERT_EQ(cmd_dpo_sim(write_config("a", a), out, err), kExitOk) << err.str();
  ASSERT_EQ(cmd_dpo_sim(write_config("b", b), out, err), kExitOk) << err.str();
  for (const char* f : {"trajectory.csv", "summary.json", "final_losses.json",
                        "datasets/objective_0.json", "datasets/objective_3.json"}) {
    EXPECT_EQ(io::read_file(dir_ / "a" / f), io::read_file(dir_ / "b" / f)) << f;
  }

  // Feeding the written datasets back reproduces the run.
  json c = base;
  c["output_dir"] = (dir_ / "c").string();
  c["datasets"] = json::array();
  for (int i = 0; i < 4; ++i) {
    c["datasets"].push_back((dir_ / "a" / "datasets" / ("objective_" + std::to_string(i) + ".json")).string());
  }
  ASSERT_EQ(cmd_dpo_sim(write_config("c", c), out, err), kExitOk) << err.str();
  EXPECT_EQ(io::read_file(dir_ / "a" / "trajectory.csv"), io::read_file(dir_ / "c" / "trajectory.csv"));
}

TEST_F(CommandsTest, DpoSimEmptyObjectiveExits2) {
  io::write_file(dir_ / "empty.json", R"({"objective": 0, "pairs": []})");
  io::write_file(dir_ / "full.json", R"({"objective": 1, "pairs": [{"x": 0, "yw": 0, "yl": 1}]})");
  std::ostringstream out, err;
  const auto path = write_config(
      "cfg_empty", {{"problem", "dpo-sim"},
                {"datasets", json::array({(dir_ / "full.json").string(), (dir_ / "empty.json").string()})}});
  EXPECT_EQ(cmd_dpo_sim(path, out, err), kExitConfig);
  EXPECT_NE(err.str().find("objective 0"), std::string::npos) << err.str();
}

TEST_F(CommandsTest, DpoSimRejectsToyConfig) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_dpo_sim(write_config("toy", json::object()), out, err), kExitConfig);
}

TEST_F(CommandsTest, RunDelegatesDpoConfig) {
  std::ostringstream out, err;
  const auto path = write_config("dpo", {{"problem", "dpo-sim"}, {"max_steps", 5}});
  ASSERT_EQ(cmd_run(path, out, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(dir_ / "dpo_out" / "final_losses.json"));
}

}  // namespace
}  // namespace moo::cli
