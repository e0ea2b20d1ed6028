#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "generators.hpp"
#include "tracejudge/error.hpp"

namespace tj = tracejudge;
namespace cli = tracejudge::cli;
namespace fs = std::filesystem;

namespace {

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

cli::RunConfig small_config(const std::string& name) {
  cli::RunConfig cfg;
  cfg.out = tj_test::scratch_dir(name);
  cfg.scenario.cycle.assets = 3;
  cfg.scenario.cycle.days = 20;
  cfg.scenario.cycle.evaluation_days = 20;
  cfg.stats.bootstrap_resamples = 300;
  cfg.stats.mcs_resamples = 200;
  return cfg;
}

fs::path two_episodes(const fs::path& dir) {
  std::mt19937_64 rng(12);
  std::vector<tj::Episode> eps{tj_test::random_episode(rng, "e1"), tj_test::random_episode(rng, "e2")};
  const auto path = dir / "episodes.jsonl";
  tj::write_episodes_jsonl(path, eps);
  return path;
}

tj::JudgeConfig reference(const std::string& id) {
  tj::JudgeConfig c;
  c.id = id;
  return c;
}

class QuietLogs : public ::testing::Test {
 protected:
  void SetUp() override { spdlog::set_level(spdlog::level::off); }
  void TearDown() override { spdlog::set_level(spdlog::level::info); }
};

using Cli = QuietLogs;

}  // namespace

TEST_F(Cli, ConfigFromJson) {
  const auto cfg = cli::config_from_json(nlohmann::json::parse(R"({
    "seed": 19, "out": "results",
    "judges": [{"id": "a"}, {"id": "b", "provider": "reference"}],
    "stats": {"bootstrap_resamples": 100, "mcs_levels": [0.8]},
    "sweep": {"lambdas": [0.1, 0.2]}
  })"));
  EXPECT_EQ(cfg.seed, 19u);
  EXPECT_EQ(cfg.scenario.seed, 19u);
  EXPECT_EQ(cfg.stats.seed, 19u);
  EXPECT_EQ(cfg.out, fs::path("results"));
  ASSERT_EQ(cfg.judges.size(), 2u);
  EXPECT_EQ(cfg.judges[1].id, "b");
  EXPECT_EQ(cfg.stats.bootstrap_resamples, 100u);
  EXPECT_EQ(cfg.lambdas, (std::vector<double>{0.1, 0.2}));
}

TEST_F(Cli, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(cli::config_from_json(nlohmann::json::parse(R"({"sed": 1})")), tj::ConfigError);
  EXPECT_THROW(cli::config_from_json(nlohmann::json::parse(R"({"stats": {"ci": 0.9}})")), tj::ConfigError);
  EXPECT_THROW(cli::config_from_json(nlohmann::json::parse(R"({"stats": {"ci_level": 1.5}})")), tj::ConfigError);
  EXPECT_THROW(cli::config_from_json(nlohmann::json::parse(R"({"judges": [{"provider": "oracle"}]})")),
               tj::ConfigError);
  EXPECT_THROW(cli::config_from_json(nlohmann::json::parse(R"({"paths": {"episodes": "/no/such/file"}})")),
               tj::ConfigError);
  EXPECT_THROW(cli::config_from_json(nlohmann::json::parse("[1]")), tj::ConfigError);
}

TEST_F(Cli, EnvironmentInterpolation) {
  ::setenv("TJ_TEST_OUT", "from-env", 1);
  const auto j = cli::interpolate_env(nlohmann::json::parse(R"({"out": "${TJ_TEST_OUT}/x", "n": [1, "${TJ_TEST_OUT}"]})"));
  EXPECT_EQ(j["out"], "from-env/x");
  EXPECT_EQ(j["n"][1], "from-env");
  ::unsetenv("TJ_TEST_UNSET_VAR");
  EXPECT_THROW(cli::interpolate_env(nlohmann::json::parse(R"({"out": "${TJ_TEST_UNSET_VAR}"})")), tj::ConfigError);
}

TEST_F(Cli, JudgeSelection) {
  auto cfg = cli::config_from_json(nlohmann::json::parse(R"({"judges": [{"id": "a"}, {"id": "b"}]})"));
  cli::select_judges(cfg, {"b", "reference"});
  ASSERT_EQ(cfg.judges.size(), 2u);
  EXPECT_EQ(cfg.judges[0].id, "b");
  EXPECT_EQ(cfg.judges[1].id, "reference");
  EXPECT_THROW(cli::select_judges(cfg, {"zzz"}), tj::ConfigError);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli::run_guarded([] { return 0; }), cli::kOk);
  EXPECT_EQ(cli::run_guarded([]() -> int { throw tj::ConfigError("x"); }), cli::kConfigError);
  EXPECT_EQ(cli::run_guarded([]() -> int { throw tj::DataError("x"); }), cli::kDataError);
  EXPECT_EQ(cli::run_guarded([]() -> int { throw tj::JudgeError("x", "raw"); }), cli::kJudgeError);
  EXPECT_EQ(cli::run_guarded([]() -> int { throw std::runtime_error("x"); }), cli::kInternal);
}

TEST_F(Cli, EvaluateWritesArchiveAndIsRepeatable) {
  auto cfg = small_config("cli_evaluate");
  cfg.judges = {reference("a"), reference("b"), reference("c")};
  const auto input_dir = tj_test::scratch_dir("cli_evaluate_in");
  const auto eps = two_episodes(input_dir);
  const auto s = cli::cmd_evaluate(cfg, eps);
  EXPECT_EQ(s.episodes, 2u);
  EXPECT_EQ(s.judgments, 6u);
  EXPECT_EQ(s.consensus_records, 2u);
  const auto dir = cfg.out / "evaluate";
  EXPECT_EQ(lines(dir / "archive.jsonl"), 8u);
  EXPECT_EQ(lines(dir / "consensus.jsonl"), 2u);
  const auto first = tj_test::read_file(dir / "archive.jsonl");
  const auto agreement = tj_test::read_file(dir / "agreement.json");
  cli::cmd_evaluate(cfg, eps);
  EXPECT_EQ(tj_test::read_file(dir / "archive.jsonl"), first);
  EXPECT_EQ(tj_test::read_file(dir / "agreement.json"), agreement);
}

TEST_F(Cli, InputInsideOutputDirectoryRefused) {
  auto cfg = small_config("cli_refuse");
  fs::create_directories(cfg.out / "evaluate");
  const auto eps = two_episodes(cfg.out / "evaluate");
  EXPECT_THROW(cli::cmd_evaluate(cfg, eps), tj::ConfigError);
  EXPECT_TRUE(fs::exists(eps));
}

TEST_F(Cli, PerturbWritesManifestAndTable) {
  auto cfg = small_config("cli_perturb");
  const auto r = cli::cmd_perturb(cfg, tj_test::fixture("baselines60.jsonl"));
  EXPECT_EQ(r.rows.size(), 6u);
  const auto dir = cfg.out / "perturb";
  EXPECT_EQ(lines(dir / "validation_set.jsonl"), 420u);
  EXPECT_EQ(lines(dir / "specificity.csv"), 7u);
}

TEST_F(Cli, LoopOutputsAndFrozenPolicyReload) {
  auto cfg = small_config("cli_loop");
  const auto result = cli::cmd_loop(cfg, 2);
  const auto dir = cfg.out / "loop";
  EXPECT_EQ(lines(dir / "cycles.jsonl"), 2u);
  for (const char* f : {"scenario.json", "baseline.json", "frozen_policy.json", "forecasts.csv", "archive.jsonl"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "frozen_policy.json");
  const auto reloaded = tj::sim::policy_from_json(nlohmann::json::parse(in));
  EXPECT_EQ(reloaded, result.final_policy);
  const std::vector<std::pair<std::string, tj::sim::Policy>> policies{{"pre", cfg.scenario.policy},
                                                                      {"post", reloaded}};
  const auto again = tj_test::scratch_dir("cli_loop_reload") / "forecasts.csv";
  tj::write_forecast_csv(again, tj::sim::forecast_panel(cfg.scenario, policies));
  EXPECT_EQ(tj_test::read_file(again), tj_test::read_file(dir / "forecasts.csv"));
}

TEST_F(Cli, ZeroLambdaStillActivates) {
  auto cfg = small_config("cli_loop_zero");
  cfg.scenario.reward = cfg.scenario.reward.with_lambda(0.0);
  const auto result = cli::cmd_loop(cfg, 1);
  ASSERT_EQ(result.cycles.size(), 1u);
  EXPECT_TRUE(result.cycles[0].activated);
  EXPECT_EQ(result.cycles[0].mean_penalty, 0.0);
}

TEST_F(Cli, StatsOnIdenticalModelsIsDegenerate) {
  auto cfg = small_config("cli_stats");
  auto panel = tj_test::synthetic_panel(8, 2, 80, 1.0);
  panel.forecast[0] = panel.forecast[1];
  const auto in = tj_test::scratch_dir("cli_stats_in") / "f.csv";
  tj::write_forecast_csv(in, panel);
  const auto r = cli::cmd_stats(cfg, in);
  EXPECT_TRUE(r.all_degenerate);
  EXPECT_TRUE(fs::exists(cfg.out / "stats" / "stats.json"));
}

TEST_F(Cli, SimulateBaselinesOnly) {
  auto cfg = small_config("cli_simulate");
  cfg.corpus_days = 3000;
  const auto eps = cli::cmd_simulate(cfg, std::nullopt, true);
  EXPECT_EQ(eps.size(), 60u);
  EXPECT_EQ(lines(cfg.out / "simulate" / "episodes.jsonl"), 60u);
}
