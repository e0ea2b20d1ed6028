#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "tracejudge/error.hpp"
#include "tracejudge/perturbation.hpp"

namespace cli = tracejudge::cli;
namespace fs = std::filesystem;

namespace {

std::optional<fs::path> pick(const std::string& flag, const std::optional<fs::path>& from_config) {
  if (!flag.empty()) return fs::path(flag);
  return from_config;
}

fs::path required(const std::optional<fs::path>& p, std::string_view what) {
  if (!p) throw tracejudge::ConfigError(fmt::format("no {} given (flag or config paths)", what));
  return *p;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("tracejudge"));

  CLI::App app{"Behavioral-trace judging, perturbation benchmarking, closed-loop fine-tuning and "
               "forecast-comparison statistics."};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> judges;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Run seed; overrides the config");
  app.add_option("--out", out, "Output directory; overrides the config");
  app.add_option("--judges", judges, "Judge ids to use (comma separated)")->delimiter(',');
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string episodes;
  auto* evaluate = app.add_subcommand("evaluate", "Judge every episode with every judge");
  evaluate->add_option("--episodes", episodes, "Episode JSONL file");

  std::string baselines;
  auto* perturb = app.add_subcommand("perturb", "Build the 420-episode validation set and its specificity report");
  perturb->add_option("--baselines", baselines, "Baseline episode JSONL file");

  std::optional<std::size_t> cycles;
  std::optional<double> lambda;
  auto* loop = app.add_subcommand("loop", "Run the closed judge-feedback loop and freeze the controller");
  loop->add_option("--cycles", cycles, "Number of cycles")->check(CLI::PositiveNumber);
  loop->add_option("--lambda", lambda, "Penalty weight")->check(CLI::NonNegativeNumber);

  std::string forecasts;
  auto* stats = app.add_subcommand("stats", "Run the forecast-comparison test battery");
  stats->add_option("--forecasts", forecasts, "Forecast panel CSV");

  std::vector<double> lambdas;
  auto* sweep = app.add_subcommand("sweep", "Lambda sensitivity table");
  sweep->add_option("--lambdas", lambdas, "Penalty weights (comma separated)")->delimiter(',');

  std::string policy;
  std::optional<std::size_t> days;
  auto* simulate = app.add_subcommand("simulate", "Write an episode corpus from the simulator");
  simulate->add_option("--policy", policy, "Frozen policy JSON; default is the calibrated controller")
      ->check(CLI::ExistingFile);
  bool baselines_only = false;
  simulate->add_flag("--baselines-only", baselines_only, "Keep a seeded 20/20/20 stratified sample");
  simulate->add_option("--days", days, "Trading days to simulate")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kConfigError;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  return cli::run_guarded([&]() -> int {
    cli::RunConfig cfg = config_path.empty() ? cli::RunConfig{} : cli::load_config(config_path);
    if (seed) cfg.apply_seed(*seed);
    if (!out.empty()) cfg.out = out;
    cli::select_judges(cfg, judges);

    if (*evaluate) {
      const auto s = cli::cmd_evaluate(cfg, required(pick(episodes, cfg.episodes), "--episodes"));
      std::cout << fmt::format("{} episodes, {} judgments, {} consensus records\n", s.episodes, s.judgments,
                               s.consensus_records);
    } else if (*perturb) {
      const auto r = cli::cmd_perturb(cfg, required(pick(baselines, cfg.baselines), "--baselines"));
      std::cout << to_csv(r);
    } else if (*loop) {
      if (lambda) cfg.scenario.reward = cfg.scenario.reward.with_lambda(*lambda);
      const auto r = cli::cmd_loop(cfg, cycles);
      for (const auto& c : r.cycles) {
        std::cout << fmt::format("cycle {}: deficient {} penalty {:.4f} change {:.4f}\n", c.cycle,
                                 c.deficient.size(), c.mean_penalty, c.parameter_change);
      }
    } else if (*stats) {
      const auto r = cli::cmd_stats(cfg, required(pick(forecasts, cfg.forecasts), "--forecasts"));
      std::cout << r.report.dump(2) << '\n';
      if (r.all_degenerate) return cli::kDegenerate;
    } else if (*sweep) {
      if (!lambdas.empty()) cfg.lambdas = lambdas;
      for (const auto& row : cli::cmd_sweep(cfg)) {
        std::cout << fmt::format("{:.2f} mape {:.4f} da {:.2f} deficient {:.4f} {}\n", row.lambda, row.mape,
                                 row.da, row.deficient_score, row.stable ? "stable" : "unstable");
      }
    } else if (*simulate) {
      if (days) cfg.corpus_days = *days;
      std::optional<fs::path> p;
      if (!policy.empty()) p = policy;
      const auto eps = cli::cmd_simulate(cfg, p, baselines_only);
      std::cout << fmt::format("{} episodes\n", eps.size());
    }
    return cli::kOk;
  });
}
