// Command-line front end for the Monte Carlo experiments.
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "sfperc/experiment.hpp"

namespace {

using sfperc::ExperimentConfig;
using sfperc::UsageError;

// Fills fields from a JSON config file, skipping any key whose flag was given.
void apply_config_file(const std::string& path, ExperimentConfig& cfg, const CLI::App& app) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot read config file '{}'", path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(fmt::format("{}: {}", path, e.what()));
  }
  if (!j.is_object()) throw UsageError(fmt::format("{}: expected a JSON object", path));
  auto given = [&](const std::string& flag) { return app.count("--" + flag) > 0; };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "command") continue;
      if (given(key == "spacing_k" ? "spacing-k" : key)) continue;
      if (key == "beta") cfg.beta = value.get<double>();
      else if (key == "c") cfg.c = value.get<double>();
      else if (key == "n") cfg.n = value.is_array() ? value.get<std::vector<std::uint32_t>>()
                                                    : std::vector<std::uint32_t>{value.get<std::uint32_t>()};
      else if (key == "trials") cfg.trials = value.get<std::uint64_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "k") cfg.k = value.get<std::size_t>();
      else if (key == "spacing_k") cfg.spacing_k = value.get<std::size_t>();
      else if (key == "level") cfg.level = value.get<double>();
      else if (key == "tolerance") cfg.tolerance = value.get<double>();
      else if (key == "r") cfg.r = value.get<double>();
      else if (key == "horizon") cfg.horizon = value.get<double>();
      else if (key == "p") cfg.p = value.is_array() ? value.get<std::vector<double>>()
                                                    : std::vector<double>{value.get<double>()};
      else if (key == "out") cfg.out_path = value.get<std::string>();
      else if (key == "format") cfg.format = value.get<std::string>() == "json" ? sfperc::Format::kJson
                                                                               : sfperc::Format::kCsv;
      else if (key == "jobs") cfg.jobs = value.get<unsigned>();
      else throw UsageError(fmt::format("{}: unknown key '{}'", path, key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(fmt::format("{}: {}", path, e.what()));
  }
}

unsigned default_jobs() {
  const char* env = std::getenv("SFPERC_JOBS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) throw UsageError(fmt::format("SFPERC_JOBS='{}' is not a positive integer", env));
  return static_cast<unsigned>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-free tree percolation Monte Carlo experiments"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string format = "csv";
  std::string out = ".";
  std::string config_file;

  app.add_option("--beta", cfg.beta, "attachment offset beta > -1");
  app.add_option("--c", cfg.c, "percolation constant, p = 1 - c / ln n");
  app.add_option("--n", cfg.n, "tree size (repeat for a ladder)")->take_all();
  app.add_option("--trials", cfg.trials, "independent trials per n");
  app.add_option("--seed", cfg.seed, "64-bit master seed");
  app.add_option("--k", cfg.k, "number of top clusters tracked");
  app.add_option("--spacing-k", cfg.spacing_k, "spacings tested by the Poisson check");
  app.add_option("--level", cfg.level, "test level");
  app.add_option("--tolerance", cfg.tolerance, "relative tolerance of mean checks");
  app.add_option("--r", cfg.r, "offset of the early window for Delta");
  app.add_option("--horizon", cfg.horizon, "time horizon of the gamma-limit check");
  app.add_option("--p", cfg.p, "retention ladder for bp-limits")->take_all();
  app.add_option("--out", out, "output directory");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--jobs", cfg.jobs, "concurrent trials (default $SFPERC_JOBS or 1)");
  app.add_option("--config", config_file, "JSON config file; flags win");

  for (const char* name : {"grow", "percolate", "theorem1", "bp-limits", "yule-check", "spacings"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sfperc::kExitUsage;
  }

  try {
    cfg.command = *sfperc::parse_command(app.get_subcommands().front()->get_name());
    if (!app.count("--jobs")) cfg.jobs = default_jobs();
    if (!config_file.empty()) apply_config_file(config_file, cfg, app);
    if (app.count("--out")) cfg.out_path = out;
    if (app.count("--format")) cfg.format = format == "json" ? sfperc::Format::kJson : sfperc::Format::kCsv;
    if (cfg.jobs == 0) throw UsageError("--jobs must be at least 1");

    const sfperc::RunResult result = sfperc::run(cfg);
    for (const auto& r : result.reports)
      std::cout << fmt::format("{} {} statistic={:.6g} p={:.6g}\n", sfperc::to_string(r.verdict), r.test,
                               r.statistic, r.p_value);
    return result.exit_status;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return sfperc::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
