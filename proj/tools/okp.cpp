#include "okp/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kThresholdFailure = 1;
constexpr int kConfigError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oriented-keypoint manipulation harness"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> out;
  int parallel = 1;

  auto* run = app.add_subcommand("run", "run every trial of a scenario");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--seed", seed, "master seed");
  run->add_option("--trials", trials, "trial count");
  run->add_option("--out", out, std::string("output directory (else $") + okp::kOutputDirEnv + ", else the scenario's)");
  run->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);

  std::string param;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "rerun a scenario over values of one parameter");
  sweep->add_option("scenario", scenario_path, "scenario file")->required();
  sweep->add_option("--param", param, "dotted path into the scenario, e.g. perception.position_sigma")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--seed", seed, "master seed");
  sweep->add_option("--trials", trials, "trial count");
  sweep->add_option("--out", out, "output directory");
  sweep->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("scenario", scenario_path, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const okp::Scenario scenario = okp::load_scenario(scenario_path);
    if (*validate) {
      std::cout << "ok: " << scenario.name << " (" << okp::to_string(scenario.task) << ", " << scenario.trials
                << " trials, agent " << scenario.agent.name()
                << (scenario.baseline ? ", baseline " + scenario.baseline->name() : std::string()) << ")\n";
      return kOk;
    }

    okp::RunOptions options;
    options.seed = seed;
    options.trials = trials;
    options.parallel = parallel;
    options.out_dir = okp::resolve_output_dir(scenario, out);

    if (*run) {
      const okp::RunResult result = okp::run_scenario(scenario, options);
      std::cout << okp::render_table(result.summary);
      std::cout << "\nwrote " << options.out_dir->string() << "\n";
      return result.summary.passed ? kOk : kThresholdFailure;
    }

    const auto points = okp::run_sweep(scenario, param, okp::parse_value_list(values), options);
    for (const auto& p : points) {
      for (const auto& a : p.summary.agents) {
        std::cout << param << "=" << p.value.dump() << "  " << a.agent << "  " << a.failures << "/" << a.trials << "\n";
      }
    }
    std::cout << "wrote " << options.out_dir->string() << "\n";
    return kOk;
  } catch (const okp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
}
