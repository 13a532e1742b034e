#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedprox/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fedprox-lab: deterministic federated proximal optimization laboratory"};
  app.require_subcommand(1);

  fedprox::CliOptions opts;
  std::string config_path;
  std::string axis;
  std::vector<double> values;
  std::uint64_t seed_value = 0;
  int threads_value = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "JSON config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (default: .)");
    cmd->add_option("--seed", seed_value, "override run.seed");
    cmd->add_option("--threads", threads_value,
                    "worker threads for device solves (default: $FEDPROX_THREADS or 1)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "execute one federated run");
  add_common(run_cmd);
  run_cmd->add_flag("--svg", opts.svg, "also write trace.svg");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "rate-scaling sweep over T, I, b or bI");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--axis", axis, "sweep axis: T, I, b or bI")->required();
  sweep_cmd->add_option("--values", values, "axis values")->required()->delimiter(',');

  CLI::App* verify_cmd = app.add_subcommand("verify", "run the full property-check suite");
  add_common(verify_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fedprox::kExitConfigError;
  }

  CLI::App* active = run_cmd->parsed() ? run_cmd : sweep_cmd->parsed() ? sweep_cmd : verify_cmd;
  if (active->count("--seed") > 0) opts.seed = seed_value;
  if (active->count("--threads") > 0) opts.threads = threads_value;

  if (run_cmd->parsed()) return fedprox::cmd_run(config_path, opts);
  if (sweep_cmd->parsed()) return fedprox::cmd_sweep(config_path, axis, values, opts);
  return fedprox::cmd_verify(config_path, opts);
}
