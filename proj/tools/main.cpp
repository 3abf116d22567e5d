#include "app/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace cbf_guard::app;

  CLI::App cli{"CBF safety filters: simulation, synthesis and sampled-data analysis"};
  cli.require_subcommand(1);

  CommandOptions opts;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) sub->add_option("--config", opts.config, "JSON run config")->required();
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_flag("--quiet", opts.quiet, "suppress the summary on stdout");
  };

  auto* simulate = cli.add_subcommand("simulate", "closed-loop sample-and-hold simulation");
  auto* synthesize = cli.add_subcommand("synthesize", "sampling-based multi-CBF synthesis");
  auto* analyze = cli.add_subcommand("analyze", "sampled-data constants and tightenings");
  auto* inactivity = cli.add_subcommand("inactivity-map", "label grid states active/inactive");
  auto* metrics = cli.add_subcommand("metrics", "metrics of a trajectory CSV");
  for (auto* sub : {simulate, synthesize, analyze, inactivity}) add_common(sub, true);
  add_common(metrics, false);
  metrics->add_option("--traj", opts.trajectory, "trajectory CSV")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }
  for (auto* sub : cli.get_subcommands()) {
    if (sub->count("--seed") > 0) opts.seed = seed;
  }

  if (simulate->parsed()) return run_simulate(opts, std::cout, std::cerr);
  if (synthesize->parsed()) return run_synthesize(opts, std::cout, std::cerr);
  if (analyze->parsed()) return run_analyze(opts, std::cout, std::cerr);
  if (inactivity->parsed()) return run_inactivity_map(opts, std::cout, std::cerr);
  return run_metrics(opts, std::cout, std::cerr);
}
