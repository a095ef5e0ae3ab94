#include <CLI11.hpp>

#include <iostream>

#include "nsstab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Periodic-box Navier-Stokes solver and stability-certificate calculator"};
  app.require_subcommand(1);
  nsstab::CommandOptions opt;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON configuration file");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Perturbation seed");
    sub->add_option("--jobs", opt.jobs, "Parallel scenarios")->check(CLI::PositiveNumber);
    sub->add_flag("--svg", opt.svg, "Write SVG plots");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "Evolve base2d, full3d or pair systems");
  CLI::App* certify = app.add_subcommand("certify", "Evaluate the constant chains and hypothesis flags");
  CLI::App* stability = app.add_subcommand("stability", "Run stability experiments");
  CLI::App* report = app.add_subcommand("report", "Verify and summarize a report directory");
  for (CLI::App* s : {simulate, certify, stability, report}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : nsstab::kExitConfig;
  }
  if (!out_dir.empty()) opt.out_dir = out_dir;
  for (CLI::App* s : {simulate, certify, stability, report})
    if (s->parsed() && s->count("--seed") > 0) opt.seed = seed;

  if (simulate->parsed()) return nsstab::cmd_simulate(opt, std::cout, std::cerr);
  if (certify->parsed()) return nsstab::cmd_certify(opt, std::cout, std::cerr);
  if (stability->parsed()) return nsstab::cmd_stability(opt, std::cout, std::cerr);
  return nsstab::cmd_report(opt, std::cout, std::cerr);
}
