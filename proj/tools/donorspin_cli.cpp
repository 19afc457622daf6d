#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "donorspin/commands.hpp"

namespace {

void common_options(CLI::App* sub, donorspin::CommandOptions& opt, bool config_required) {
  auto* c = sub->add_option("-c,--config", opt.config, "run configuration (JSON)");
  if (config_required) c->required();
  sub->add_option("-o,--out", opt.out, "output directory (overrides output_dir)");
  sub->add_option("--seed", opt.seed, "random seed (overrides seed)");
  sub->add_option("-j,--jobs", opt.jobs, "worker threads, 0 = all cores");
  sub->add_option("--set", opt.overrides, "override a config key, e.g. field.magnitude=\"3 T\"")
      ->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Donor spin qubit simulator"};
  app.require_subcommand(1);
  donorspin::CommandOptions opt;
  opt.log = &std::cerr;

  auto* simulate = app.add_subcommand("simulate", "run the configured experiment");
  common_options(simulate, opt, true);

  auto* estimate = app.add_subcommand("estimate", "analytic decoherence budget");
  common_options(estimate, opt, true);

  auto* fit = app.add_subcommand("fit", "fit a model to measured or simulated data");
  common_options(fit, opt, true);
  fit->add_option("-d,--data", opt.data, "data file(s); two for the simultaneous model")->required();
  fit->add_option("--compare", opt.compare, "fit several models and report the best");

  auto* sweep = app.add_subcommand("sweep", "repeat a simulation over one config key");
  common_options(sweep, opt, true);
  sweep->add_option("--axis", opt.axis, "dotted numeric config key, e.g. field.magnitude")->required();
  sweep->add_option("--values", opt.values, "axis values in the key's unit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? donorspin::kExitOk : donorspin::kExitValidation;
  }

  const auto result = donorspin::run_command(app.get_subcommands().front()->get_name(), opt);
  if (result.exit_code == donorspin::kExitOk) std::cout << result.run_dir.string() << '\n';
  return result.exit_code;
}
