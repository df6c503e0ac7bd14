#include "kfp/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

using Command = int (*)(const kfp::RunConfig&, const kfp::CommandOptions&, std::ostream&,
                        std::ostream&);

struct Subcommand {
  const char* name;
  const char* help;
  Command fn;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic Fokker-Planck simulator, Lyapunov certifier and diagnostics"};
  app.set_version_flag("--version", kfp::version_string());
  app.require_subcommand(1);

  const Subcommand table[] = {
      {"simulate", "run the finite-volume solver to time.t_final", kfp::cmd_simulate},
      {"verify-lyapunov", "scan the Lyapunov drift inequality", kfp::cmd_verify_lyapunov},
      {"fit-rate", "fit a sub-geometric decay law to a (t, distance) series",
       kfp::cmd_fit_rate},
      {"steady-state", "integrate until the L1 change rate drops below tolerance",
       kfp::cmd_steady_state},
      {"export-reference", "write exp(-delta E^(beta/2)) on the grid",
       kfp::cmd_export_reference},
  };

  std::string config_path;
  kfp::CommandOptions options;
  std::string output_dir;
  std::string resume;
  std::string series;
  std::uint64_t seed = 0;
  Command chosen = nullptr;

  for (const auto& sub : table) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    cmd->add_option("--config", config_path, "configuration file")->required();
    cmd->add_option("--output", output_dir, "output directory (overrides output.directory)");
    cmd->add_option("--seed", seed, "seed echoed into the manifest");
    if (sub.fn == kfp::cmd_simulate) {
      cmd->add_option("--resume", resume, "checkpoint to continue from");
    }
    if (sub.fn == kfp::cmd_fit_rate) {
      cmd->add_option("--series", series, "CSV file of t,distance rows")->required();
    }
    cmd->callback([&chosen, fn = sub.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kfp::kExitUsage;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--output")) options.output_dir = output_dir;
    if (sub->count("--seed")) options.seed = seed;
    if (sub->get_option_no_throw("--resume") && sub->count("--resume")) options.resume = resume;
    if (sub->get_option_no_throw("--series") && sub->count("--series")) options.series = series;
  }

  try {
    const kfp::RunConfig config = kfp::load_config(config_path);
    return chosen(config, options, std::cout, std::cerr);
  } catch (const kfp::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kfp::kExitUsage;
  } catch (const kfp::NumericalAbort& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kfp::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kfp::kExitUsage;
  }
}
