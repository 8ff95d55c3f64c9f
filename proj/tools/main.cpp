// pimc: path-integral and boundary element solvers for the electrode problem.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "commands.hpp"

using namespace pimc;
using namespace pimc::cli;

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::optional<std::string> point;
  bool print_config = false;
};

RunConfig assemble(const Flags& flags) {
  RunConfig config = flags.config_path.empty() ? RunConfig{} : load_config(flags.config_path);
  for (const std::string& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed) config.walk.seed = *flags.seed;
  if (flags.workers) config.workers = *flags.workers;
  if (flags.format) config.format = *flags.format;
  if (flags.out) config.out = *flags.out;
  if (flags.point) set_config_value(config, "point", *flags.point);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-integral Monte Carlo and boundary element solvers for the complete electrode model"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config_path, "key = value run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", flags.overrides, "override one config key, key=value (repeatable)");
  app.add_option("--seed", flags.seed, "master seed");
  app.add_option("--workers", flags.workers, "worker threads, 0 = all cores");
  app.add_option("--format", flags.format, "output format")->check(CLI::IsMember({"table", "json", "csv"}));
  app.add_option("--out", flags.out, "write the report to this file");
  app.add_flag("--print-config", flags.print_config, "print the resolved configuration and exit");

  struct Command {
    const char* name;
    const char* help;
    Report (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"solve-point", "potential at one point (--point or the 'point' key)", cmd_solve_point},
      {"map", "currents on every electrode", cmd_map},
      {"bem", "boundary element reference solution", cmd_bem},
      {"compare", "path-integral currents against the reference", cmd_compare},
      {"oracle-check", "closed-form suite through both solvers", cmd_oracle_check},
  };
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    if (std::string(c.name) == "solve-point") sub->add_option("--point", flags.point, "x,y,z");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? kOk : kConfigError;
  }

  RunConfig config;
  try {
    config = assemble(flags);
  } catch (const std::exception& e) {
    std::cerr << "pimc: config error: " << e.what() << "\n";
    return kConfigError;
  }
  if (flags.print_config) {
    std::cout << "# config_hash " << config_hash(config) << "\n" << echo_config(config);
    return kOk;
  }

  const Command* chosen = nullptr;
  for (const Command& c : commands) {
    if (app.got_subcommand(c.name)) chosen = &c;
  }

  Report report;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    report = chosen->run(config);
  } catch (const ConfigError& e) {
    std::cerr << "pimc: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NonTerminationError& e) {
    std::cerr << "pimc: non-termination: " << e.what() << "\n";
    return kNonTermination;
  } catch (const std::exception& e) {
    std::cerr << "pimc: " << chosen->name << " failed: " << e.what() << "\n";
    return kNumericFailure;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // Timing goes to stderr so reports stay identical across worker counts.
  std::fprintf(stderr, "# %s wall-clock %.2f s\n", chosen->name, seconds);

  const std::string text = render(report, config.format);
  if (config.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(config.out);
    if (!out) {
      std::cerr << "pimc: cannot write '" << config.out << "'\n";
      return kConfigError;
    }
    out << text;
  }
  return report.passed ? kOk : kCheckFailed;
}
