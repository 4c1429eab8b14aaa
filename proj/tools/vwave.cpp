#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "vwave/io.hpp"

using namespace vwave::cli;

int main(int argc, char** argv) {
  CLI::App app{"vwave: vortex water waves, point vortex continuation and vortex patches"};
  app.set_version_flag("--version", std::string(vwave::io::version));
  app.require_subcommand(1);

  std::string config_path, resume, suite = "all";
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", sets, "override a configuration key (key=value)");
  };
  CLI::App* cont = app.add_subcommand("continue", "trace a point-vortex branch");
  add_common(cont);
  cont->add_option("--resume", resume, "branch file to resume from")->check(CLI::ExistingFile);
  CLI::App* patch = app.add_subcommand("patch", "solve one vortex patch");
  add_common(patch);
  CLI::App* ver = app.add_subcommand("verify", "run acceptance checks");
  ver->add_option("suite", suite, "radial|dtn|green|jacobian|asymptotics|patch|continuation|all");
  CLI::App* show = app.add_subcommand("config", "print the effective configuration and its hash");
  add_common(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (ver->parsed()) return cmd_verify(suite, std::cout, std::cerr);
    const RunConfig cfg = load_config(config_path, sets);
    cfg.validate();
    if (cont->parsed()) return cmd_continue(cfg, resume, std::cout, std::cerr);
    if (patch->parsed()) return cmd_patch(cfg, std::cout, std::cerr);
    for (const auto& [k, v] : cfg.values()) fmt::print("{} = {}\n", k, v);
    fmt::print("# config_hash {}\n", cfg.hash());
    return kOk;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kFailure;
  }
}
