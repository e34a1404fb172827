#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "run.hpp"

int main(int argc, char** argv) {
  using namespace subdiff::cli;
  CLI::App app{"Time-fractional subdiffusion: forward solves, flux-based recovery of q(t), verification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version);

  std::string config;
  std::string out;
  std::size_t threads = 0;
  std::string chosen;
  for (const char* name : {"forward", "inverse", "verify", "selftest"}) {
    const std::string help = std::string(name) == "forward"    ? "solve the forward problem"
                             : std::string(name) == "inverse"  ? "recover q(t) from left-boundary flux data"
                             : std::string(name) == "verify"   ? "compare the spectral solver with the finite-difference oracle"
                                                               : "run the Mittag-Leffler and kernel identity suites";
    auto* sub = app.add_subcommand(name, help);
    auto* opt = sub->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    if (std::string(name) != "selftest") opt->required();
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (default: SUBDIFF_THREADS, then all cores)")
        ->check(CLI::PositiveNumber);
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  RunOptions opt;
  opt.out_dir = out;
  opt.threads = threads;
  std::optional<std::filesystem::path> config_path;
  if (!config.empty()) config_path = config;
  return run(chosen, config_path, opt, std::cout, std::cerr);
}
