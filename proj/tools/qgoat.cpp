#include "qgoat/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration file");
  cmd->add_option("--preset", c.preset, "Base settings")
      ->check(CLI::IsMember(qgoat::cli::preset_names()));
  cmd->add_option("--seed", c.seed, "RNG seed (overrides the config)");
  cmd->add_option("--out", c.out, "Output directory");
}

// Layering: preset, then config file, then flags.
qgoat::cli::RunConfig load(const Common& c) {
  qgoat::cli::RunConfig cfg = c.preset.empty() ? qgoat::cli::RunConfig{} : qgoat::cli::preset(c.preset);
  if (!c.config.empty()) cfg = qgoat::cli::load_config(c.config, cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace qgoat::cli;
  CLI::App app{"Pulse optimization for two-transmon entangling gates"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::string> alpha, state;
  std::string schema_dir;

  auto* optimize = app.add_subcommand("optimize", "Optimize pulse parameters and write a run directory");
  auto* propagate = app.add_subcommand("propagate", "Export basis-state populations for a pulse");
  auto* spectrum = app.add_subcommand("spectrum", "Fourier magnitude of a pulse");
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  auto* schema = app.add_subcommand("schema-check", "Validate an artifact directory");
  auto* compare = app.add_subcommand("compare", "Run g0, g1 and g2 side by side");
  for (auto* cmd : {optimize, propagate, spectrum, gradcheck, compare}) add_common(cmd, common);
  for (auto* cmd : {propagate, spectrum})
    cmd->add_option("--alpha", alpha, "summary.json, run directory or comma-separated parameters");
  propagate->add_option("--state", state, "hadamard-control or a basis label such as 01");
  schema->add_option("dir", schema_dir, "Artifact directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  return run_guarded(
      [&]() -> int {
        if (*schema) return cmd_schema_check(schema_dir, std::cout);
        const RunConfig cfg = load(common);
        if (*optimize) return cmd_optimize(cfg, std::cout);
        if (*propagate) return cmd_propagate(cfg, alpha, state, std::cout);
        if (*spectrum) return cmd_spectrum(cfg, alpha, std::cout);
        if (*gradcheck) return cmd_gradcheck(cfg, std::cout);
        return cmd_compare(cfg, std::cout);
      },
      std::cerr);
}
