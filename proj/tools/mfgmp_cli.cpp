#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mfgmp/config.hpp"
#include "mfgmp/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mfgmp: particle solver for mean field games with a major player"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool dump = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory (default: config output)");
  };
  auto* solve = app.add_subcommand("solve", "extragradient solve with report and field snapshots");
  add_common(solve);
  solve->add_flag("--dump-ensemble", dump, "also write every particle path");
  auto* verify = app.add_subcommand("verify", "run the certification battery");
  add_common(verify);
  auto* converge = app.add_subcommand("converge", "per-iteration convergence study");
  add_common(converge);
  auto* sweep = app.add_subcommand("sigma-sweep", "sigma0 x horizon table");
  add_common(sweep);
  auto* oracle = app.add_subcommand("oracle", "Riccati reference for the LQ family");
  add_common(oracle);

  CLI11_PARSE(app, argc, argv);

  try {
    mfgmp::RunConfig cfg = mfgmp::load_config(config_path);
    if (seed) cfg.seed = *seed;
    const std::filesystem::path out = out_dir.empty() ? cfg.output : out_dir;
    if (solve->parsed()) return mfgmp::run_solve(cfg, out, dump);
    if (verify->parsed()) return mfgmp::run_verify(cfg, out);
    if (converge->parsed()) return mfgmp::run_converge(cfg, out);
    if (sweep->parsed()) return mfgmp::run_sigma_sweep(cfg, out);
    if (oracle->parsed()) return mfgmp::run_oracle(cfg, out);
  } catch (const mfgmp::ConfigParseError& e) {
    for (const auto& v : e.violations) std::cerr << "config: " << v << '\n';
    return mfgmp::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mfgmp::kExitError;
  }
  return mfgmp::kExitError;
}
