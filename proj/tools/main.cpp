#include "anisomax/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"anisomax experiment runner"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run one named experiment");
  std::string config_path, experiment, out;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  run->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("--experiment", experiment, "experiment name")
      ->required()
      ->check(CLI::IsMember(anisomax::experiment_names()));
  auto* out_opt = run->add_option("--out", out, "output directory");
  auto* seed_opt = run->add_option("--seed", seed, "RNG seed");
  run->add_option("--override", overrides, "key=value, dotted keys")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    auto cfg = anisomax::load_config(config_path);
    auto j = cfg.resolved;
    for (const auto& o : overrides) anisomax::apply_override(j, o);
    if (*seed_opt) j["seed"] = seed;
    cfg = anisomax::parse_config(j);

    std::string dir = cfg.output_dir;
    if (const char* env = std::getenv("ANISOMAX_OUT_DIR"); env && *env) dir = env;
    if (*out_opt) dir = out;

    auto res = anisomax::run_experiment(cfg, experiment, dir);
    for (const auto& c : res.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    for (const auto& w : res.warnings) std::cout << "warning: " << w << '\n';
    std::cout << "outputs in " << dir << '\n';
    return res.exit_code;
  } catch (const anisomax::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return anisomax::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
