#pragma once

#include "anisomax/atoms.hpp"
#include "anisomax/decomposition.hpp"
#include "anisomax/field.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace anisomax {

struct RandomAtomSpec {
  int count = 0;
  int tau_lo = 0;
  int tau_hi = 0;
  /// Cube indices uniform in [-extent, extent) on each axis of the tau grid.
  int extent = 4;
  AtomProfile profile = AtomProfile::HaarSplit;
  double lambda_lo = 1.0;
  double lambda_hi = 2.0;
};

struct AtomSpec {
  GridCube cube;
  AtomProfile profile = AtomProfile::HaarSplit;
  double lambda = 1.0;
  std::uint64_t seed = 0;
};

struct KernelSpec {
  double spacing = 0.005;
  std::vector<double> half_extent{1.65, 0.45};
  double r_lo = 0.05;
  double r_hi = 0.5;
  int panels = 300;
  int bins = 12;
};

struct Constants {
  double c_w = 16.0;
  double c_i = 100.0;
  double c_iv = 32.0;
  double c_bound = 64.0;
  double c_weak = 100.0;
};

struct ExperimentConfig {
  nlohmann::json resolved;  ///< every key, defaults filled in

  Mat matrix;
  std::string surface = "circle-arc";
  double cutoff = 0.0;  ///< 0 picks the catalog default
  double epsilon = 0.25;
  double zeta = 0.25 / 8;
  double alpha = 1.0;
  std::uint64_t seed = 1;

  std::vector<AtomSpec> atom_list;
  RandomAtomSpec random_atoms;

  int instances = 0;  ///< 0 runs the configured atoms once
  int mutations = 0;
  RandomCubeSpec cubes;

  std::vector<int> lattice_dims{512, 512};
  KRange k_range{-4, 2};
  std::vector<int> s_values;
  std::vector<int> scales{0, -2, -4, -6};
  int pipeline_s = 2;
  int support_per_axis = 4000;
  Constants constants;
  KernelSpec kernel;
  std::string output_dir = "anisomax-out";
};

/// Defaults, as JSON.
nlohmann::json default_config();
/// Merges j over the defaults; unknown keys and bad values throw ConfigInvalid.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
/// "a.b.c=value"; value parsed as JSON, else kept as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<CheckResult> checks;
  std::vector<std::string> warnings;
  std::vector<std::string> files;  ///< written, relative to the output directory
  /// Headline numbers for callers (and the summary).
  std::vector<std::pair<std::string, double>> metrics;
  int exit_code = 0;

  bool pass() const;
  double metric(const std::string& key) const;
};

const std::vector<std::string>& experiment_names();

/// Runs one experiment, writing manifest.json, CSVs and summary.txt into
/// out_dir. Module errors propagate; see exit_code_for.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& experiment,
                                const std::string& out_dir);

/// 2 for configuration problems, 3 for budgets, 1 otherwise.
int exit_code_for(const Error& e);

/// Atoms from the list, or from the random generator when the list is empty.
AtomicSum build_atoms(const DilationStructure& D, const ExperimentConfig& cfg, std::uint64_t seed);
AtomicSum random_atoms(const DilationStructure& D, const RandomAtomSpec& spec, std::uint64_t seed);

}  // namespace anisomax
