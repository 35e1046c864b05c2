#include "anisomax/experiment.hpp"
#include "anisomax/surface.hpp"

#include <fstream>
#include <sstream>

namespace anisomax {

using nlohmann::json;

json default_config() {
  return json::parse(R"({
    "matrix": [[2, 0], [0, 4]],
    "surface": {"id": "circle-arc", "cutoff": 0},
    "epsilon": 0.25,
    "zeta": null,
    "alpha": 1.0,
    "seed": 1,
    "atoms": {
      "list": [],
      "random": {"count": 12, "tau_lo": -1, "tau_hi": 0, "extent": 4, "profile": "haar",
                 "lambda_lo": 1.0, "lambda_hi": 2.0}
    },
    "suite": {
      "instances": 0,
      "mutations": 0,
      "cubes": {"count": 50, "tau_lo": -6, "tau_hi": 0, "extent": 4.0, "density_lo": 0.05, "density_hi": 20.0}
    },
    "lattice": {"dims": [512, 512]},
    "k_range": [-4, 2],
    "s_range": [4, 16],
    "scales": [0, -2, -4, -6],
    "pipeline": {"s": 2},
    "support_per_axis": 4000,
    "constants": {"C_W": 16, "C": 100, "C_iv": 32, "C_bound": 64, "C_weak": 100},
    "kernel": {"spacing": 0.005, "half_extent": [1.65, 0.45], "r_lo": 0.05, "r_hi": 0.5, "panels": 300, "bins": 12},
    "output_dir": "anisomax-out"
  })");
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

void merge(json& base, const json& over, const std::string& path) {
  if (!over.is_object()) bad(path.empty() ? "config must be an object" : path + " must be an object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) bad("unknown key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad("bad value for '" + path + key + "'");
  }
}

KRange range_of(const json& j, const char* key) {
  auto v = get<std::vector<int>>(j, key, "");
  if (v.size() != 2 || v[0] > v[1]) bad(std::string(key) + " must be [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

AtomProfile profile_of(const std::string& s) {
  try {
    return parse_profile(s);
  } catch (const Error& e) {
    bad(e.what());
  }
}

}  // namespace

void apply_override(json& j, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) bad("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* slot = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!slot->is_object()) bad("override path '" + key + "' crosses a non-object");
    if (i + 1 == parts.size()) {
      (*slot)[parts[i]] = value;
    } else {
      slot = &(*slot)[parts[i]];
    }
  }
}

ExperimentConfig parse_config(const json& user) {
  ExperimentConfig c;
  json j = default_config();
  merge(j, user, "");

  auto rows = get<std::vector<std::vector<double>>>(j, "matrix", "");
  const int d = static_cast<int>(rows.size());
  if (d < 1) bad("matrix is empty");
  c.matrix.resize(d, d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[i].size()) != d) bad("matrix must be square");
    for (int k = 0; k < d; ++k) c.matrix(i, k) = rows[i][k];
  }
  try {
    validate_dilation(c.matrix);
  } catch (const Error& e) {
    bad(std::string("matrix: ") + e.what());
  }

  const json& surf = j["surface"];
  c.surface = get<std::string>(surf, "id", "surface.");
  c.cutoff = get<double>(surf, "cutoff", "surface.");
  try {
    GraphSurface::from_name(c.surface, d, c.cutoff);
  } catch (const Error& e) {
    bad(std::string("surface: ") + e.what());
  }

  c.epsilon = get<double>(j, "epsilon", "");
  c.zeta = j["zeta"].is_null() ? c.epsilon / 8 : get<double>(j, "zeta", "");
  j["zeta"] = c.zeta;
  c.alpha = get<double>(j, "alpha", "");
  if (!(c.epsilon > 0) || !(c.zeta > 0) || !(c.alpha > 0)) bad("epsilon, zeta and alpha must be positive");
  c.seed = get<std::uint64_t>(j, "seed", "");

  const json& atoms = j["atoms"];
  if (!atoms["list"].is_array()) bad("atoms.list must be an array");
  for (const auto& a : atoms["list"]) {
    if (!a.is_object()) bad("atoms.list entries must be objects");
    for (auto it = a.begin(); it != a.end(); ++it)
      if (it.key() != "tau" && it.key() != "index" && it.key() != "profile" && it.key() != "lambda" &&
          it.key() != "seed")
        bad("unknown key 'atoms.list[]." + it.key() + "'");
    AtomSpec s;
    s.cube.sigma = 0;
    s.cube.tau = a.value("tau", 0);
    s.cube.index = a.at("index").get<std::vector<std::int64_t>>();
    if (static_cast<int>(s.cube.index.size()) != d) bad("atom index dimension differs from the matrix");
    s.profile = profile_of(a.value("profile", std::string("haar")));
    s.lambda = a.value("lambda", 1.0);
    s.seed = a.value("seed", std::uint64_t{0});
    if (!(s.lambda > 0)) bad("atom lambda must be positive");
    c.atom_list.push_back(s);
  }
  const json& ra = atoms["random"];
  c.random_atoms.count = get<int>(ra, "count", "atoms.random.");
  c.random_atoms.tau_lo = get<int>(ra, "tau_lo", "atoms.random.");
  c.random_atoms.tau_hi = get<int>(ra, "tau_hi", "atoms.random.");
  c.random_atoms.extent = get<int>(ra, "extent", "atoms.random.");
  c.random_atoms.profile = profile_of(get<std::string>(ra, "profile", "atoms.random."));
  c.random_atoms.lambda_lo = get<double>(ra, "lambda_lo", "atoms.random.");
  c.random_atoms.lambda_hi = get<double>(ra, "lambda_hi", "atoms.random.");
  if (c.random_atoms.count < 0 || c.random_atoms.tau_lo > c.random_atoms.tau_hi || c.random_atoms.extent < 1 ||
      !(c.random_atoms.lambda_lo > 0) || c.random_atoms.lambda_lo > c.random_atoms.lambda_hi)
    bad("atoms.random: need count >= 0, tau_lo <= tau_hi, extent >= 1, 0 < lambda_lo <= lambda_hi");

  const json& suite = j["suite"];
  c.instances = get<int>(suite, "instances", "suite.");
  c.mutations = get<int>(suite, "mutations", "suite.");
  const json& cubes = suite["cubes"];
  c.cubes.count = get<int>(cubes, "count", "suite.cubes.");
  c.cubes.tau_lo = get<int>(cubes, "tau_lo", "suite.cubes.");
  c.cubes.tau_hi = get<int>(cubes, "tau_hi", "suite.cubes.");
  c.cubes.extent = get<double>(cubes, "extent", "suite.cubes.");
  c.cubes.density_lo = get<double>(cubes, "density_lo", "suite.cubes.");
  c.cubes.density_hi = get<double>(cubes, "density_hi", "suite.cubes.");
  c.cubes.alpha = c.alpha;
  if (c.instances < 0 || c.mutations < 0 || c.mutations > c.instances || c.cubes.count < 0 ||
      c.cubes.tau_lo > c.cubes.tau_hi || !(c.cubes.extent > 0) || !(c.cubes.density_lo > 0) ||
      c.cubes.density_lo > c.cubes.density_hi)
    bad("suite: need 0 <= mutations <= instances and a valid cube generator");

  c.lattice_dims = get<std::vector<int>>(j["lattice"], "dims", "lattice.");
  if (static_cast<int>(c.lattice_dims.size()) != d) bad("lattice.dims must have one entry per dimension");
  double cells = 1;
  for (int n : c.lattice_dims) {
    if (n < 8) bad("lattice.dims entries must be >= 8");
    cells *= n;
  }
  if (cells > 1e8) bad("lattice has more than 1e8 cells");

  c.k_range = range_of(j, "k_range");
  KRange s = range_of(j, "s_range");
  if (s.lo < 0) bad("s_range must be non-negative");
  c.s_values.clear();
  for (int v = s.lo; v <= s.hi; ++v) c.s_values.push_back(v);
  c.scales = get<std::vector<int>>(j, "scales", "");
  if (c.scales.empty()) bad("scales is empty");
  c.pipeline_s = get<int>(j["pipeline"], "s", "pipeline.");
  if (c.pipeline_s < 0) bad("pipeline.s must be non-negative");
  c.support_per_axis = get<int>(j, "support_per_axis", "");
  if (c.support_per_axis < 2) bad("support_per_axis must be >= 2");

  const json& k = j["constants"];
  c.constants.c_w = get<double>(k, "C_W", "constants.");
  c.constants.c_i = get<double>(k, "C", "constants.");
  c.constants.c_iv = get<double>(k, "C_iv", "constants.");
  c.constants.c_bound = get<double>(k, "C_bound", "constants.");
  c.constants.c_weak = get<double>(k, "C_weak", "constants.");

  const json& kr = j["kernel"];
  c.kernel.spacing = get<double>(kr, "spacing", "kernel.");
  c.kernel.half_extent = get<std::vector<double>>(kr, "half_extent", "kernel.");
  c.kernel.r_lo = get<double>(kr, "r_lo", "kernel.");
  c.kernel.r_hi = get<double>(kr, "r_hi", "kernel.");
  c.kernel.panels = get<int>(kr, "panels", "kernel.");
  c.kernel.bins = get<int>(kr, "bins", "kernel.");
  if (static_cast<int>(c.kernel.half_extent.size()) != d) bad("kernel.half_extent must have one entry per dimension");
  if (!(c.kernel.spacing > 0) || !(c.kernel.r_lo > 0) || c.kernel.r_lo >= c.kernel.r_hi || c.kernel.panels < 1 ||
      c.kernel.bins < 2)
    bad("kernel: need spacing > 0, 0 < r_lo < r_hi, panels >= 1, bins >= 2");

  c.output_dir = get<std::string>(j, "output_dir", "");
  c.resolved = j;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    bad("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace anisomax
