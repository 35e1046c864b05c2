#include "anisomax/experiment.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace anisomax;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("anisomax_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool throws_config(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.code() == ErrorCode::ConfigInvalid;
  }
  return false;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  auto c = parse_config(json::object());
  CHECK(c.matrix(1, 1) == 4.0);
  CHECK(c.zeta == doctest::Approx(c.epsilon / 8));
  CHECK(c.resolved["zeta"].get<double>() == doctest::Approx(c.epsilon / 8));
  CHECK(c.s_values.front() == 4);
  CHECK(c.s_values.back() == 16);

  CHECK(throws_config({{"nonsense", 1}}));
  CHECK(throws_config({{"suite", {{"cubez", 1}}}}));
  CHECK(throws_config({{"matrix", {{1, 0}, {0, 4}}}}));
  CHECK(throws_config({{"matrix", {{2, 0, 0}, {0, 4, 0}}}}));
  CHECK(throws_config({{"surface", {{"id", "torus"}}}}));
  CHECK(throws_config({{"lattice", {{"dims", {512}}}}}));
  CHECK(throws_config({{"k_range", {3, 1}}}));
  CHECK(throws_config({{"atoms", {{"list", {{{"index", {0, 0}}, {"profile", "wavelet"}}}}}}}));
  CHECK(throws_config({{"suite", {{"instances", 2}, {"mutations", 3}}}}));

  json j = default_config();
  apply_override(j, "surface.id=quartic-flat");
  apply_override(j, "k_range=[-2,2]");
  apply_override(j, "alpha=3");
  auto o = parse_config(j);
  CHECK(o.surface == "quartic-flat");
  CHECK(o.k_range.lo == -2);
  CHECK(o.alpha == 3.0);
  CHECK_THROWS_AS(apply_override(j, "bogus.key=1"), Error);
  apply_override(j, "bogus=1");
  CHECK(throws_config(j));
  CHECK_THROWS_AS(apply_override(j, "novalue"), Error);
}

TEST_CASE("exit codes by error kind") {
  CHECK(exit_code_for(Error(ErrorCode::ConfigInvalid, "")) == 2);
  CHECK(exit_code_for(Error(ErrorCode::ResolutionTooCoarse, "")) == 2);
  CHECK(exit_code_for(Error(ErrorCode::BudgetExceeded, "")) == 3);
  CHECK(exit_code_for(Error(ErrorCode::NumericalFailure, "")) == 1);
  auto c = parse_config(json::object());
  CHECK_THROWS_AS(run_experiment(c, "no-such-thing", scratch("bad").string()), Error);
}

TEST_CASE("validate-dilation lists the spectral data") {
  auto c = parse_config(json::object());
  auto dir = scratch("dilation");
  auto r = run_experiment(c, "validate-dilation", dir.string());
  CHECK(r.exit_code == 0);
  CHECK(slurp(dir / "summary.txt").find("a=8 r=2 n=1 norm_power=1") != std::string::npos);
  CHECK(r.metric("diameter_exponent") == doctest::Approx(0.0).epsilon(0.2));
  auto m = json::parse(slurp(dir / "manifest.json"));
  CHECK(m["seed"] == 1);
  CHECK(m["constants"].contains("threshold_count"));
  CHECK(m["config"]["matrix"][1][1] == 4);
}

TEST_CASE("whitney on an empty atom list") {
  auto c = parse_config({{"atoms", {{"list", json::array()}, {"random", {{"count", 0}}}}}});
  auto dir = scratch("empty");
  auto r = run_experiment(c, "whitney", dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.metric("selected") == 0);
  CHECK(slurp(dir / "whitney.csv") == "instance,sigma,tau,index,members,lambda_sum\n");
}

TEST_CASE("atom lists and generators") {
  auto c = parse_config({{"atoms", {{"list", {{{"tau", -1}, {"index", {2, 3}}, {"lambda", 2.5}}}}}}});
  auto D = validate_dilation(c.matrix);
  auto f = build_atoms(D, c, 1);
  REQUIRE(f.terms.size() == 1);
  CHECK(f.terms[0].atom.support == GridCube{0, -1, {2, 3}});
  CHECK(f.terms[0].lambda == 2.5);
  RandomAtomSpec spec;
  spec.count = 30;
  spec.tau_lo = -2;
  spec.tau_hi = 0;
  auto a = random_atoms(D, spec, 9), b = random_atoms(D, spec, 9);
  REQUIRE(a.terms.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(a.terms[i].atom.support == b.terms[i].atom.support);
    CHECK(a.terms[i].lambda == b.terms[i].lambda);
    CHECK(a.terms[i].atom.support.tau >= -2);
    CHECK(a.terms[i].atom.support.tau <= 0);
  }
}

TEST_CASE("seeded runs write identical bytes") {
  auto c = parse_config({{"suite", {{"instances", 5}, {"mutations", 2}, {"cubes", {{"count", 15}}}}}});
  for (const char* exp : {"whitney", "stopping"}) {
    auto d1 = scratch(std::string(exp) + "1"), d2 = scratch(std::string(exp) + "2");
    auto r1 = run_experiment(c, exp, d1.string());
    auto r2 = run_experiment(c, exp, d2.string());
    CHECK(r1.exit_code == 0);
    for (const auto& f : r1.files)
      if (f != "summary.txt") CHECK_MESSAGE(slurp(d1 / f) == slurp(d2 / f), f);
  }
  auto other = parse_config({{"seed", 2}, {"suite", {{"instances", 5}, {"cubes", {{"count", 15}}}}}});
  auto d3 = scratch("whitney3");
  run_experiment(other, "whitney", d3.string());
  CHECK(slurp(d3 / "whitney.csv") != slurp(fs::temp_directory_path() / "anisomax_test_whitney1" / "whitney.csv"));
}

TEST_CASE("small full pipeline") {
  auto c = parse_config({{"alpha", 2.0},
                         {"k_range", {-3, 0}},
                         {"lattice", {{"dims", {160, 160}}}},
                         {"atoms", {{"random", {{"count", 5}, {"extent", 2}}}}}});
  auto dir = scratch("pipeline");
  auto r = run_experiment(c, "full-pipeline", dir.string());
  for (const auto& ch : r.checks) CHECK_MESSAGE(ch.pass, std::string(ch.name + ": " + ch.detail));
  for (const char* f : {"e_volume.csv", "kappa_hist.csv", "pipeline_weak.csv", "pieces.csv", "distribution.csv",
                        "maximal.amxf", "manifest.json", "summary.txt"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(r.metric("weak_ratio_outside_E") <= r.metric("weak_ratio"));
  CHECK(r.metric("piece_split_error") < 1e-3);
}

#ifdef ANISOMAX_CLI
TEST_CASE("command line runner") {
  const std::string cli = ANISOMAX_CLI;
  const std::string cfg = std::string(ANISOMAX_CONFIG_DIR) + "/empty.json";
  auto out = scratch("cli");
  auto rc = [](const std::string& cmd) {
    int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(rc(cli + " run --config " + cfg + " --experiment whitney --out " + out.string()) == 0);
  CHECK(fs::exists(out / "whitney.csv"));
  CHECK(rc(cli + " run --config " + cfg + " --experiment whitney --override matrix=[[1,0],[0,1]] --out " +
           out.string()) == 2);
  CHECK(rc(cli + " run --config " + cfg + " --experiment bogus") == 2);
  CHECK(rc(cli + " run --config /nonexistent.json --experiment whitney") == 2);

  auto env = scratch("cli_env");
  CHECK(rc("ANISOMAX_OUT_DIR=" + env.string() + " " + cli + " run --config " + cfg +
           " --experiment validate-dilation --seed 9") == 0);
  CHECK(json::parse(slurp(env / "manifest.json"))["seed"] == 9);

  // A lattice too coarse for the atoms is a configuration error.
  CHECK(rc(cli + " run --config " + cfg + " --experiment full-pipeline --override lattice.dims=[8,8]" +
           " --override atoms.random.count=3 --out " + out.string()) == 2);
  // Quartic classification with a tiny s range fails its eta assertion with exit 1.
  CHECK(rc(cli + " run --config " + cfg + " --experiment surface-classify --override surface.id=quartic-flat" +
           " --override s_range=[4,5] --out " + out.string()) == 1);
}
#endif
