#include "doctest.h"

#include "anisomax/decomposition.hpp"

#include <cmath>
#include <random>

using namespace anisomax;

namespace {

DilationStructure diag24() {
  Mat m(2, 2);
  m << 2, 0, 0, 4;
  return validate_dilation(m);
}

GridCube cube(int tau, std::int64_t i, std::int64_t j) { return {0, tau, {i, j}}; }

std::vector<Vec> arc(int n, double shift = 0.0) {
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i) {
    const double y = -0.8 + 1.6 * (i + shift) / (n - 1);
    pts.push_back(Vec{{y, 1 - std::sqrt(1 - y * y)}});
  }
  return pts;
}

std::shared_ptr<const SupportSample> arc_sample() {
  // consecutive points are at most 1.6/(n-1) * sqrt(1 + (4/3)^2) apart
  const int n = 4000;
  return std::make_shared<SupportSample>(arc(n), 0.5 * 1.6 / (n - 1) * (5.0 / 3.0));
}

std::vector<WeightedCube> covered(const std::vector<WeightedCube>& Q, const WhitneyResult& W) {
  std::vector<WeightedCube> out;
  for (std::size_t j = 0; j < Q.size(); ++j)
    if (W.assigned[j] >= 0) out.push_back(Q[j]);
  return out;
}

bool hard_checks_pass(const VerifyReport& r) {
  for (const char* n : {"partition", "i", "ii", "iii", "iv", "lambda_bookkeeping", "stopping_ancestors"})
    if (!r.find(n) || !r.find(n)->pass) return false;
  return true;
}

}  // namespace

TEST_CASE("overlap_volume") {
  auto D = diag24();
  CHECK(overlap_volume(realize(D, cube(0, 0, 0)), realize(D, cube(-1, 1, 2))) == doctest::Approx(1.0 / 8));
  CHECK(overlap_volume(realize(D, cube(0, 0, 0)), realize(D, cube(0, 1, 0))) == 0.0);
  Parallelepiped a{Vec{{0, 0}}, Mat::Identity(2, 2)};
  Parallelepiped b{Vec{{0.5, 0.25}}, Mat::Identity(2, 2)};
  CHECK(overlap_volume(a, b) == doctest::Approx(0.5 * 0.75));
  Mat shear(2, 2);
  shear << 1, 1, 0, 1;
  Parallelepiped c{Vec{{-0.5, 0}}, shear};
  // c covers the triangle-cut unit square: {0 <= y <= 1, y - 0.5 <= x <= y + 0.5}
  CHECK(overlap_volume(a, c) == doctest::Approx(1.0 - 2 * 0.125));
}

TEST_CASE("whitney: single cube with lambda = 2 alpha |Q|") {
  auto D = diag24();
  const double alpha = 1.0;
  std::vector<WeightedCube> Q{{cube(-2, 3, 5), 2 * alpha / 64}};
  auto W = whitney_decompose(D, Q, alpha);
  REQUIRE(W.selected.size() == 1);
  CHECK(W.selected[0] == Q[0].cube);
  CHECK(verify_whitney(D, W, Q, alpha).pass());
  // The tau-parent would have |S| = 8|Q| > alpha^{-1} sum lambda = 2|Q|.
  WhitneyResult parent = W;
  parent.selected[0] = tau_parent(D, Q[0].cube);
  CHECK_FALSE(verify_whitney(D, parent, Q, alpha).find("condition_2")->pass);
}

TEST_CASE("whitney: sparse small cubes select nothing") {
  auto D = diag24();
  std::vector<WeightedCube> Q;
  for (int k = 0; k < 10; ++k) Q.push_back({cube(-1, 7 * k, -5 * k), 1e-3 / 8});
  auto W = whitney_decompose(D, Q, 1.0);
  CHECK(W.selected.empty());
  CHECK(W.leftover.size() == Q.size());
  auto rep = verify_whitney(D, W, Q, 1.0);
  CHECK(rep.pass());
  CHECK(rep.find("condition_3")->worst_ratio == doctest::Approx(1e-3));
}

TEST_CASE("whitney: two identical cubes") {
  auto D = diag24();
  const double alpha = 2.0;
  std::vector<WeightedCube> Q{{cube(-1, 2, 2), alpha / 8}, {cube(-1, 2, 2), alpha / 8}};
  auto W = whitney_decompose(D, Q, alpha);
  REQUIRE(W.selected.size() == 1);
  CHECK(W.assigned[0] == 0);
  CHECK(W.assigned[1] == 0);
  CHECK(std::pow(8.0, W.selected[0].tau) <= 2.0 / 8 + 1e-15);
  CHECK(verify_whitney(D, W, Q, alpha).pass());
}

TEST_CASE("whitney: hand-built violation and empty input") {
  auto D = diag24();
  std::vector<WeightedCube> Q{{cube(0, 0, 0), 100.0}};
  WhitneyResult bad;
  bad.selected = {cube(0, 0, 0)};
  bad.assigned = {0};
  auto rep = verify_whitney(D, bad, Q, 1.0);
  CHECK_FALSE(rep.find("condition_1")->pass);
  CHECK(rep.find("condition_1")->witness == to_string(cube(0, 0, 0)));

  std::vector<WeightedCube> none;
  auto W = whitney_decompose(D, none, 1.0);
  CHECK(W.selected.empty());
  CHECK(verify_whitney(D, W, none, 1.0).pass());
}

TEST_CASE("whitney: randomized instances satisfy all conditions") {
  auto D = diag24();
  for (int inst = 0; inst < 40; ++inst) {
    RandomCubeSpec spec;
    spec.seed = 500 + inst;
    spec.count = 1 + (inst * 7) % 50;
    auto Q = random_weighted_cubes(D, spec);
    auto W = whitney_decompose(D, Q, 1.0);
    auto rep = verify_whitney(D, W, Q, 1.0);
    INFO(rep.to_string());
    CHECK(rep.pass());
  }
}

TEST_CASE("stopping: no selection when alpha is huge") {
  auto D = diag24();
  std::vector<WeightedCube> Q{{cube(-1, 0, 0), 1.0}, {cube(-2, 1, 1), 2.0}};
  std::vector<GridCube> S{cube(0, 0, 0)};
  const double alpha = 1e6 * 3.0;
  auto R = stopping_time(D, S, Q, alpha);
  for (const auto& e : R.trace) CHECK(e.kind != TraceEvent::Kind::Select);
  CHECK(R.selected.empty());
  for (std::size_t j = 0; j < Q.size(); ++j) {
    CHECK(R.classification[j] == QClass::C2);
    CHECK(R.kappa[j] == 1);
  }
  CHECK(R.in_exceptional(Vec{{-1.4, -1.4}}));
  CHECK_FALSE(R.in_exceptional(Vec{{-1.6, 0.5}}));
}

TEST_CASE("stopping: a single heavy cube is selected at the first step") {
  auto D = diag24();
  std::vector<WeightedCube> Q{{cube(-2, 1, 1), 1000.0}};
  std::vector<GridCube> S{cube(-2, 1, 1)};
  auto R = stopping_time(D, S, Q, 1.0);
  CHECK(R.tau0 == 4);  // smallest tau0 > -2 with 8^tau0 > 1000
  REQUIRE(!R.trace.empty());
  const auto& e = R.trace.front();
  CHECK(e.kind == TraceEvent::Kind::Select);
  CHECK(e.sigma == 0);
  CHECK(e.tau == 3);
  CHECK(R.classification[0] == QClass::C1);
  CHECK(R.kappa[0] == R.tau0);
}

TEST_CASE("stopping: repair pass lifts kappa above tau(S)") {
  auto D = diag24();
  std::vector<WeightedCube> Q{{cube(0, 0, 0), 2.0}};
  std::vector<GridCube> S{locate(D, 0, 2, Vec{{0.5, 0.5}})};
  REQUIRE(contains(expand_cube(D, S[0], 2), realize(D, Q[0].cube)));
  auto R = stopping_time(D, S, Q, 1.0);
  CHECK(R.classification[0] == QClass::C1);
  CHECK(R.kappa[0] == 3);
  bool repaired = false;
  for (const auto& e : R.trace)
    if (e.kind == TraceEvent::Kind::Repair) repaired = e.kappa_before == 1 && e.kappa_after == 3;
  CHECK(repaired);
}

TEST_CASE("stopping: input cube outside every S* is rejected") {
  auto D = diag24();
  std::vector<WeightedCube> Q{{cube(0, 10, 10), 1.0}};
  std::vector<GridCube> S{cube(0, 0, 0)};
  CHECK_THROWS_AS(stopping_time(D, S, Q, 1.0), Error);
}

TEST_CASE("stopping: randomized instances pass (i)-(iv)") {
  auto D = diag24();
  auto sample = arc_sample();
  auto fresh = arc(997, 0.37);
  for (int inst = 0; inst < 15; ++inst) {
    RandomCubeSpec spec;
    spec.seed = 900 + inst;
    spec.count = 5 + 3 * inst;
    auto Q = random_weighted_cubes(D, spec);
    auto W = whitney_decompose(D, Q, 1.0);
    auto inQ = covered(Q, W);
    auto R = stopping_time(D, W.selected, inQ, 1.0, {}, sample);
    StoppingCheckOptions opt;
    opt.support = fresh;
    opt.volume_samples = 10000;
    auto rep = verify_stopping(D, R, W.selected, inQ, 1.0, opt);
    INFO(rep.to_string());
    CHECK(hard_checks_pass(rep));
  }
}

TEST_CASE("stopping: perturbed kappa is rejected") {
  auto D = diag24();
  auto sample = arc_sample();
  auto fresh = arc(997, 0.37);
  int lowered = 0, raised = 0, tried = 0;
  for (int inst = 0; tried < 6; ++inst) {
    RandomCubeSpec spec;
    spec.seed = 1000 + inst;
    spec.count = 20;
    auto Q = random_weighted_cubes(D, spec);
    auto W = whitney_decompose(D, Q, 1.0);
    auto inQ = covered(Q, W);
    if (inQ.empty()) continue;
    ++tried;
    auto R = stopping_time(D, W.selected, inQ, 1.0, {}, sample);
    std::size_t big = 0;
    for (std::size_t j = 0; j < inQ.size(); ++j)
      if (inQ[j].lambda > inQ[big].lambda) big = j;
    StoppingCheckOptions opt;
    opt.support = fresh;
    opt.check_i = false;

    auto down = R;
    down.kappa[big] -= 5;
    auto rd = verify_stopping(D, down, W.selected, inQ, 1.0, opt);
    lowered += !rd.find("iii")->pass || !rd.find("iv")->pass;

    auto up = R;
    up.kappa[big] += 5;
    raised += !verify_stopping(D, up, W.selected, inQ, 1.0, opt).find("ii")->pass;
  }
  CHECK(lowered == tried);
  CHECK(raised == tried);
}

TEST_CASE("stopping: empty input") {
  auto D = diag24();
  std::vector<GridCube> S{cube(0, 0, 0), cube(1, 3, 3)};
  std::vector<WeightedCube> none;
  auto R = stopping_time(D, S, none, 1.0);
  CHECK(R.quadruples.size() == 2);
  CHECK(R.tendrils.empty());
  StoppingCheckOptions opt;
  auto fresh = arc(50);
  opt.support = fresh;
  CHECK(hard_checks_pass(verify_stopping(D, R, S, none, 1.0, opt)));
}

TEST_CASE("stopping: deterministic traces") {
  auto D = diag24();
  RandomCubeSpec spec;
  spec.seed = 77;
  auto Q = random_weighted_cubes(D, spec);
  auto W = whitney_decompose(D, Q, 1.0);
  auto inQ = covered(Q, W);
  auto a = stopping_time(D, W.selected, inQ, 1.0);
  auto b = stopping_time(D, W.selected, inQ, 1.0);
  CHECK(!a.trace.empty());
  CHECK(a.trace_text() == b.trace_text());
  CHECK(a.kappa == b.kappa);
}

TEST_CASE("stopping: scaling covariance") {
  auto D = diag24();
  std::mt19937_64 rng(4);
  for (int inst = 0; inst < 10; ++inst) {
    RandomCubeSpec spec;
    spec.seed = 300 + inst;
    spec.count = 15;
    auto Q = random_weighted_cubes(D, spec);
    auto W = whitney_decompose(D, Q, 1.0);
    auto inQ = covered(Q, W);
    auto R = stopping_time(D, W.selected, inQ, 1.0);

    auto S2 = W.selected;
    for (auto& s : S2) s.tau += 1;
    auto Q2 = inQ;
    for (auto& q : Q2) q.cube.tau += 1;
    auto R2 = stopping_time(D, S2, Q2, 1.0 / D.det_scale);

    REQUIRE(R2.kappa.size() == R.kappa.size());
    for (std::size_t j = 0; j < R.kappa.size(); ++j) CHECK(R2.kappa[j] == R.kappa[j] + 1);
    REQUIRE(R2.selected.size() == R.selected.size());
    for (std::size_t k = 0; k < R.selected.size(); ++k) {
      auto s = R.selected[k];
      s.tau += 1;
      CHECK(R2.selected[k] == s);
    }
    if (R.quadruples.empty()) continue;
    Box box = R.bounding_box();
    std::uniform_real_distribution<double> u(0, 1);
    int mismatches = 0;
    for (int s = 0; s < 2000; ++s) {
      Vec x = box.lo + (box.hi - box.lo).cwiseProduct(Vec{{u(rng), u(rng)}});
      mismatches += R.in_exceptional(x) != R2.in_exceptional(D.matrix * x);
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("support tendril lies between q** and the ball outer bound") {
  auto D = diag24();
  auto sample = arc_sample();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto c : {GridCube{0, 0, {0, 0}}, GridCube{-3, -1, {5, -2}}, GridCube{-1, 2, {-1, 1}}}) {
    auto t = support_tendril_of(D, c, sample);
    Box box = t.bounding_box();
    for (int s = 0; s < 3000; ++s) {
      Vec x = box.lo + (box.hi - box.lo).cwiseProduct(Vec{{u(rng), u(rng)}});
      if (t.bound.core.contains(x)) CHECK(t.contains(x));
      if (t.contains(x)) CHECK(t.bound.contains(x));
    }
    // q* + A^k (arc) for k <= tau + 2 is inside.
    auto qs = expand_cube(D, c, 2);
    auto pts = arc(301, 0.5);
    for (int s = 0; s < 500; ++s) {
      const int k = c.tau + 2 - static_cast<int>(u(rng) * 12);
      Vec x = qs.origin + qs.edges * Vec{{u(rng), u(rng)}} + D.power(k) * pts[s % 300];
      CHECK(t.contains(x));
    }
  }
}
