#include "doctest.h"

#include "anisomax/atoms.hpp"

#include <cmath>
#include <random>

using namespace anisomax;

namespace {

DilationStructure diag24() {
  Mat m(2, 2);
  m << 2, 0, 0, 4;
  return validate_dilation(m);
}

DilationStructure jordan() {
  Mat m(2, 2);
  m << 2, 1, 0, 2;
  return validate_dilation(m);
}

GridCube cube(int tau, std::int64_t i, std::int64_t j) { return {0, tau, {i, j}}; }

}  // namespace

TEST_CASE("gauss_legendre integrates polynomials exactly") {
  auto rule = gauss_legendre(6, 0.0, 2.0);
  for (int k = 0; k <= 11; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], k);
    CHECK(s == doctest::Approx(std::pow(2.0, k + 1) / (k + 1)).epsilon(1e-12));
  }
}

TEST_CASE("make_atom haar on the unit cube") {
  auto D = diag24();
  auto a = make_atom(D, cube(0, 0, 0), AtomProfile::HaarSplit, 0);
  CHECK(a.axis == 0);
  CHECK(a(Vec{{0.25, 0.25}}) == 1.0);
  CHECK(a(Vec{{0.25, 0.99}}) == 1.0);
  CHECK(a(Vec{{0.75, 0.25}}) == -1.0);
  CHECK(a(Vec{{1.0, 0.25}}) == 0.0);
  CHECK(a(Vec{{-0.01, 0.5}}) == 0.0);
  CHECK_THROWS_AS(make_atom(D, GridCube{-1, 0, {0, 0}}, AtomProfile::HaarSplit), Error);
}

TEST_CASE("amplitude is a^{-tau}") {
  auto D = diag24();
  auto a = make_atom(D, cube(-2, 1, -3), AtomProfile::HaarSplit);
  CHECK(a.amplitude == doctest::Approx(64.0));
  auto b = make_atom(D, cube(1, 0, 0), AtomProfile::TensorBump, 3);
  CHECK(b.amplitude == doctest::Approx(1.0 / 8.0));
  CHECK(b.sign == -1.0);
  CHECK(b.axis == 1);
}

TEST_CASE("atoms have zero integral, l1 norm at most one and the sup bound") {
  auto J = jordan();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> idx(-5, 5);
  for (int trial = 0; trial < 20; ++trial) {
    for (auto profile : {AtomProfile::HaarSplit, AtomProfile::TensorBump}) {
      auto a = make_atom(J, cube(idx(rng) / 2, idx(rng), idx(rng)), profile, static_cast<std::uint64_t>(trial));
      auto r = integrate(a);
      CHECK(std::abs(r.integral) <= 1e-8 * r.l1);
      CHECK(r.l1 <= 1.0 + 1e-12);
      if (profile == AtomProfile::HaarSplit) CHECK(r.l1 == doctest::Approx(1.0));
      // The bump peaks exactly at amplitude.
      Vec u = Vec::Constant(2, 0.5);
      u(a.axis) = 0.25;
      CHECK(std::abs(a.at_unit(u)) == doctest::Approx(a.amplitude));
      std::uniform_real_distribution<double> un(0, 1);
      for (int s = 0; s < 200; ++s) {
        Vec x = a.region.origin + a.region.edges * Vec{{un(rng), un(rng)}};
        CHECK(std::abs(a(x)) <= a.amplitude * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("eval_atomic_sum") {
  auto D = diag24();
  AtomicSum f{&D, {{make_atom(D, cube(0, 0, 0), AtomProfile::HaarSplit), 2.5}}};
  CHECK(eval_atomic_sum(f, Vec{{0.25, 0.25}}) == 2.5);
  CHECK(eval_atomic_sum(f, Vec{{5.0, 5.0}}) == 0.0);

  auto a = make_atom(D, cube(0, 0, 0), AtomProfile::HaarSplit, 0);
  auto b = make_atom(D, cube(-1, 0, 1), AtomProfile::TensorBump, 1);
  AtomicSum g{&D, {{a, 1.0}, {b, 3.0}}};
  Vec x{{0.3, 0.4}};
  CHECK(g(x) == doctest::Approx(a(x) + 3.0 * b(x)));
  CHECK(b(x) != 0.0);
}

TEST_CASE("h1_norm") {
  auto D = diag24();
  AtomicSum empty{&D, {}};
  CHECK(h1_norm(empty) == 0.0);
  AtomicSum f{&D, {}};
  for (int i = 0; i < 3; ++i) f.terms.push_back({make_atom(D, cube(0, 3 * i, 0), AtomProfile::HaarSplit), i + 1.0});
  CHECK(h1_norm(f) == 6.0);
  CHECK(h1_norm(f.scaled(2.0)) == 12.0);
}

TEST_CASE("disjoint supports: sup norm is max lambda a^{-tau}") {
  auto D = diag24();
  AtomicSum f{&D, {{make_atom(D, cube(0, 0, 0), AtomProfile::HaarSplit), 1.5},
                   {make_atom(D, cube(-1, 4, 4), AtomProfile::HaarSplit), 0.5}}};
  auto box = f.bounding_box();
  double sup = 0;
  for (int i = 0; i < 400; ++i)
    for (int j = 0; j < 400; ++j) {
      Vec x{{box.lo(0) + (i + 0.5) / 400 * (box.hi(0) - box.lo(0)), box.lo(1) + (j + 0.5) / 400 * (box.hi(1) - box.lo(1))}};
      sup = std::max(sup, std::abs(f(x)));
    }
  CHECK(sup == doctest::Approx(std::max(1.5, 0.5 * 8.0)));
}

TEST_CASE("dilation covariance") {
  auto J = jordan();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (auto profile : {AtomProfile::HaarSplit, AtomProfile::TensorBump}) {
    auto a = make_atom(J, cube(-1, 1, -1), profile, 1);
    auto b = dilate(J, a);
    CHECK(b.support.tau == 0);
    CHECK(b.amplitude == doctest::Approx(a.amplitude / J.det_scale));
    for (int s = 0; s < 2000; ++s) {
      Vec x = a.region.origin + a.region.edges * Vec{{u(rng) / 3 + 0.5, u(rng) / 3 + 0.5}};
      CHECK(b(J.matrix * x) == doctest::Approx(a(x) / J.det_scale).epsilon(1e-9));
    }
    auto r = integrate(b);
    CHECK(std::abs(r.integral) <= 1e-8 * r.l1);
  }
}
