#include "doctest.h"

#include "anisomax/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace anisomax;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

GridCube cube(int sigma, int tau, std::int64_t i, std::int64_t j) { return {sigma, tau, {i, j}}; }

bool near(const Vec& a, const Vec& b, double tol = 1e-12) { return (a - b).norm() <= tol; }

using Poly = std::vector<std::array<double, 2>>;

// Independent oracle for 2D intersections: Sutherland-Hodgman clip of a
// convex polygon by an axis-aligned box, then the shoelace area.
Poly clip(const Poly& poly, int axis, double bound, bool keep_above) {
  Poly out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    auto p = poly[i], q = poly[(i + 1) % poly.size()];
    auto inside = [&](const std::array<double, 2>& v) { return keep_above ? v[axis] >= bound : v[axis] <= bound; };
    bool pin = inside(p), qin = inside(q);
    if (pin) out.push_back(p);
    if (pin != qin) {
      double t = (bound - p[axis]) / (q[axis] - p[axis]);
      out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
    }
  }
  return out;
}

double overlap_area(const Parallelepiped& p, const Box& b) {
  auto v = p.vertices();  // order 00,10,01,11 -> convex order 00,10,11,01
  Poly poly{{v[0](0), v[0](1)}, {v[1](0), v[1](1)}, {v[3](0), v[3](1)}, {v[2](0), v[2](1)}};
  poly = clip(poly, 0, b.lo(0), true);
  poly = clip(poly, 0, b.hi(0), false);
  poly = clip(poly, 1, b.lo(1), true);
  poly = clip(poly, 1, b.hi(1), false);
  double area = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    auto a = poly[i], c = poly[(i + 1) % poly.size()];
    area += a[0] * c[1] - c[0] * a[1];
  }
  return std::abs(area) / 2;
}

}  // namespace

TEST_CASE("realize_cube") {
  auto D = validate_dilation(mat2(2, 0, 0, 4));
  auto v = realize_cube(D, cube(0, 0, 0, 0));
  CHECK(near(v[0], Vec{{0, 0}}));
  CHECK(near(v[3], Vec{{1, 1}}));
  auto r = realize(D, cube(0, -1, 0, 0));
  auto [lo, hi] = r.bounds();
  CHECK(near(lo, Vec{{0, 0}}));
  CHECK(near(hi, Vec{{0.5, 0.25}}));
  auto s = realize(D, cube(-1, 0, 1, 0)).bounds();
  CHECK(near(s.first, Vec{{0.5, 0}}));
  CHECK(near(s.second, Vec{{1, 0.5}}));
  CHECK(realize(D, cube(-2, -3, 5, -7)).volume() == doctest::Approx(std::pow(2.0, -4) * std::pow(8.0, -3)));
}

TEST_CASE("expand_cube") {
  auto D = validate_dilation(mat2(2, 0, 0, 4));
  auto b = expand_cube(D, cube(0, 0, 0, 0), 2).bounds();
  CHECK(near(b.first, Vec{{-0.5, -0.5}}));
  CHECK(near(b.second, Vec{{1.5, 1.5}}));
  b = expand_cube(D, cube(0, -1, 0, 0), 4).bounds();
  CHECK(near(b.first, Vec{{-0.75, -0.375}}));
  CHECK(near(b.second, Vec{{1.25, 0.625}}));

  auto J = validate_dilation(mat2(2, 1, 0, 2));
  auto c = cube(-1, -2, 3, -1);
  auto twice = expand(expand_cube(J, c, 2), 2);
  auto four = expand_cube(J, c, 4);
  CHECK(near(twice.origin, four.origin));
  CHECK((twice.edges - four.edges).norm() < 1e-12);
  CHECK_THROWS_AS(expand_cube(J, c, 3), Error);
}

TEST_CASE("cube_contains") {
  auto D = validate_dilation(mat2(2, 0, 0, 4));
  CHECK(cube_contains(expand_cube(D, cube(0, 0, 0, 0), 2), D, cube(0, 0, 0, 0)));
  CHECK(cube_contains(realize(D, cube(0, 0, 0, 0)), D, cube(0, -1, 0, 0)));
  CHECK_FALSE(cube_contains(realize(D, cube(0, 0, 0, 0)), D, cube(0, 0, 3, 0)));
}

TEST_CASE("enumerate_cover examples") {
  auto D = validate_dilation(mat2(2, 0, 0, 4));
  Box unit{Vec{{0, 0}}, Vec{{1, 1}}};
  CHECK(enumerate_cover(D, 0, 0, unit).size() == 1);
  CHECK(enumerate_cover(D, -1, 0, unit).size() == 4);
  CHECK(enumerate_cover(D, 0, 0, Box{Vec{{0, 0}}, Vec{{0, 1}}}).empty());
  CHECK_THROWS_AS(enumerate_cover(D, -30, 0, Box{Vec{{0, 0}}, Vec{{100, 100}}}), Error);
}

TEST_CASE("enumerate_cover is complete and exact against a clipping oracle") {
  auto J = validate_dilation(mat2(2, 1, 0, 2));
  Box box{Vec{{-0.3, 0.2}}, Vec{{0.9, 1.1}}};
  for (int tau : {-2, -1, 0}) {
    for (int sigma : {0, -1, -2}) {
      auto cover = enumerate_cover(J, sigma, tau, box);
      std::set<GridCube> got(cover.begin(), cover.end());
      for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
          Vec x{{box.lo(0) + (i + 0.5) / 100 * 1.2, box.lo(1) + (j + 0.5) / 100 * 0.9}};
          CHECK(got.count(locate(J, sigma, tau, x)) == 1);
        }
      }
      for (const auto& c : cover) CHECK(overlap_area(realize(J, c), box) > 1e-12);
      // Cubes just outside the reported set must not overlap.
      for (const auto& c : cover) {
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            GridCube n = cube(sigma, tau, c.index[0] + di, c.index[1] + dj);
            if (!got.count(n)) CHECK(overlap_area(realize(J, n), box) < 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("grid partition, nesting and covariance") {
  auto J = validate_dilation(mat2(2, 1, 0, 2));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> idx(-6, 6);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = cube(-idx(rng) % 4 - 1, idx(rng) / 2, idx(rng), idx(rng));
    if (c.sigma > 0) c.sigma = -c.sigma;
    auto nb = c;
    nb.index[0] += 1;
    CHECK_FALSE(interiors_intersect(realize(J, c), realize(J, nb)));
    CHECK(interiors_intersect(realize(J, c), expand_cube(J, nb, 2)));

    auto parent = sigma_parent(c);
    CHECK(cube_contains(realize(J, parent), J, c));
    int owners = 0;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        auto p = cube(parent.sigma, parent.tau, parent.index[0] + di, parent.index[1] + dj);
        if (cube_contains(realize(J, p), J, c)) ++owners;
      }
    CHECK(owners == 1);

    auto up = c;
    up.tau += 1;
    auto a = realize_cube(J, c), b = realize_cube(J, up);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(near(J.matrix * a[k], b[k], 1e-9));
  }
}

TEST_CASE("tendril_of") {
  auto I2 = validate_dilation(mat2(2, 0, 0, 2));
  auto t = tendril_of(I2, cube(0, 0, 0, 0));
  CHECK(t.contains(Vec{{0, 0}}));
  CHECK(t.contains(Vec{{-1.5 - 7.9, 0.5}}));
  CHECK_FALSE(t.contains(Vec{{-1.5 - 8.1, 0.5}}));
  const double reach = t.core.diameter() + 2 * 4 + 1;
  CHECK_FALSE(t.contains(Vec{{reach, reach}}));

  auto D = validate_dilation(mat2(2, 0, 0, 4));
  auto t0 = tendril_of(D, cube(-2, -1, 3, 1));
  auto t1 = tendril_of(D, cube(-2, 0, 3, 1));
  CHECK(t1.volume_bound == doctest::Approx(8.0 * t0.volume_bound));
  CHECK(t1.outer_volume == doctest::Approx(8.0 * t0.outer_volume));

  auto J = validate_dilation(mat2(2, 1, 0, 2));
  CHECK_THROWS_AS(tendril_of(J, cube(0, 0, 0, 0)), Error);
  CHECK_NOTHROW(tendril_of(normalized(J), cube(0, 0, 0, 0)));
}

TEST_CASE("tendril contains q* + A^k supp mu for k <= tau + 2") {
  auto D = validate_dilation(mat2(2, 0, 0, 4));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto c : {cube(0, 0, 0, 0), cube(-2, -1, 3, -2), cube(-1, 2, -1, 0)}) {
    auto t = tendril_of(D, c);
    auto qs = expand_cube(D, c, 2);
    for (int s = 0; s < 1000; ++s) {
      Vec x = qs.origin + qs.edges * Vec{{u(rng), u(rng)}};
      const double ang = 2 * std::numbers::pi * u(rng);
      Vec y{{std::cos(ang), std::sin(ang)}};
      y *= std::sqrt(u(rng));
      const int k = c.tau + 2 - static_cast<int>(u(rng) * 6);
      CHECK(t.contains(x + D.power(k) * y));
    }
  }
}

TEST_CASE("distance_to matches dense sampling") {
  Parallelepiped p{Vec{{0.2, -0.1}}, mat2(1.0, 0.4, 0.1, 0.7)};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2, 3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec y{{u(rng), u(rng)}};
    double best = 1e300;
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 400; ++j) best = std::min(best, (p.origin + p.edges * Vec{{i / 400.0, j / 400.0}} - y).norm());
    CHECK(distance_to(p, y) == doctest::Approx(best).epsilon(2e-3));
    CHECK(distance_to(p, y) <= best + 1e-12);
  }
}

TEST_CASE("tendril_volume_estimate") {
  auto I2 = validate_dilation(mat2(2, 0, 0, 2));
  auto t = tendril_of(I2, cube(0, 0, 0, 0));
  auto est = tendril_volume_estimate(t, 200000, 17);
  // Square of side 4 Minkowski-summed with a disc of radius 8.
  const double exact = 16 + 4 * 4 * 8 + std::numbers::pi * 64;
  CHECK(est.volume >= 16.0);
  CHECK(est.volume <= t.outer_volume);
  CHECK(std::abs(est.volume - exact) < 4 * est.std_error);

  auto lower = tendril_of(I2, cube(0, -1, 0, 0));
  auto est_lower = tendril_volume_estimate(lower, 200000, 17);
  CHECK(est_lower.volume / est.volume == doctest::Approx(1.0 / 4.0).epsilon(0.2));

  Box box{Vec{{0, 0}}, Vec{{2, 2}}};
  Box inner{Vec{{0.5, 0.25}}, Vec{{1.5, 1.0}}};
  auto cal = monte_carlo_volume(box, [&](const Vec& x) {
    return (x.array() >= inner.lo.array()).all() && (x.array() < inner.hi.array()).all();
  }, 1000000, 23);
  CHECK(cal.volume == doctest::Approx(inner.volume()).epsilon(0.01));
}
