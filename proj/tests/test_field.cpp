#include "anisomax/field.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace anisomax;

namespace {

DilationStructure diag24() {
  Mat A(2, 2);
  A << 2, 0, 0, 4;
  return validate_dilation(A);
}

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_CASE("lattice geometry") {
  auto L = Lattice::covering(Box{v2(-1, 0), v2(1, 1)}, {4, 2});
  CHECK(L.size() == 8);
  CHECK(L.cell_volume() == doctest::Approx(0.25));
  CHECK(L.center(std::vector<int>{0, 0}).isApprox(v2(-0.75, 0.25)));
  CHECK(L.flat({1, 1}) == 3);
  CHECK(L.center(std::int64_t{3}).isApprox(v2(-0.25, 0.75)));
  std::vector<int> f, l;
  REQUIRE(L.range(v2(-0.8, 0.0), v2(0.3, 0.3), f, l));
  CHECK(f == std::vector<int>{0, 0});
  CHECK(l == std::vector<int>{2, 0});
  CHECK_FALSE(L.range(v2(5, 5), v2(6, 6), f, l));

  auto C = Lattice::centered(v2(1.0, 0.5), v2(0.1, 0.1));
  CHECK(C.dims[0] % 2 == 1);
  CHECK(C.center(std::vector<int>{C.dims[0] / 2, C.dims[1] / 2}).norm() < 1e-12);
  CHECK(C.box().hi(0) >= 1.0);

  Mat M = Mat::Zero(2, 2);
  M.diagonal() << 2, 4;
  auto Lm = L.mapped(M);
  CHECK(Lm.center(std::int64_t{3}).isApprox(v2(-0.5, 3.0)));
}

TEST_CASE("binary and csv export") {
  auto L = Lattice::covering(Box{v2(0, 0), v2(1, 2)}, {3, 5});
  SampledField F(L, "test");
  for (std::size_t i = 0; i < F.values.size(); ++i) F.values[i] = 0.5 * double(i) - 3.0;
  std::string path = (std::filesystem::temp_directory_path() / "anisomax_test_field.amxf").string();
  write_field_binary(F, path);
  auto G = read_field_binary(path);
  CHECK(G.lattice.dims == F.lattice.dims);
  CHECK(G.lattice.origin == F.lattice.origin);
  CHECK(G.lattice.spacing == F.lattice.spacing);
  CHECK(G.values == F.values);
  std::remove(path.c_str());
  std::ostringstream os;
  write_field_csv(F, os);
  std::string s = os.str();
  CHECK(s.rfind("x0,x1,value\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 16);
  CHECK_THROWS_AS(read_field_binary("/nonexistent/field"), Error);
}

TEST_CASE("splat convolution equals direct evaluation") {
  auto D = diag24();
  AtomicSum f;
  f.dilation = &D;
  f.terms.push_back({make_atom(D, GridCube{0, 0, {0, 0}}, AtomProfile::HaarSplit, 1), 1.5});
  f.terms.push_back({make_atom(D, GridCube{0, -1, {3, 1}}, AtomProfile::TensorBump, 2), 0.7});
  MeasureNodes mu;
  mu.points = {v2(0.1, 0.2), v2(-0.3, 0.05), v2(0.25, -0.4)};
  mu.weights = {0.5, 0.3, 0.2};
  Mat map = Mat::Zero(2, 2);
  map.diagonal() << 2, 4;
  auto L = Lattice::covering(Box{v2(-2, -3), v2(4, 4)}, {60, 70});
  SampledField F(L);
  accumulate_convolution(F, f, mu, map);
  for (std::int64_t c = 0; c < L.size(); c += 37) {
    Vec x = L.center(c);
    double direct = 0.0;
    for (std::size_t i = 0; i < mu.points.size(); ++i) direct += mu.weights[i] * f(x - map * mu.points[i]);
    CHECK(F.values[static_cast<std::size_t>(c)] == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("resolution requirement") {
  auto D = diag24();
  AtomicSum f;
  f.dilation = &D;
  f.terms.push_back({make_atom(D, GridCube{0, -1, {0, 0}}, AtomProfile::HaarSplit, 0), 1.0});
  // Atom is 1/2 x 1/4.
  CHECK(min_atom_extent(f).isApprox(v2(0.5, 0.25)));
  auto fine = Lattice::covering(Box{v2(0, 0), v2(1, 1)}, {16, 32});
  CHECK_NOTHROW(require_resolution(fine, f));
  auto coarse = Lattice::covering(Box{v2(0, 0), v2(1, 1)}, {16, 16});
  CHECK_THROWS_AS(require_resolution(coarse, f), Error);
}

TEST_CASE("dense nodes keep the mass and the resolution") {
  auto S = GraphSurface::make(GraphSurface::Kind::CircleArc, 2);
  Mat map = Mat::Identity(2, 2);
  map.diagonal() << 4, 16;
  auto nu = dense_nodes(S, map, 0.1);
  CHECK(nu.mass() == doctest::Approx(S.mass()).epsilon(1e-9));
  double worst = 0.0;
  for (std::size_t i = 1; i < nu.points.size(); ++i)
    worst = std::max(worst, (map * (nu.points[i] - nu.points[i - 1])).norm());
  CHECK(worst <= 0.1 / 4);

  auto P = partition_measure(S, 4, 0.25);
  double total = 0.0;
  for (const auto& p : P.pieces()) total += dense_nodes(P, p.rho, Mat::Identity(2, 2), 0.05).mass();
  CHECK(total == doctest::Approx(S.mass()).epsilon(1e-6));
}
