#pragma once

#include "anisomax/common.hpp"
#include "anisomax/dilation.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace anisomax {

/// A cube of the grid R_{sigma,tau}: the image under A^tau of the dyadic cube
/// 2^sigma ([0,1)^d + index). Addresses only; geometry needs a DilationStructure.
struct GridCube {
  int sigma = 0;
  int tau = 0;
  std::vector<std::int64_t> index;

  auto operator<=>(const GridCube&) const = default;
  bool operator==(const GridCube&) const = default;
};

std::string to_string(const GridCube& c);

/// {origin + edges * t : t in [0,1]^d}; columns of `edges` are the generating edges.
struct Parallelepiped {
  Vec origin;
  Mat edges;

  int dim() const { return static_cast<int>(origin.size()); }
  Vec center() const { return origin + 0.5 * edges.rowwise().sum(); }
  double volume() const { return std::abs(edges.determinant()); }
  double diameter() const;
  std::vector<Vec> vertices() const;
  /// Closed-hull membership with a relative tolerance in edge coordinates.
  bool contains(const Vec& x, double tol = 1e-9) const;
  /// Axis-aligned bounding box.
  std::pair<Vec, Vec> bounds() const;
};

struct Box {
  Vec lo;
  Vec hi;

  bool empty() const;
  double volume() const;
};

Parallelepiped realize(const DilationStructure& D, const GridCube& c);
std::vector<Vec> realize_cube(const DilationStructure& D, const GridCube& c);

/// Dilate about the center. factor 2 gives q*, factor 4 gives q**.
Parallelepiped expand(const Parallelepiped& p, double factor);
Parallelepiped expand_cube(const DilationStructure& D, const GridCube& c, int factor);

/// True iff every vertex of `inner` lies in the closed parallelepiped `outer`.
bool contains(const Parallelepiped& outer, const Parallelepiped& inner, double tol = 1e-9);
bool cube_contains(const Parallelepiped& outer, const DilationStructure& D, const GridCube& inner);

/// True iff the interiors of two parallelepipeds intersect (separating axis test).
bool interiors_intersect(const Parallelepiped& a, const Parallelepiped& b);

/// Half-open membership of a point in the realization of c.
bool cube_has_point(const DilationStructure& D, const GridCube& c, const Vec& x);

/// The cube of R_{sigma,tau} whose half-open realization contains x.
GridCube locate(const DilationStructure& D, int sigma, int tau, const Vec& x);

/// The cube of R_{sigma,tau+1} containing the center of c.
GridCube tau_parent(const DilationStructure& D, const GridCube& c);

/// The dyadic parent in R_{sigma+1,tau}.
GridCube sigma_parent(const GridCube& c);

inline constexpr std::int64_t kEnumerationBudget = 10'000'000;

/// Every cube of R_{sigma,tau} whose interior meets the interior of box.
std::vector<GridCube> enumerate_cover(const DilationStructure& D, int sigma, int tau, const Box& box);

/// Outer bound q** + A^{tau+2} B_2(0) for the tendril T(q).
struct TendrilBound {
  GridCube base;
  Parallelepiped core;     ///< q**
  Mat ball_map;            ///< A^{tau+2}
  Mat ball_map_inverse;    ///< A^{-(tau+2)}
  Parallelepiped pulled_core;  ///< A^{-(tau+2)} q**
  double ball_radius = 2.0;
  /// C 2^sigma a^tau with C = 4^d vol(B_2) a^2.
  double volume_bound = 0.0;
  /// Rigorous bound on the volume of the outer set itself.
  double outer_volume = 0.0;

  bool contains(const Vec& x) const;
  Box bounding_box() const;
};

TendrilBound tendril_of(const DilationStructure& D, const GridCube& c);

/// Finite sample of supp mu with a covering radius: every support point lies
/// within `radius` of a sample. Bucketed on a uniform grid for range queries.
class SupportSample {
 public:
  SupportSample(std::vector<Vec> points, double radius);

  const std::vector<Vec>& points() const { return points_; }
  double radius() const { return radius_; }
  int dim() const { return dim_; }
  /// Calls f(point) for samples in the axis box [lo, hi] until f returns true.
  bool any_in_box(const Vec& lo, const Vec& hi, const std::function<bool(const Vec&)>& f) const;

 private:
  std::vector<Vec> points_;
  double radius_ = 0.0;
  int dim_ = 0;
  Vec origin_;
  double cell_ = 1.0;
  int per_axis_ = 1;
  std::vector<std::int64_t> start_;
  std::vector<std::int32_t> order_;
};

/// T(q) = q** + union_{k <= tau+2} A^k(supp mu) with the support thickened by
/// the sample radius. Levels below k_min fold into q** + A^{k_min - 1} B_1.
struct SupportTendril {
  TendrilBound bound;
  std::shared_ptr<const SupportSample> support;
  int k_min = 0;
  int k_max = 0;
  std::vector<Mat> level_inverse;  ///< A^{-k}, k = k_min..k_max
  std::vector<Parallelepiped> level_core;  ///< A^{-k} q**
  std::vector<Mat> level_unit;  ///< inverse edges of level_core
  std::vector<Vec> level_margin;  ///< radius in edge coordinates
  Mat tail_inverse;
  Parallelepiped tail_core;

  bool contains(const Vec& x) const;
  Box bounding_box() const { return bound.bounding_box(); }
};

SupportTendril support_tendril_of(const DilationStructure& D, const GridCube& c,
                                  std::shared_ptr<const SupportSample> support);

double unit_ball_volume(int d);

/// Euclidean distance from y to a parallelepiped (exact, by face enumeration).
double distance_to(const Parallelepiped& p, const Vec& y);

struct VolumeEstimate {
  double volume = 0.0;
  double std_error = 0.0;
};

/// Hit-or-miss Monte Carlo volume of a set inside a bounding box.
VolumeEstimate monte_carlo_volume(const Box& box, const std::function<bool(const Vec&)>& member,
                                  std::int64_t samples, std::uint64_t seed);

VolumeEstimate tendril_volume_estimate(const TendrilBound& t, std::int64_t samples, std::uint64_t seed = 1);

}  // namespace anisomax
