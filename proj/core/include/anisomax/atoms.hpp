#pragma once

#include "anisomax/common.hpp"
#include "anisomax/dilation.hpp"
#include "anisomax/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace anisomax {

/// PlainBump is positive (no cancellation); it exists for negative controls.
enum class AtomProfile { HaarSplit, TensorBump, PlainBump };

const char* to_string(AtomProfile p);
AtomProfile parse_profile(const std::string& name);

/// Mean-zero function on a cube Q of R_0 bounded by |Q|^{-1}.
///
/// Values are defined in the edge coordinates u in [0,1)^d of Q: the profile is
/// antisymmetric under u_axis -> 1 - u_axis, which gives exact cancellation.
struct Atom {
  GridCube support;
  AtomProfile profile = AtomProfile::HaarSplit;
  int axis = 0;
  double sign = 1.0;
  double amplitude = 0.0;
  Parallelepiped region;
  Mat to_unit;  ///< inverse of region.edges

  double operator()(const Vec& x) const;
  /// Profile value at edge coordinates u (no support test beyond [0,1)^d).
  double at_unit(const Vec& u) const;
  Box bounding_box() const;
  double sup_norm() const { return amplitude; }
};

/// Atom on Q. The seed picks the split axis (seed mod d) and, for the bump
/// profile, the sign ((seed / d) mod 2).
Atom make_atom(const DilationStructure& D, const GridCube& Q, AtomProfile profile, std::uint64_t seed = 0);

/// x -> a^{-1} atom(A^{-1} x), an atom on A Q.
Atom dilate(const DilationStructure& D, const Atom& atom);

struct AtomIntegrals {
  double integral = 0.0;
  double l1 = 0.0;
};

/// Tensor Gauss-Legendre with every axis split at 1/2, nodes_per_half per piece.
AtomIntegrals integrate(const Atom& atom, int nodes_per_half = 24);

struct AtomicTerm {
  Atom atom;
  double lambda = 0.0;
};

struct AtomicSum {
  const DilationStructure* dilation = nullptr;
  std::vector<AtomicTerm> terms;

  double operator()(const Vec& x) const;
  double h1_norm() const;
  AtomicSum scaled(double c) const;
  /// Union bounding box of all supports; empty sum gives an empty box.
  Box bounding_box() const;
};

inline double eval_atomic_sum(const AtomicSum& f, const Vec& x) { return f(x); }
inline double h1_norm(const AtomicSum& f) { return f.h1_norm(); }

/// Smooth bump exp(1 - 1/(1 - t^2)) on (-1, 1), equal to 1 at 0.
double bump(double t);

}  // namespace anisomax
