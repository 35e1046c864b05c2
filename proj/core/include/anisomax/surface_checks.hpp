#pragma once

#include "anisomax/atoms.hpp"
#include "anisomax/field.hpp"
#include "anisomax/surface.hpp"

#include <string>
#include <vector>

namespace anisomax {

/// Density of nu * nu~ on a lattice symmetric about 0: every pair (i, j)
/// deposits w_i w_j at p_i - p_j with cloud-in-cell weights.
SampledField autocorrelation_kernel(const MeasureNodes& nu, const Lattice& grid, double max_spacing);
SampledField autocorrelation_kernel(const SurfacePartition& P, long rho, const Lattice& grid, int nodes_per_axis = 256);

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> radii;
  std::vector<double> maxima;
  bool pass = false;  ///< slope <= -0.7
};

/// Regression of log max_{|x| in annulus} |field| on log R for `bins`
/// log-spaced annuli covering [r_lo, r_hi].
DecayFit check_kernel_decay(const SampledField& field, double r_lo, double r_hi, int bins = 12);

/// A_q: atoms on cubes Q of R_0 inside q*.
struct AtomGroup {
  GridCube q;
  AtomicSum atoms;
  double lambda() const;
};

/// Picks up to `count` cubes of level tau inside q* (seeded), attaches atoms
/// with lambda in [1, 2].
AtomGroup make_atom_group(const DilationStructure& D, const GridCube& q, int tau, int count, AtomProfile profile,
                          std::uint64_t seed);

/// The tau whose cube diameter is closest to 2^sigma in log scale.
int atom_level_for_sigma(const DilationStructure& D, int sigma);

/// Distance between the closed cubes (exact in d = 2 and for diagonal A).
double cube_distance(const DilationStructure& D, const GridCube& a, const GridCube& b);

struct NormCheck {
  double sup = 0.0;
  double sup_rate = 0.0;  ///< 2^{-sigma + zeta s} lambda_q
  double sup_ratio = 0.0;
  double l1 = 0.0;
  double l1_rate = 0.0;  ///< 2^{(zeta + eps(1-d)) s} lambda_q
  double l1_ratio = 0.0;
  double constant = 64.0;
  bool excluded_piece = false;
  bool pass = false;
  std::string note;
};

struct PieceRef {
  const SurfacePartition* partition = nullptr;
  long rho = 0;
};

/// Sup and L1 norms of A_q * mu_rho on a lattice against the cap decay rates.
NormCheck check_linfty_bound(const AtomGroup& Aq, const PieceRef& piece, const DilationStructure& D, int sigma,
                             double epsilon, double zeta, double constant = 64.0);

struct PairCheck {
  double inner = 0.0;
  double distance = 0.0;
  double rate = 0.0;  ///< 2^{sigma' + eps s (5-d)} d^{-2} lambda lambda'
  double ratio = 0.0;
  double constant = 64.0;
  bool pass = false;
  std::string note;
};

/// <A_q * mu_rho, A_q' * mu_rho> by lattice quadrature against the pair rate.
PairCheck check_pair_bound(const AtomGroup& Aq, const AtomGroup& Aq2, const PieceRef& piece,
                           const DilationStructure& D, int sigma2, double epsilon, double constant = 64.0);

/// Same inner product for arbitrary functions, on a lattice resolving both.
double lattice_inner_product(const AtomicSum& f, const AtomicSum& g, const MeasureNodes& nu);

}  // namespace anisomax
