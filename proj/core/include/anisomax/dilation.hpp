#pragma once

#include "anisomax/common.hpp"

#include <utility>
#include <vector>

namespace anisomax {

/// An expanding matrix A together with the spectral data the grid and
/// surface machinery needs. Build one with validate_dilation().
struct DilationStructure {
  Mat matrix;
  int dim = 0;
  double det_scale = 0.0;  ///< a = |det A|
  double r_min = 0.0;      ///< smallest eigenvalue modulus
  int block_size = 0;      ///< largest Jordan block attached to modulus r_min
  Vec slow_vector;         ///< unit vector in the slowest generalized eigenspace
  Mat slow_subspace;       ///< columns span W (1 or 2 columns)
  int norm_power = 0;      ///< smallest m >= 1 with ||A^-m|| <= 1/2

  /// A^k for any integer k; served from a table for |k| <= kPowerTableRadius.
  Mat power(int k) const;
  Mat inverse() const { return power(-1); }

  std::vector<Mat> power_table;  ///< A^k for k in [-radius, radius]
};

inline constexpr int kPowerTableRadius = 160;

inline constexpr double kSpectralTolerance = 1e-9;
inline constexpr int kQuasiMetricWindow = 64;

DilationStructure validate_dilation(const Mat& matrix);

/// exp(k*) with k* the least k such that |A^-k (y - x)| <= 1; zero when x == y.
double quasi_metric(const DilationStructure& D, const Vec& x, const Vec& y);

/// Exact Euclidean diameter of A^tau([0,1]^d).
double cube_diameter(const DilationStructure& D, int tau);

/// Fits p in log diam(tau) = tau log r + p log|tau| + c over tau in [lo, hi].
double fit_diameter_exponent(const DilationStructure& D, int tau_lo, int tau_hi);

struct SlowDirection {
  Vec v;
  Mat W;
};
SlowDirection slowest_direction(const DilationStructure& D);

/// Distance from the normalized iterate A^tau v / |A^tau v| to span(W).
double slow_alignment_error(const DilationStructure& D, int tau);

int normalization_power(const DilationStructure& D);

/// The structure of A^m with m = norm_power, so that A^-1 B_1 lies in B_1/2.
DilationStructure normalized(const DilationStructure& D);

}  // namespace anisomax
