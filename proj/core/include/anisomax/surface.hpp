#pragma once

#include "anisomax/common.hpp"
#include "anisomax/dilation.hpp"
#include "anisomax/grid.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace anisomax {

/// Discrete measure: sum_i weights[i] delta_{points[i]}.
struct MeasureNodes {
  std::vector<Vec> points;
  std::vector<double> weights;

  double mass() const;
};

struct Monomial {
  std::vector<int> powers;
  double coeff = 0.0;
};

/// The graph {(y, psi(y)) : y in [-1,1]^{d-1}} carrying d mu = chi(y) dy,
/// where chi(y) = prod_i phi(y_i / R) and phi is the standard bump.
class GraphSurface {
 public:
  enum class Kind { CircleArc, Paraboloid, QuarticFlat, CustomPolynomial };

  /// R <= 0 picks the default cutoff radius for the dimension.
  static GraphSurface make(Kind kind, int d, double cutoff_radius = 0.0);
  static GraphSurface custom(int d, std::vector<Monomial> terms, double cutoff_radius = 0.0);
  static GraphSurface from_name(const std::string& name, int d, double cutoff_radius = 0.0);
  static double default_cutoff(int d);

  Kind kind() const { return kind_; }
  std::string catalog_id() const;
  int dim() const { return d_; }
  int param_dim() const { return d_ - 1; }
  double cutoff_radius() const { return radius_; }

  double psi(const Vec& y) const;
  Vec gradient(const Vec& y) const;
  Mat hessian(const Vec& y) const;
  double chi(const Vec& y) const;
  Vec point(const Vec& y) const;
  /// sup |grad psi| over the cutoff box.
  double max_slope() const { return max_slope_; }
  /// Upper bound for the Hessian norm over the cutoff box (Frobenius).
  double max_hessian() const { return max_hessian_; }
  /// mu(R^d) = (R * int phi)^{d-1}.
  double mass() const;

  /// Composite Gauss-Legendre on [-R,R]^{d-1}, weights include chi.
  MeasureNodes quadrature(int panels_per_axis, int nodes_per_panel = 8) const;

 private:
  GraphSurface() = default;
  void finish();

  Kind kind_ = Kind::Paraboloid;
  int d_ = 2;
  double radius_ = 0.8;
  std::vector<Monomial> terms_;
  double max_slope_ = 0.0;
  double max_hessian_ = 0.0;
};

double gaussian_curvature(const GraphSurface& S, const Vec& y);

/// Grid sample of supp mu with a certified covering radius, for exceptional sets.
std::shared_ptr<const SupportSample> support_sample(const GraphSurface& S, int per_axis);

/// One cap mu_rho^s: the partition bump times chi, with tensor quadrature.
struct SurfacePiece {
  int s = 0;
  long rho = 0;
  std::vector<int> cell;
  Vec center;      ///< parameter point
  Vec support_lo;  ///< parameter support box
  Vec support_hi;
  double radius = 0.0;  ///< 2^{-eps s}
  MeasureNodes nodes;   ///< ambient points, weights include the bump
  std::vector<Vec> params;

  bool in_I1 = false;
  bool in_I2 = false;
  double min_abs_curvature = 0.0;
  double max_mass_ratio = 0.0;  ///< max_Q mu(Q) diam(Q) / |Q|
  GridCube worst_cube;
  bool window_edge = false;  ///< worst cube sits at an end of the tau window
};

/// Smooth partition of unity subordinate to a uniform grid of parameter cells.
class SurfacePartition {
 public:
  SurfacePartition(const GraphSurface& S, int s, double epsilon, int nodes_per_axis = 32);

  const GraphSurface& surface() const { return surface_; }
  int s() const { return s_; }
  double epsilon() const { return epsilon_; }
  double spacing() const { return h_; }
  int cells_per_axis() const { return n_; }
  std::vector<SurfacePiece>& pieces() { return pieces_; }
  const std::vector<SurfacePiece>& pieces() const { return pieces_; }

  /// bump_rho(y); sums to chi(y) over rho.
  double bump(long rho, const Vec& y) const;
  long index_of(const std::vector<int>& cell) const;

 private:
  GraphSurface surface_;
  int s_;
  double epsilon_;
  double h_ = 0.0;
  int n_ = 1;
  std::vector<SurfacePiece> pieces_;
};

inline constexpr long kPieceBudget = 1'000'000;

SurfacePartition partition_measure(const GraphSurface& S, int s, double epsilon, int nodes_per_axis = 32);

struct ClassifyOptions {
  int tau_lo = 0;  ///< default window [-s-8, 0] when tau_lo > tau_hi
  int tau_hi = -1;
  int enumerate_limit = 4096;
  /// Above the enumeration limit, candidate cubes are those holding these many
  /// evenly spread quadrature nodes of the cap.
  int probe_nodes = 16;
  int mass_depth = 0;  ///< bisection depth for cube masses, 0 picks by dimension
};

/// Sets in_I1 / in_I2 on every piece.
void classify_pieces(SurfacePartition& P, const DilationStructure& D, double zeta, const ClassifyOptions& opt = {});

/// mu_rho(Q) by adaptive bisection of the parameter projection of Q.
double piece_mass_in_cube(const SurfacePartition& P, long rho, const DilationStructure& D, const GridCube& Q,
                          int max_depth = 0);

struct MercuryRow {
  int s = 0;
  long pieces = 0;
  long in_I1 = 0;
  long in_I2 = 0;
  long flagged = 0;  ///< |I1 u I2|
  long window_edge = 0;
};

struct MercuryReport {
  std::vector<MercuryRow> rows;
  double growth = 0.0;  ///< fitted slope of log2(|I1 u I2| + 1) against s
  double eta = 0.0;     ///< (d-1) eps - growth
};

MercuryReport mercury_check(const GraphSurface& S, const DilationStructure& D, double epsilon, double zeta,
                            const std::vector<int>& s_values, const ClassifyOptions& opt = {},
                            int nodes_per_axis = 32);

}  // namespace anisomax
