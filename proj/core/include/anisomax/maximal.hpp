#pragma once

#include "anisomax/atoms.hpp"
#include "anisomax/dilation.hpp"
#include "anisomax/field.hpp"
#include "anisomax/surface.hpp"

#include <functional>
#include <string>
#include <vector>

namespace anisomax {

/// Either the whole surface measure or one partition piece.
struct MeasureRef {
  const GraphSurface* surface = nullptr;
  const SurfacePartition* partition = nullptr;
  long rho = -1;

  static MeasureRef whole(const GraphSurface& S);
  static MeasureRef piece(const SurfacePartition& P, long rho);

  const GraphSurface& graph() const;
  /// Nodes whose images under map are spaced below min_extent / 16.
  MeasureNodes nodes(const Mat& map, double min_extent) const;
  double mass() const;
  Box support_box() const;
  std::string id() const;
};

/// (mu_k * f)(x) on the lattice cells. Throws ResolutionTooCoarse.
SampledField convolve_dilated(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, int k,
                              const Lattice& L);

/// Bounding box of supp f + union_k A^k supp mu.
Box dilated_support_box(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k);
Lattice covering_lattice(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                         const std::vector<int>& dims);
bool lattice_covers(const Lattice& L, const Box& b);

struct MaximalOptions {
  double tail_tolerance = 0.01;
  bool throw_on_tail = false;
};

struct MaximalField {
  SampledField field;
  std::vector<int> argmax;  ///< a k attaining the max in each cell
  KRange range;
  std::vector<double> per_k_max;
  /// Largest amount by which the end k raises the field, over the field max.
  double lower_tail = 0.0;
  double upper_tail = 0.0;
  bool tail_ok = true;
  bool covers = true;
  std::string warning;
};

/// max over k in range of |mu_k * f|. Tail failures are reported in
/// `warning` (TailNotNegligible), or thrown with throw_on_tail.
MaximalField maximal_field(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                           const Lattice& L, const MaximalOptions& opt = {});

using ExclusionSet = std::function<bool(const Vec&)>;

struct DistributionReport {
  std::vector<double> thresholds;
  std::vector<double> measures;
  double weak_ratio = 0.0;  ///< sup lambda |{F > lambda}|
  double argmax_threshold = 0.0;
  double h1 = 0.0;
  long excluded_cells = 0;
};

/// count log-spaced thresholds on [lo_frac, 1] * max, ascending.
std::vector<double> log_thresholds(double max, int count = 64, double lo_frac = 1e-3);

/// Cell-count superlevel measures; cells with centers in E are skipped.
DistributionReport distribution_function(const SampledField& F, const std::vector<double>& thresholds,
                                         const ExclusionSet& E = {});

struct WeakTypeResult {
  MaximalField maximal;
  DistributionReport distribution;
  double ratio = 0.0;
};

/// sup_lambda lambda |{Mf > lambda} \ E| / ||f||_{H1} on the default grid.
WeakTypeResult weak_type(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                         const Lattice& L, const ExclusionSet& E = {}, const MaximalOptions& opt = {});
double weak_type_ratio(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                       const Lattice& L, const ExclusionSet& E = {});

}  // namespace anisomax
