#pragma once

#include "anisomax/common.hpp"
#include "anisomax/dilation.hpp"
#include "anisomax/grid.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace anisomax {

struct WeightedCube {
  GridCube cube;
  double lambda = 0.0;
};

/// One verified condition: pass flag, worst observed ratio (lhs / allowed) and a witness.
struct ConditionReport {
  explicit ConditionReport(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  bool pass = true;
  double worst_ratio = 0.0;
  std::string witness;
  std::string detail;
};

struct VerifyReport {
  std::vector<ConditionReport> conditions;

  bool pass() const;
  const ConditionReport* find(const std::string& name) const;
  std::string to_string() const;
};

// ---------------------------------------------------------------------------
// Whitney-type selection

struct WhitneyOptions {
  double c_w = 16.0;
  int max_levels = 200;
};

struct WhitneyResult {
  std::vector<GridCube> selected;
  /// Per input cube: index into `selected`, or -1 when the cube is leftover.
  std::vector<int> assigned;
  std::vector<std::size_t> leftover;
  int repairs = 0;
};

/// Maximal-cube selection for F = sum lambda_Q chi_Q / |Q| on tau-parent chains,
/// followed by pruning, overlap resolution and a repair pass for condition 1.
WhitneyResult whitney_decompose(const DilationStructure& D, const std::vector<WeightedCube>& Q, double alpha,
                                const WhitneyOptions& opt = {});

VerifyReport verify_whitney(const DilationStructure& D, const WhitneyResult& res, const std::vector<WeightedCube>& Q,
                            double alpha, double c_w = 16.0);

/// Volume of the intersection of two parallelepipeds. Exact in d = 2 and for
/// nested pairs; otherwise a midpoint rule in the smaller one.
double overlap_volume(const Parallelepiped& a, const Parallelepiped& b);

// ---------------------------------------------------------------------------
// Stopping time

enum class QClass { Unclassified, C1, C2 };

struct TraceEvent {
  enum class Kind { Select, ClassifyC2, Repair };
  Kind kind = Kind::Select;
  long step = 0;
  int sigma = 0;
  int tau = 0;
  GridCube cube;          ///< selected q, or the Whitney cube S for C2 / repair events
  double lambda_sum = 0;  ///< Lambda_{sigma,tau}(q) for selections
  long q_index = -1;      ///< input cube for C2 / repair events
  int kappa_before = 0;
  int kappa_after = 0;

  std::string to_line() const;
};

struct StoppingOptions {
  int max_levels = 200;
};

struct StoppingResult {
  int tau0 = 0;
  std::vector<GridCube> selected;  ///< in selection order
  std::vector<long> selected_step;
  std::vector<TendrilBound> tendrils;
  /// Measure-aware tendrils; when present they define E instead of `tendrils`.
  std::vector<SupportTendril> support_tendrils;
  std::vector<Parallelepiped> quadruples;  ///< S** for every S
  std::vector<int> kappa;
  std::vector<QClass> classification;
  std::vector<long> owner_q;  ///< index into selected, or -1
  std::vector<long> owner_s;  ///< index into S_list
  std::vector<long> classified_step;
  /// (sigma, tau) of each step; C2 steps carry sigma = INT_MIN.
  std::vector<std::pair<int, int>> steps;
  std::vector<TraceEvent> trace;
  /// Cubes lying in S* for Whitney cubes of different tau.
  std::vector<std::string> mixed_dimension_witnesses;

  bool in_exceptional(const Vec& x) const;
  Box bounding_box() const;
  std::string trace_text() const;
};

/// With a support sample, E uses q** + union A^k(supp mu); without one it
/// falls back to the ball outer bounds.
StoppingResult stopping_time(const DilationStructure& D, const std::vector<GridCube>& S,
                             const std::vector<WeightedCube>& Q, double alpha, const StoppingOptions& opt = {},
                             std::shared_ptr<const SupportSample> support = nullptr);

struct StoppingCheckOptions {
  bool check_i = true;
  bool check_ii = true;
  bool check_iii = true;
  bool check_iv = true;
  double c_i = 100.0;
  double c_iv = 32.0;
  int support_points = 1000;
  std::int64_t volume_samples = 40000;
  std::uint64_t seed = 1;
  /// Points of supp mu for check (ii); required when check_ii is set. Drawn
  /// independently of the sample used to build E.
  std::span<const Vec> support;
};

VerifyReport verify_stopping(const DilationStructure& D, const StoppingResult& res, const std::vector<GridCube>& S,
                             const std::vector<WeightedCube>& Q, double alpha, const StoppingCheckOptions& opt);

/// Random inputs for the property suites: cubes of R_0 with tau uniform in
/// [tau_lo, tau_hi], centers uniform in [-extent, extent]^d, and densities
/// lambda/|Q| log-uniform in alpha * [density_lo, density_hi].
struct RandomCubeSpec {
  int count = 50;
  int tau_lo = -6;
  int tau_hi = 0;
  double extent = 4.0;
  double alpha = 1.0;
  double density_lo = 0.05;
  double density_hi = 20.0;
  std::uint64_t seed = 1;
};
std::vector<WeightedCube> random_weighted_cubes(const DilationStructure& D, const RandomCubeSpec& spec);

/// Every q in R_{sigma,tau} with c inside q* (at most 2 per axis).
std::vector<GridCube> star_candidates(const DilationStructure& D, int sigma, int tau, const Vec& c);

}  // namespace anisomax
