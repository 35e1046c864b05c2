#pragma once

#include "anisomax/atoms.hpp"
#include "anisomax/common.hpp"
#include "anisomax/grid.hpp"
#include "anisomax/surface.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace anisomax {

/// Axis-aligned cell lattice; samples sit at cell centers origin + (j + 1/2) h.
struct Lattice {
  Vec origin;
  Vec spacing;
  std::vector<int> dims;

  /// dims cells per axis exactly covering the box.
  static Lattice covering(const Box& box, const std::vector<int>& dims);
  /// Odd cell counts, symmetric about 0, half extent rounded up to whole cells.
  static Lattice centered(const Vec& half_extent, const Vec& spacing);

  int dim() const { return static_cast<int>(dims.size()); }
  std::int64_t size() const;
  double cell_volume() const { return spacing.prod(); }
  Box box() const;
  Vec center(const std::vector<int>& idx) const;
  Vec center(std::int64_t flat) const;
  /// Row-major: the first axis varies slowest.
  std::int64_t flat(const std::vector<int>& idx) const;
  /// Index ranges of cells with centers in [lo, hi]; false when empty.
  bool range(const Vec& lo, const Vec& hi, std::vector<int>& first, std::vector<int>& last) const;
  /// The image under a diagonal map (cells map to cells).
  Lattice mapped(const Mat& diagonal) const;
};

struct SampledField {
  Lattice lattice;
  std::vector<double> values;
  std::string provenance;

  explicit SampledField(Lattice l = {}, std::string prov = {});

  double max_abs() const;
  double integral() const;
  double l1() const;
};

/// Inclusive k range.
struct KRange {
  int lo = 0;
  int hi = 0;
};

/// Calls f(flat, center) for every cell whose center is in [lo, hi].
template <class F>
void for_cells_in(const Lattice& L, const Vec& lo, const Vec& hi, F&& f) {
  std::vector<int> first, last;
  if (!L.range(lo, hi, first, last)) return;
  const int d = L.dim();
  std::vector<int> idx = first;
  Vec x(d);
  while (true) {
    for (int i = 0; i < d; ++i) x(i) = L.origin(i) + (idx[i] + 0.5) * L.spacing(i);
    f(L.flat(idx), x);
    int a = d - 1;
    while (a >= 0 && ++idx[a] > last[a]) {
      idx[a] = first[a];
      --a;
    }
    if (a < 0) return;
  }
}

/// out(x) += sum_i w_i f(x - map p_i), splatting each shifted atom over its box.
void accumulate_convolution(SampledField& out, const AtomicSum& f, const MeasureNodes& mu, const Mat& map);

/// Smallest edge extent (per axis) over the atoms, for resolution checks.
Vec min_atom_extent(const AtomicSum& f);

/// Throws ResolutionTooCoarse unless spacing_i <= extent_i / 8 on every axis.
void require_resolution(const Lattice& L, const AtomicSum& f);

/// Nodes of mu dense enough that map-images are spaced below min_extent / 16,
/// half the finest lattice spacing allowed by require_resolution.
MeasureNodes dense_nodes(const GraphSurface& S, const Mat& map, double min_extent);
MeasureNodes dense_nodes(const SurfacePartition& P, long rho, const Mat& map, double min_extent);

/// Binary layout: "AMXF", int32 d, int32 dims[d], double origin[d],
/// double spacing[d], double values[prod dims] (row-major, little endian).
void write_field_binary(const SampledField& f, const std::string& path);
SampledField read_field_binary(const std::string& path);
/// One row per cell: x_0..x_{d-1},value.
void write_field_csv(const SampledField& f, std::ostream& os);

}  // namespace anisomax
