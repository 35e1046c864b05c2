#include "anisomax/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>

namespace anisomax {

Lattice Lattice::covering(const Box& box, const std::vector<int>& dims) {
  const int d = static_cast<int>(box.lo.size());
  if (static_cast<int>(dims.size()) != d) throw Error(ErrorCode::InputInvalid, "lattice dims do not match the box");
  Lattice L;
  L.origin = box.lo;
  L.spacing.resize(d);
  L.dims = dims;
  for (int i = 0; i < d; ++i) {
    if (dims[i] < 1 || !(box.hi(i) > box.lo(i))) throw Error(ErrorCode::InputInvalid, "degenerate lattice");
    L.spacing(i) = (box.hi(i) - box.lo(i)) / dims[i];
  }
  return L;
}

Lattice Lattice::centered(const Vec& half_extent, const Vec& spacing) {
  const int d = static_cast<int>(spacing.size());
  Lattice L;
  L.spacing = spacing;
  L.dims.resize(d);
  L.origin.resize(d);
  for (int i = 0; i < d; ++i) {
    int half = static_cast<int>(std::ceil(half_extent(i) / spacing(i) - 0.5 - 1e-9));
    L.dims[i] = 2 * std::max(half, 0) + 1;
    L.origin(i) = -0.5 * L.dims[i] * spacing(i);
  }
  return L;
}

std::int64_t Lattice::size() const {
  std::int64_t n = 1;
  for (int k : dims) n *= k;
  return n;
}

Box Lattice::box() const {
  Vec hi = origin;
  for (int i = 0; i < dim(); ++i) hi(i) += dims[i] * spacing(i);
  return Box{origin, hi};
}

Vec Lattice::center(const std::vector<int>& idx) const {
  Vec x(dim());
  for (int i = 0; i < dim(); ++i) x(i) = origin(i) + (idx[i] + 0.5) * spacing(i);
  return x;
}

Vec Lattice::center(std::int64_t flat) const {
  std::vector<int> idx(dim());
  for (int i = dim() - 1; i >= 0; --i) {
    idx[i] = static_cast<int>(flat % dims[i]);
    flat /= dims[i];
  }
  return center(idx);
}

std::int64_t Lattice::flat(const std::vector<int>& idx) const {
  std::int64_t f = 0;
  for (int i = 0; i < dim(); ++i) f = f * dims[i] + idx[i];
  return f;
}

bool Lattice::range(const Vec& lo, const Vec& hi, std::vector<int>& first, std::vector<int>& last) const {
  const int d = dim();
  first.assign(d, 0);
  last.assign(d, 0);
  for (int i = 0; i < d; ++i) {
    double a = (lo(i) - origin(i)) / spacing(i) - 0.5;
    double b = (hi(i) - origin(i)) / spacing(i) - 0.5;
    long f = static_cast<long>(std::ceil(a));
    long l = static_cast<long>(std::floor(b));
    f = std::max(f, 0L);
    l = std::min(l, static_cast<long>(dims[i]) - 1);
    if (f > l) return false;
    first[i] = static_cast<int>(f);
    last[i] = static_cast<int>(l);
  }
  return true;
}

Lattice Lattice::mapped(const Mat& diagonal) const {
  Lattice L = *this;
  for (int i = 0; i < dim(); ++i) {
    double s = diagonal(i, i);
    if (!(s > 0)) throw Error(ErrorCode::InputInvalid, "lattice map must be a positive diagonal");
    L.origin(i) *= s;
    L.spacing(i) *= s;
  }
  return L;
}

SampledField::SampledField(Lattice l, std::string prov)
    : lattice(std::move(l)), values(static_cast<std::size_t>(lattice.size()), 0.0), provenance(std::move(prov)) {}

double SampledField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double SampledField::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * lattice.cell_volume();
}

double SampledField::l1() const {
  double s = 0.0;
  for (double v : values) s += std::abs(v);
  return s * lattice.cell_volume();
}

void accumulate_convolution(SampledField& out, const AtomicSum& f, const MeasureNodes& mu, const Mat& map) {
  const Lattice& L = out.lattice;
  const int d = L.dim();
  std::vector<Box> boxes;
  boxes.reserve(f.terms.size());
  for (const auto& t : f.terms) boxes.push_back(t.atom.bounding_box());
  Vec tmp(d), u(d);
  for (std::size_t i = 0; i < mu.points.size(); ++i) {
    const Vec shift = map * mu.points[i];
    const double w = mu.weights[i];
    for (std::size_t k = 0; k < f.terms.size(); ++k) {
      const auto& term = f.terms[k];
      const Atom& a = term.atom;
      const Vec base = a.region.origin + shift;
      const double c = w * term.lambda;
      for_cells_in(L, boxes[k].lo + shift, boxes[k].hi + shift, [&](std::int64_t cell, const Vec& x) {
        tmp.noalias() = x - base;
        u.noalias() = a.to_unit * tmp;
        for (int j = 0; j < d; ++j)
          if (u(j) < 0.0 || u(j) >= 1.0) return;
        out.values[static_cast<std::size_t>(cell)] += c * a.at_unit(u);
      });
    }
  }
}

Vec min_atom_extent(const AtomicSum& f) {
  if (f.terms.empty()) throw Error(ErrorCode::InputInvalid, "empty atomic sum");
  const int d = static_cast<int>(f.terms.front().atom.region.origin.size());
  Vec e = Vec::Constant(d, std::numeric_limits<double>::infinity());
  for (const auto& t : f.terms) {
    Box b = t.atom.bounding_box();
    e = e.cwiseMin(b.hi - b.lo);
  }
  return e;
}

void require_resolution(const Lattice& L, const AtomicSum& f) {
  Vec e = min_atom_extent(f);
  for (int i = 0; i < L.dim(); ++i)
    if (L.spacing(i) > e(i) / 8.0 * (1 + 1e-12))
      throw Error(ErrorCode::ResolutionTooCoarse, "spacing " + format_double(L.spacing(i)) + " on axis " +
                                                      std::to_string(i) + " exceeds atom extent / 8 = " +
                                                      format_double(e(i) / 8.0));
}

namespace {

// Panels (8 Gauss nodes each) per parameter axis so that map-images of
// neighbouring nodes are closer than min_extent / 16, and at least 16.
int panels_needed(const GraphSurface& S, const Mat& map, double width, double min_extent) {
  double lip = map.norm() * std::sqrt(1.0 + S.max_slope() * S.max_slope());
  // Gauss nodes are at most about (pi / 2) / 8 of a panel apart.
  double panel = (min_extent / 16.0) / lip * 8.0 / 1.6;
  // The floor keeps the cutoff bump itself integrated to about 1e-7.
  return std::max(16, static_cast<int>(std::ceil(width / panel)));
}

}  // namespace

MeasureNodes dense_nodes(const GraphSurface& S, const Mat& map, double min_extent) {
  int panels = panels_needed(S, map, 2.0 * S.cutoff_radius(), min_extent);
  if (std::pow(8.0 * panels, S.param_dim()) > 5e7) throw Error(ErrorCode::BudgetExceeded, "too many surface nodes");
  return S.quadrature(panels, 8);
}

MeasureNodes dense_nodes(const SurfacePartition& P, long rho, const Mat& map, double min_extent) {
  const auto& piece = P.pieces().at(static_cast<std::size_t>(rho));
  const GraphSurface& S = P.surface();
  const int m = S.param_dim();
  double width = (piece.support_hi - piece.support_lo).maxCoeff();
  int panels = panels_needed(S, map, width, min_extent);
  if (std::pow(8.0 * panels, m) > 5e7) throw Error(ErrorCode::BudgetExceeded, "too many piece nodes");
  std::vector<std::vector<double>> t(m), w(m);
  for (int i = 0; i < m; ++i) {
    double pw = (piece.support_hi(i) - piece.support_lo(i)) / panels;
    for (int k = 0; k < panels; ++k) {
      auto rule = gauss_legendre(8, piece.support_lo(i) + k * pw, piece.support_lo(i) + (k + 1) * pw);
      t[i].insert(t[i].end(), rule.nodes.begin(), rule.nodes.end());
      w[i].insert(w[i].end(), rule.weights.begin(), rule.weights.end());
    }
  }
  MeasureNodes out;
  const int n = 8 * panels;
  std::vector<int> idx(m, 0);
  while (true) {
    Vec y(m);
    double wt = 1.0;
    for (int i = 0; i < m; ++i) {
      y(i) = t[i][idx[i]];
      wt *= w[i][idx[i]];
    }
    wt *= P.bump(rho, y);
    if (wt > 0.0) {
      out.points.push_back(S.point(y));
      out.weights.push_back(wt);
    }
    int a = 0;
    while (a < m && ++idx[a] == n) idx[a++] = 0;
    if (a == m) break;
  }
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary field export assumes little endian");

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorCode::InputInvalid, "truncated field file");
  return v;
}

}  // namespace

void write_field_binary(const SampledField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::InputInvalid, "cannot write " + path);
  os.write("AMXF", 4);
  const int d = f.lattice.dim();
  put<std::int32_t>(os, d);
  for (int k : f.lattice.dims) put<std::int32_t>(os, k);
  for (int i = 0; i < d; ++i) put<double>(os, f.lattice.origin(i));
  for (int i = 0; i < d; ++i) put<double>(os, f.lattice.spacing(i));
  os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

SampledField read_field_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::InputInvalid, "cannot read " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "AMXF", 4) != 0) throw Error(ErrorCode::InputInvalid, "not a field file");
  const int d = get<std::int32_t>(is);
  if (d < 1 || d > 8) throw Error(ErrorCode::InputInvalid, "bad field dimension");
  Lattice L;
  L.dims.resize(d);
  L.origin.resize(d);
  L.spacing.resize(d);
  for (int i = 0; i < d; ++i) L.dims[i] = get<std::int32_t>(is);
  for (int i = 0; i < d; ++i) L.origin(i) = get<double>(is);
  for (int i = 0; i < d; ++i) L.spacing(i) = get<double>(is);
  SampledField f(L);
  is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!is) throw Error(ErrorCode::InputInvalid, "truncated field file");
  return f;
}

void write_field_csv(const SampledField& f, std::ostream& os) {
  const int d = f.lattice.dim();
  for (int i = 0; i < d; ++i) os << "x" << i << ",";
  os << "value\n";
  for (std::int64_t c = 0; c < f.lattice.size(); ++c) {
    Vec x = f.lattice.center(c);
    for (int i = 0; i < d; ++i) os << format_double(x(i)) << ",";
    os << format_double(f.values[static_cast<std::size_t>(c)]) << "\n";
  }
}

}  // namespace anisomax
