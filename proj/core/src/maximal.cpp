#include "anisomax/maximal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anisomax {

MeasureRef MeasureRef::whole(const GraphSurface& S) {
  MeasureRef m;
  m.surface = &S;
  return m;
}

MeasureRef MeasureRef::piece(const SurfacePartition& P, long rho) {
  if (rho < 0 || rho >= static_cast<long>(P.pieces().size()))
    throw Error(ErrorCode::InputInvalid, "piece index " + std::to_string(rho) + " out of range");
  MeasureRef m;
  m.surface = &P.surface();
  m.partition = &P;
  m.rho = rho;
  return m;
}

const GraphSurface& MeasureRef::graph() const {
  if (!surface) throw Error(ErrorCode::InputInvalid, "empty measure reference");
  return *surface;
}

MeasureNodes MeasureRef::nodes(const Mat& map, double min_extent) const {
  if (partition) return dense_nodes(*partition, rho, map, min_extent);
  return dense_nodes(graph(), map, min_extent);
}

double MeasureRef::mass() const {
  if (partition) return partition->pieces()[static_cast<std::size_t>(rho)].nodes.mass();
  return graph().mass();
}

Box MeasureRef::support_box() const {
  const GraphSurface& S = graph();
  const int m = S.param_dim();
  Vec plo = Vec::Constant(m, -S.cutoff_radius()), phi = Vec::Constant(m, S.cutoff_radius());
  if (partition) {
    const auto& p = partition->pieces()[static_cast<std::size_t>(rho)];
    plo = p.support_lo;
    phi = p.support_hi;
  }
  const int n = 32;
  Vec lo = Vec::Constant(m + 1, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  std::vector<int> idx(m, 0);
  Vec y(m);
  while (true) {
    for (int i = 0; i < m; ++i) y(i) = plo(i) + (phi(i) - plo(i)) * idx[i] / n;
    Vec x = S.point(y);
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
    int a = 0;
    while (a < m && ++idx[a] > n) idx[a++] = 0;
    if (a == m) break;
  }
  // Height between samples moves by at most slope * step.
  double pad = S.max_slope() * (phi - plo).maxCoeff() / n;
  lo(m) -= pad;
  hi(m) += pad;
  return {lo, hi};
}

std::string MeasureRef::id() const {
  std::string s = graph().catalog_id();
  if (partition) s += "/s" + std::to_string(partition->s()) + "/rho" + std::to_string(rho);
  return s;
}

SampledField convolve_dilated(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, int k,
                              const Lattice& L) {
  require_resolution(L, f);
  const Mat map = D.power(k);
  SampledField out(L, "k=" + std::to_string(k) + " mu=" + mu.id());
  accumulate_convolution(out, f, mu.nodes(map, min_atom_extent(f).minCoeff()), map);
  return out;
}

namespace {

Box image_box(const Mat& M, const Box& b) {
  const int d = static_cast<int>(b.lo.size());
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity()), hi = -lo;
  for (int c = 0; c < (1 << d); ++c) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = (c >> i & 1) ? b.hi(i) : b.lo(i);
    Vec w = M * v;
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  return {lo, hi};
}

}  // namespace

Box dilated_support_box(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k) {
  if (k.lo > k.hi) throw Error(ErrorCode::InputInvalid, "empty k range");
  const Box fb = f.bounding_box();
  const Box mb = mu.support_box();
  Vec lo = Vec::Constant(D.dim, std::numeric_limits<double>::infinity()), hi = -lo;
  for (int j = k.lo; j <= k.hi; ++j) {
    Box b = image_box(D.power(j), mb);
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  return {fb.lo + lo, fb.hi + hi};
}

Lattice covering_lattice(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                         const std::vector<int>& dims) {
  return Lattice::covering(dilated_support_box(D, f, mu, k), dims);
}

bool lattice_covers(const Lattice& L, const Box& b) {
  const Box lb = L.box();
  for (int i = 0; i < L.dim(); ++i)
    if (lb.lo(i) > b.lo(i) + 1e-12 || lb.hi(i) < b.hi(i) - 1e-12) return false;
  return true;
}

MaximalField maximal_field(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                           const Lattice& L, const MaximalOptions& opt) {
  if (k.lo > k.hi) throw Error(ErrorCode::InputInvalid, "empty k range");
  const std::size_t n = static_cast<std::size_t>(L.size());
  MaximalField out;
  out.range = k;
  out.field = SampledField(L, "max k in [" + std::to_string(k.lo) + "," + std::to_string(k.hi) + "] mu=" + mu.id());
  out.argmax.assign(n, k.lo);
  // Running max over interior k, plus the two end fields kept apart.
  std::vector<double> inner(n, 0.0), lo_abs, hi_abs;
  std::vector<int> inner_arg(n, k.lo);
  for (int j = k.lo; j <= k.hi; ++j) {
    SampledField F = convolve_dilated(D, f, mu, j, L);
    double mx = 0.0;
    for (double& v : F.values) {
      v = std::abs(v);
      mx = std::max(mx, v);
    }
    out.per_k_max.push_back(mx);
    if (j == k.lo) {
      lo_abs = std::move(F.values);
    } else if (j == k.hi) {
      hi_abs = std::move(F.values);
    } else {
      for (std::size_t c = 0; c < n; ++c)
        if (F.values[c] > inner[c]) {
          inner[c] = F.values[c];
          inner_arg[c] = j;
        }
    }
  }
  if (hi_abs.empty()) hi_abs.assign(n, 0.0);

  double gain_lo = 0.0, gain_hi = 0.0, top = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double v = inner[c];
    int arg = inner_arg[c];
    if (hi_abs[c] > v) {
      v = hi_abs[c];
      arg = k.hi;
    }
    if (lo_abs[c] > v) {
      v = lo_abs[c];
      arg = k.lo;
    }
    out.field.values[c] = v;
    out.argmax[c] = arg;
    top = std::max(top, v);
    gain_lo = std::max(gain_lo, v - std::max(inner[c], k.lo == k.hi ? 0.0 : hi_abs[c]));
    gain_hi = std::max(gain_hi, v - std::max(inner[c], lo_abs[c]));
  }
  if (k.lo == k.hi) gain_hi = gain_lo;
  out.lower_tail = top > 0 ? gain_lo / top : 0.0;
  out.upper_tail = top > 0 ? gain_hi / top : 0.0;
  out.tail_ok = out.lower_tail < opt.tail_tolerance && out.upper_tail < opt.tail_tolerance;
  out.covers = lattice_covers(L, dilated_support_box(D, f, mu, k));
  if (!out.tail_ok) {
    out.warning = std::string(to_string(ErrorCode::TailNotNegligible)) + ": end k raise the field by " +
                  format_double(out.lower_tail) + " (k=" + std::to_string(k.lo) + ") and " +
                  format_double(out.upper_tail) + " (k=" + std::to_string(k.hi) + ") of its max";
    if (opt.throw_on_tail) throw Error(ErrorCode::TailNotNegligible, out.warning);
  }
  return out;
}

std::vector<double> log_thresholds(double max, int count, double lo_frac) {
  if (!(max > 0) || count < 1 || !(lo_frac > 0) || lo_frac > 1)
    throw Error(ErrorCode::InputInvalid, "threshold grid needs max > 0, count >= 1, lo_frac in (0, 1]");
  std::vector<double> t(count);
  for (int i = 0; i < count; ++i) {
    double e = count == 1 ? 0.0 : std::log(lo_frac) * (1.0 - static_cast<double>(i) / (count - 1));
    t[i] = max * std::exp(e);
  }
  return t;
}

DistributionReport distribution_function(const SampledField& F, const std::vector<double>& thresholds,
                                         const ExclusionSet& E) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw Error(ErrorCode::InputInvalid, "thresholds must be ascending");
  DistributionReport r;
  r.thresholds = thresholds;
  const double floor = thresholds.empty() ? 0.0 : thresholds.front();
  std::vector<double> kept;
  for (std::size_t c = 0; c < F.values.size(); ++c) {
    const double v = F.values[c];
    if (!(v > floor)) continue;
    if (E && E(F.lattice.center(static_cast<std::int64_t>(c)))) {
      ++r.excluded_cells;
      continue;
    }
    kept.push_back(v);
  }
  std::sort(kept.begin(), kept.end());
  const double vol = F.lattice.cell_volume();
  for (double t : thresholds) {
    auto it = std::upper_bound(kept.begin(), kept.end(), t);
    double m = static_cast<double>(kept.end() - it) * vol;
    r.measures.push_back(m);
    if (t * m > r.weak_ratio) {
      r.weak_ratio = t * m;
      r.argmax_threshold = t;
    }
  }
  return r;
}

WeakTypeResult weak_type(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                         const Lattice& L, const ExclusionSet& E, const MaximalOptions& opt) {
  const double h1 = f.h1_norm();
  if (!(h1 > 0)) throw Error(ErrorCode::InputInvalid, "f has zero H1 norm");
  WeakTypeResult r;
  r.maximal = maximal_field(D, f, mu, k, L, opt);
  const double top = r.maximal.field.max_abs();
  r.distribution = top > 0 ? distribution_function(r.maximal.field, log_thresholds(top), E) : DistributionReport{};
  r.distribution.h1 = h1;
  r.ratio = r.distribution.weak_ratio / h1;
  return r;
}

double weak_type_ratio(const DilationStructure& D, const AtomicSum& f, const MeasureRef& mu, KRange k,
                       const Lattice& L, const ExclusionSet& E) {
  return weak_type(D, f, mu, k, L, E).ratio;
}

}  // namespace anisomax
