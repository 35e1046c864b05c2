#include "anisomax/surface_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace anisomax {

SampledField autocorrelation_kernel(const MeasureNodes& nu, const Lattice& grid, double max_spacing) {
  if (grid.spacing.maxCoeff() > max_spacing * (1 + 1e-12))
    throw Error(ErrorCode::ResolutionTooCoarse,
                "kernel spacing " + format_double(grid.spacing.maxCoeff()) + " above " + format_double(max_spacing));
  const int d = grid.dim();
  SampledField out(grid, "autocorrelation");
  const std::size_t n = nu.points.size();
  std::vector<int> base(d);
  std::vector<double> frac(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = nu.weights[i] * nu.weights[j];
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        double t = (nu.points[i](a) - nu.points[j](a) - grid.origin(a)) / grid.spacing(a) - 0.5;
        double f = std::floor(t);
        base[a] = static_cast<int>(f);
        frac[a] = t - f;
        if (base[a] < -1 || base[a] >= grid.dims[a]) inside = false;
      }
      if (!inside) continue;
      // Cloud in cell over the 2^d surrounding centers.
      for (int corner = 0; corner < (1 << d); ++corner) {
        double c = w;
        std::int64_t flat = 0;
        bool ok = true;
        for (int a = 0; a < d; ++a) {
          int bit = (corner >> a) & 1;
          int k = base[a] + bit;
          if (k < 0 || k >= grid.dims[a]) {
            ok = false;
            break;
          }
          c *= bit ? frac[a] : 1.0 - frac[a];
          flat = flat * grid.dims[a] + k;
        }
        if (ok) out.values[static_cast<std::size_t>(flat)] += c;
      }
    }
  }
  const double inv = 1.0 / grid.cell_volume();
  for (double& v : out.values) v *= inv;
  return out;
}

SampledField autocorrelation_kernel(const SurfacePartition& P, long rho, const Lattice& grid, int nodes_per_axis) {
  const auto& piece = P.pieces().at(static_cast<std::size_t>(rho));
  const GraphSurface& S = P.surface();
  const int m = S.param_dim();
  double width = (piece.support_hi - piece.support_lo).maxCoeff();
  double min_extent = width / nodes_per_axis * 4.0 * 1.6 * std::sqrt(1.0 + S.max_slope() * S.max_slope());
  MeasureNodes nu = dense_nodes(P, rho, Mat::Identity(m + 1, m + 1), min_extent);
  return autocorrelation_kernel(nu, grid, piece.radius / 8.0);
}

DecayFit check_kernel_decay(const SampledField& field, double r_lo, double r_hi, int bins) {
  if (!(r_lo > 0 && r_hi > r_lo) || bins < 3) throw Error(ErrorCode::DegenerateFit, "bad radius range");
  const double step = std::log(r_hi / r_lo) / bins;
  std::vector<double> best(bins, 0.0);
  for (std::int64_t c = 0; c < field.lattice.size(); ++c) {
    double r = field.lattice.center(c).norm();
    if (r < r_lo || r >= r_hi) continue;
    int b = std::min(bins - 1, static_cast<int>(std::log(r / r_lo) / step));
    best[b] = std::max(best[b], std::abs(field.values[static_cast<std::size_t>(c)]));
  }
  DecayFit fit;
  std::vector<double> xs, ys;
  for (int b = 0; b < bins; ++b) {
    double r = r_lo * std::exp((b + 0.5) * step);
    fit.radii.push_back(r);
    fit.maxima.push_back(best[b]);
    if (best[b] > 0) {
      xs.push_back(std::log(r));
      ys.push_back(std::log(best[b]));
    }
  }
  if (xs.size() < 3) throw Error(ErrorCode::DegenerateFit, "fewer than three nonempty annuli");
  LineFit lf = fit_line(xs, ys);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.pass = fit.slope <= -0.7;
  return fit;
}

double AtomGroup::lambda() const {
  double s = 0.0;
  for (const auto& t : atoms.terms) s += t.lambda;
  return s;
}

AtomGroup make_atom_group(const DilationStructure& D, const GridCube& q, int tau, int count, AtomProfile profile,
                          std::uint64_t seed) {
  Parallelepiped star = expand_cube(D, q, 2);
  auto [lo, hi] = star.bounds();
  std::vector<GridCube> inside;
  for (const auto& Q : enumerate_cover(D, 0, tau, Box{lo, hi}))
    if (cube_contains(star, D, Q)) inside.push_back(Q);
  if (inside.empty()) throw Error(ErrorCode::InputInvalid, "no cube of level " + std::to_string(tau) + " in q*");
  std::mt19937_64 rng(seed);
  std::shuffle(inside.begin(), inside.end(), rng);
  inside.resize(std::min<std::size_t>(inside.size(), static_cast<std::size_t>(std::max(count, 1))));
  std::sort(inside.begin(), inside.end());
  std::uniform_real_distribution<double> U(1.0, 2.0);
  AtomGroup g;
  g.q = q;
  g.atoms.dilation = &D;
  for (std::size_t i = 0; i < inside.size(); ++i)
    g.atoms.terms.push_back({make_atom(D, inside[i], profile, rng()), U(rng)});
  return g;
}

int atom_level_for_sigma(const DilationStructure& D, int sigma) {
  int best = 0;
  double err = std::numeric_limits<double>::infinity();
  for (int tau = -60; tau <= 60; ++tau) {
    double e = std::abs(std::log2(cube_diameter(D, tau)) - sigma);
    if (e < err) {
      err = e;
      best = tau;
    }
  }
  return best;
}

double cube_distance(const DilationStructure& D, const GridCube& a, const GridCube& b) {
  Parallelepiped pa = realize(D, a), pb = realize(D, b);
  if (D.matrix.isDiagonal()) {
    auto [alo, ahi] = pa.bounds();
    auto [blo, bhi] = pb.bounds();
    Vec gap = (alo - bhi).cwiseMax(blo - ahi).cwiseMax(0.0);
    return gap.norm();
  }
  // Between disjoint convex polygons the minimum is attained at a vertex.
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& v : pa.vertices()) best = std::min(best, distance_to(pb, v));
  for (const Vec& v : pb.vertices()) best = std::min(best, distance_to(pa, v));
  return best;
}

namespace {

Lattice lattice_for(const std::vector<const AtomicSum*>& fs, const MeasureNodes& nu) {
  const int d = static_cast<int>(nu.points.front().size());
  Vec mlo = nu.points.front(), mhi = mlo;
  for (const Vec& p : nu.points) {
    mlo = mlo.cwiseMin(p);
    mhi = mhi.cwiseMax(p);
  }
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity()), hi = -lo;
  Vec extent = lo;
  for (const AtomicSum* f : fs) {
    Box b = f->bounding_box();
    lo = lo.cwiseMin(b.lo + mlo);
    hi = hi.cwiseMax(b.hi + mhi);
    extent = extent.cwiseMin(min_atom_extent(*f));
  }
  std::vector<int> dims(d);
  for (int i = 0; i < d; ++i) dims[i] = static_cast<int>(std::ceil((hi(i) - lo(i)) / (extent(i) / 8.0)));
  double cells = 1.0;
  for (int k : dims) cells *= k;
  if (cells > 4e7) throw Error(ErrorCode::BudgetExceeded, "check lattice needs " + format_double(cells) + " cells");
  return Lattice::covering(Box{lo, hi}, dims);
}

double extent_floor(const AtomicSum& f) { return min_atom_extent(f).minCoeff(); }

MeasureNodes piece_nodes(const PieceRef& piece, double min_extent) {
  const int d = piece.partition->surface().dim();
  return dense_nodes(*piece.partition, piece.rho, Mat::Identity(d, d), min_extent);
}

}  // namespace

NormCheck check_linfty_bound(const AtomGroup& Aq, const PieceRef& piece, const DilationStructure& D, int sigma,
                             double epsilon, double zeta, double constant) {
  const SurfacePartition& P = *piece.partition;
  const SurfacePiece& sp = P.pieces().at(static_cast<std::size_t>(piece.rho));
  const int s = P.s();
  const int d = D.dim;
  MeasureNodes nu = piece_nodes(piece, extent_floor(Aq.atoms));
  SampledField F(lattice_for({&Aq.atoms}, nu), "A_q * mu_rho");
  accumulate_convolution(F, Aq.atoms, nu, Mat::Identity(d, d));
  NormCheck r;
  r.constant = constant;
  r.sup = F.max_abs();
  r.l1 = F.l1();
  const double lam = Aq.lambda();
  r.sup_rate = std::pow(2.0, -sigma + zeta * s) * lam;
  r.l1_rate = std::pow(2.0, (zeta + epsilon * (1 - d)) * s) * lam;
  r.sup_ratio = r.sup / r.sup_rate;
  r.l1_ratio = r.l1 / r.l1_rate;
  r.pass = r.sup_ratio <= constant && r.l1_ratio <= constant;
  r.excluded_piece = sp.in_I1 || sp.in_I2;
  if (r.excluded_piece)
    r.note = std::string("piece is in ") + (sp.in_I1 ? "I1" : "I2") +
             "; the bound is only claimed for pieces outside I1 u I2";
  return r;
}

double lattice_inner_product(const AtomicSum& f, const AtomicSum& g, const MeasureNodes& nu) {
  const int d = static_cast<int>(nu.points.front().size());
  Lattice L = lattice_for({&f, &g}, nu);
  SampledField F(L), G(L);
  accumulate_convolution(F, f, nu, Mat::Identity(d, d));
  accumulate_convolution(G, g, nu, Mat::Identity(d, d));
  double s = 0.0;
  for (std::size_t i = 0; i < F.values.size(); ++i) s += F.values[i] * G.values[i];
  return s * L.cell_volume();
}

PairCheck check_pair_bound(const AtomGroup& Aq, const AtomGroup& Aq2, const PieceRef& piece,
                           const DilationStructure& D, int sigma2, double epsilon, double constant) {
  const int s = piece.partition->s();
  const int d = D.dim;
  PairCheck r;
  r.constant = constant;
  r.distance = cube_distance(D, Aq.q, Aq2.q);
  if (r.distance < std::pow(2.0, sigma2) * (1 - 1e-12))
    throw Error(ErrorCode::InputInvalid, "pair bound needs d(q, q') >= 2^sigma'");
  MeasureNodes nu = piece_nodes(piece, std::min(extent_floor(Aq.atoms), extent_floor(Aq2.atoms)));
  r.inner = lattice_inner_product(Aq.atoms, Aq2.atoms, nu);
  r.rate = std::pow(2.0, sigma2 + epsilon * s * (5 - d)) * std::pow(r.distance, -2.0) * Aq.lambda() * Aq2.lambda();
  r.ratio = std::abs(r.inner) / r.rate;
  r.pass = r.ratio <= constant;
  return r;
}

}  // namespace anisomax
