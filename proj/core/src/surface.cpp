#include "anisomax/surface.hpp"

#include "anisomax/atoms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <set>

namespace anisomax {

double MeasureNodes::mass() const {
  double m = 0.0;
  for (double w : weights) m += w;
  return m;
}

namespace {

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

// Integral of the bump over (-1, 1).
double bump_integral() {
  static const double value = [] {
    double total = 0.0;
    for (int panel = 0; panel < 16; ++panel) {
      double lo = -1.0 + panel * 0.125;
      auto rule = gauss_legendre(16, lo, lo + 0.125);
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) total += rule.weights[i] * bump(rule.nodes[i]);
    }
    return total;
  }();
  return value;
}

// Walks the tensor grid of n points per axis in dimension m.
template <class F>
void for_each_multi(int m, int n, F&& f) {
  std::vector<int> idx(m, 0);
  if (m == 0) {
    f(idx);
    return;
  }
  while (true) {
    f(idx);
    int a = 0;
    while (a < m && ++idx[a] == n) idx[a++] = 0;
    if (a == m) return;
  }
}

}  // namespace

double GraphSurface::default_cutoff(int d) {
  if (d <= 2) return 0.8;
  if (d == 3) return 0.6;
  return 0.45;
}

GraphSurface GraphSurface::make(Kind kind, int d, double cutoff_radius) {
  if (kind == Kind::CustomPolynomial) return custom(d, {}, cutoff_radius);
  if (d < 2) throw Error(ErrorCode::InputInvalid, "surface needs d >= 2");
  GraphSurface S;
  S.kind_ = kind;
  S.d_ = d;
  S.radius_ = cutoff_radius > 0 ? cutoff_radius : default_cutoff(d);
  S.finish();
  return S;
}

GraphSurface GraphSurface::custom(int d, std::vector<Monomial> terms, double cutoff_radius) {
  if (d < 2) throw Error(ErrorCode::InputInvalid, "surface needs d >= 2");
  for (const auto& t : terms) {
    if (static_cast<int>(t.powers.size()) != d - 1)
      throw Error(ErrorCode::InputInvalid, "monomial arity must be d-1");
    int deg = 0;
    for (int p : t.powers) {
      if (p < 0) throw Error(ErrorCode::InputInvalid, "negative exponent");
      deg += p;
    }
    if (deg > 6) throw Error(ErrorCode::InputInvalid, "custom polynomial degree above 6");
  }
  GraphSurface S;
  S.kind_ = Kind::CustomPolynomial;
  S.d_ = d;
  S.radius_ = cutoff_radius > 0 ? cutoff_radius : default_cutoff(d);
  S.terms_ = std::move(terms);
  S.finish();
  return S;
}

GraphSurface GraphSurface::from_name(const std::string& name, int d, double cutoff_radius) {
  if (name == "circle-arc") return make(Kind::CircleArc, d, cutoff_radius);
  if (name == "paraboloid") return make(Kind::Paraboloid, d, cutoff_radius);
  if (name == "quartic-flat") return make(Kind::QuarticFlat, d, cutoff_radius);
  throw Error(ErrorCode::ConfigInvalid, "unknown surface '" + name + "'");
}

std::string GraphSurface::catalog_id() const {
  switch (kind_) {
    case Kind::CircleArc: return "circle-arc";
    case Kind::Paraboloid: return "paraboloid";
    case Kind::QuarticFlat: return "quartic-flat";
    case Kind::CustomPolynomial: return "custom-polynomial";
  }
  return "?";
}

void GraphSurface::finish() {
  const int m = d_ - 1;
  if (kind_ == Kind::CircleArc && radius_ * std::sqrt(double(m)) >= 1.0)
    throw Error(ErrorCode::InputInvalid, "circle-arc cutoff leaves the unit sphere chart");
  // Sample the cutoff box; catalog slopes and Hessians are radial so the corners
  // dominate, custom polynomials get the grid maximum (padded below).
  const int n = m == 1 ? 401 : (m == 2 ? 81 : 21);
  max_slope_ = 0.0;
  max_hessian_ = 0.0;
  for_each_multi(m, n, [&](const std::vector<int>& idx) {
    Vec y(m);
    for (int i = 0; i < m; ++i) y(i) = -radius_ + 2.0 * radius_ * idx[i] / (n - 1);
    max_slope_ = std::max(max_slope_, gradient(y).norm());
    max_hessian_ = std::max(max_hessian_, hessian(y).norm());
    if (point(y).norm() > 1.0 + 1e-12)
      throw Error(ErrorCode::InputInvalid, catalog_id() + " leaves the unit ball on its cutoff box");
  });
  if (kind_ == Kind::CustomPolynomial) {
    max_slope_ *= 1.05;
    max_hessian_ *= 1.05;
  }
}

double GraphSurface::psi(const Vec& y) const {
  switch (kind_) {
    case Kind::CircleArc: return 1.0 - std::sqrt(1.0 - y.squaredNorm());
    case Kind::Paraboloid: return 0.5 * y.squaredNorm();
    case Kind::QuarticFlat: return y.array().pow(4).sum();
    case Kind::CustomPolynomial: {
      double v = 0.0;
      for (const auto& t : terms_) {
        double p = t.coeff;
        for (int i = 0; i < y.size(); ++i) p *= ipow(y(i), t.powers[i]);
        v += p;
      }
      return v;
    }
  }
  return 0.0;
}

Vec GraphSurface::gradient(const Vec& y) const {
  const int m = static_cast<int>(y.size());
  switch (kind_) {
    case Kind::CircleArc: return y / std::sqrt(1.0 - y.squaredNorm());
    case Kind::Paraboloid: return y;
    case Kind::QuarticFlat: return 4.0 * y.array().pow(3).matrix();
    case Kind::CustomPolynomial: {
      Vec g = Vec::Zero(m);
      for (const auto& t : terms_) {
        for (int a = 0; a < m; ++a) {
          if (t.powers[a] == 0) continue;
          double p = t.coeff * t.powers[a];
          for (int i = 0; i < m; ++i) p *= ipow(y(i), t.powers[i] - (i == a ? 1 : 0));
          g(a) += p;
        }
      }
      return g;
    }
  }
  return Vec::Zero(m);
}

Mat GraphSurface::hessian(const Vec& y) const {
  const int m = static_cast<int>(y.size());
  switch (kind_) {
    case Kind::CircleArc: {
      double s2 = 1.0 - y.squaredNorm();
      double s = std::sqrt(s2);
      return Mat::Identity(m, m) / s + y * y.transpose() / (s2 * s);
    }
    case Kind::Paraboloid: return Mat::Identity(m, m);
    case Kind::QuarticFlat: return (12.0 * y.array().square()).matrix().asDiagonal();
    case Kind::CustomPolynomial: {
      Mat H = Mat::Zero(m, m);
      for (const auto& t : terms_) {
        for (int a = 0; a < m; ++a) {
          for (int b = 0; b < m; ++b) {
            std::vector<int> pw = t.powers;
            double c = t.coeff * pw[a];
            pw[a] -= 1;
            if (pw[a] < 0) continue;
            c *= pw[b];
            pw[b] -= 1;
            if (pw[b] < 0 || c == 0.0) continue;
            for (int i = 0; i < m; ++i) c *= ipow(y(i), pw[i]);
            H(a, b) += c;
          }
        }
      }
      return H;
    }
  }
  return Mat::Zero(m, m);
}

double GraphSurface::chi(const Vec& y) const {
  double v = 1.0;
  for (int i = 0; i < y.size(); ++i) v *= bump(y(i) / radius_);
  return v;
}

Vec GraphSurface::point(const Vec& y) const {
  Vec x(d_);
  x.head(d_ - 1) = y;
  x(d_ - 1) = psi(y);
  return x;
}

double GraphSurface::mass() const { return std::pow(radius_ * bump_integral(), d_ - 1); }

MeasureNodes GraphSurface::quadrature(int panels_per_axis, int nodes_per_panel) const {
  const int m = d_ - 1;
  std::vector<double> t, w;
  const double width = 2.0 * radius_ / panels_per_axis;
  for (int p = 0; p < panels_per_axis; ++p) {
    auto rule = gauss_legendre(nodes_per_panel, -radius_ + p * width, -radius_ + (p + 1) * width);
    t.insert(t.end(), rule.nodes.begin(), rule.nodes.end());
    w.insert(w.end(), rule.weights.begin(), rule.weights.end());
  }
  MeasureNodes out;
  for_each_multi(m, static_cast<int>(t.size()), [&](const std::vector<int>& idx) {
    Vec y(m);
    double wt = 1.0;
    for (int i = 0; i < m; ++i) {
      y(i) = t[idx[i]];
      wt *= w[idx[i]];
    }
    wt *= chi(y);
    if (wt <= 0.0) return;
    out.points.push_back(point(y));
    out.weights.push_back(wt);
  });
  return out;
}

double gaussian_curvature(const GraphSurface& S, const Vec& y) {
  const int d = S.dim();
  double g2 = S.gradient(y).squaredNorm();
  return S.hessian(y).determinant() / std::pow(1.0 + g2, 0.5 * (d + 1));
}

std::shared_ptr<const SupportSample> support_sample(const GraphSurface& S, int per_axis) {
  const int m = S.param_dim();
  const double R = S.cutoff_radius();
  const double step = 2.0 * R / (per_axis - 1);
  std::vector<Vec> pts;
  for_each_multi(m, per_axis, [&](const std::vector<int>& idx) {
    Vec y(m);
    for (int i = 0; i < m; ++i) y(i) = -R + step * idx[i];
    pts.push_back(S.point(y));
  });
  // Any parameter point is within step/2 per axis of a grid point; the graph is
  // Lipschitz with constant sqrt(1 + G^2).
  double radius = 0.5 * step * std::sqrt(double(m)) * std::sqrt(1.0 + S.max_slope() * S.max_slope());
  return std::make_shared<SupportSample>(std::move(pts), radius * (1.0 + 1e-9));
}

// ---------------------------------------------------------------------------

SurfacePartition::SurfacePartition(const GraphSurface& S, int s, double epsilon, int nodes_per_axis)
    : surface_(S), s_(s), epsilon_(epsilon) {
  if (s < 0) throw Error(ErrorCode::InputInvalid, "s must be nonnegative");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InputInvalid, "epsilon must lie in (0,1)");
  const int m = S.param_dim();
  const double R = S.cutoff_radius();
  const double G = S.max_slope();
  const double diam = std::pow(2.0, -epsilon * s);
  // Support side 1.5h with ambient diameter 1.5h sqrt(m) sqrt(1+G^2) <= 2^{-eps s}.
  double h_max = diam / (1.5 * std::sqrt(double(m)) * std::sqrt(1.0 + G * G));
  double n = std::ceil(2.0 * R / h_max - 1e-12);
  if (std::pow(n, m) > double(kPieceBudget))
    throw Error(ErrorCode::BudgetExceeded, "partition needs " + format_double(std::pow(n, m)) + " pieces");
  n_ = std::max(1, static_cast<int>(n));
  h_ = 2.0 * R / n_;
  // One panel grid of width h/4 shared by all caps: each support is a union of
  // panels, so the cap masses add up to the global quadrature of chi.
  const int per_panel = std::max(2, (nodes_per_axis + 5) / 6);
  const double pw = 0.25 * h_;
  const QuadratureRule unit = gauss_legendre(per_panel, 0.0, 1.0);

  for_each_multi(m, n_, [&](const std::vector<int>& cell) {
    SurfacePiece p;
    p.s = s;
    p.rho = index_of(cell);
    p.cell = cell;
    p.radius = diam;
    p.center.resize(m);
    p.support_lo.resize(m);
    p.support_hi.resize(m);
    for (int i = 0; i < m; ++i) {
      p.center(i) = -R + (cell[i] + 0.5) * h_;
      p.support_lo(i) = std::max(-R, p.center(i) - 0.75 * h_);
      p.support_hi(i) = std::min(R, p.center(i) + 0.75 * h_);
    }
    pieces_.push_back(std::move(p));
  });

  for (auto& p : pieces_) {
    std::vector<std::vector<double>> t(m), w(m);
    for (int i = 0; i < m; ++i) {
      int first = std::max(0, 4 * p.cell[i] - 1);
      int last = std::min(4 * n_, 4 * p.cell[i] + 5);
      for (int k = first; k < last; ++k)
        for (int j = 0; j < per_panel; ++j) {
          t[i].push_back(-R + (k + unit.nodes[j]) * pw);
          w[i].push_back(unit.weights[j] * pw);
        }
    }
    std::vector<int> sizes(m);
    for (int i = 0; i < m; ++i) sizes[i] = static_cast<int>(t[i].size());
    for_each_multi(m, *std::max_element(sizes.begin(), sizes.end()), [&](const std::vector<int>& idx) {
      for (int i = 0; i < m; ++i)
        if (idx[i] >= sizes[i]) return;
      Vec y(m);
      double wt = 1.0;
      for (int i = 0; i < m; ++i) {
        y(i) = t[i][idx[i]];
        wt *= w[i][idx[i]];
      }
      wt *= bump(p.rho, y);
      if (wt <= 0.0) return;
      p.params.push_back(y);
      p.nodes.points.push_back(S.point(y));
      p.nodes.weights.push_back(wt);
    });
  }
}

long SurfacePartition::index_of(const std::vector<int>& cell) const {
  long r = 0;
  for (std::size_t i = cell.size(); i-- > 0;) r = r * n_ + cell[i];
  return r;
}

double SurfacePartition::bump(long rho, const Vec& y) const {
  const double R = surface_.cutoff_radius();
  const std::vector<int>& mine = pieces_[rho].cell;
  // The tensor bumps normalize axis by axis: sum over cells of prod_i phi_i is
  // prod_i of the per-axis sums over the three neighbouring cells.
  double v = surface_.chi(y);
  for (int i = 0; i < y.size() && v != 0.0; ++i) {
    double t = (y(i) + R) / h_ - 0.5;  // cell coordinate of y_i
    double own = anisomax::bump((t - mine[i]) / 0.75);
    if (own == 0.0) return 0.0;
    int base = std::clamp(static_cast<int>(std::floor(t + 0.5)), 0, n_ - 1);
    double total = 0.0;
    for (int c = std::max(0, base - 1); c <= std::min(n_ - 1, base + 1); ++c) total += anisomax::bump((t - c) / 0.75);
    v *= own / total;
  }
  return v;
}

SurfacePartition partition_measure(const GraphSurface& S, int s, double epsilon, int nodes_per_axis) {
  return SurfacePartition(S, s, epsilon, nodes_per_axis);
}

// ---------------------------------------------------------------------------

double piece_mass_in_cube(const SurfacePartition& P, long rho, const DilationStructure& D, const GridCube& Q,
                          int max_depth) {
  const SurfacePiece& piece = P.pieces()[rho];
  const GraphSurface& S = P.surface();
  const int m = S.param_dim();
  const Parallelepiped cube = realize(D, Q);
  const Mat to_unit = cube.edges.inverse();
  const int last = D.dim - 1;
  const double curv = S.max_hessian();
  if (max_depth <= 0) max_depth = m == 1 ? 60 : (m == 2 ? 16 : 10);
  long budget = 200000;

  auto [lo, hi] = cube.bounds();
  Vec a(m), b(m);
  for (int i = 0; i < m; ++i) {
    a(i) = std::max(lo(i), piece.support_lo(i));
    b(i) = std::min(hi(i), piece.support_hi(i));
    if (a(i) >= b(i)) return 0.0;
  }
  static const QuadratureRule g4 = gauss_legendre(4, 0.0, 1.0);
  {
    // Cells far below the thinnest slab of Q add nothing to the accuracy.
    double thin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < D.dim; ++j) thin = std::min(thin, 1.0 / to_unit.row(j).norm());
    double width = (b - a).maxCoeff() * std::sqrt(1.0 + S.max_slope() * S.max_slope());
    int needed = static_cast<int>(std::ceil(std::log2(std::max(1.0, width / thin)))) + 12;
    max_depth = std::min(max_depth, needed);
  }

  // Branch and bound on u = M (x(y) - o): first-order model at the box centre
  // plus a Hessian remainder decides boxes wholly inside or outside Q.
  std::function<double(const Vec&, const Vec&, int)> walk = [&](const Vec& l, const Vec& h, int depth) -> double {
    Vec yc = 0.5 * (l + h);
    Vec half = 0.5 * (h - l);
    Vec u = to_unit * (S.point(yc) - cube.origin);
    Vec g = S.gradient(yc);
    bool inside = true;
    for (int j = 0; j < D.dim; ++j) {
      Vec grad = to_unit.row(j).head(m).transpose() + to_unit(j, last) * g;
      double slack = grad.cwiseAbs().dot(half) + 0.5 * std::abs(to_unit(j, last)) * curv * half.squaredNorm();
      if (u(j) + slack < 0.0 || u(j) - slack >= 1.0) return 0.0;
      if (u(j) - slack < 0.0 || u(j) + slack >= 1.0) inside = false;
    }
    double vol = (h - l).prod();
    if (inside) {
      double sum = 0.0;
      for_each_multi(m, 4, [&](const std::vector<int>& idx) {
        Vec y(m);
        double w = vol;
        for (int i = 0; i < m; ++i) {
          y(i) = l(i) + g4.nodes[idx[i]] * (h(i) - l(i));
          w *= g4.weights[idx[i]];
        }
        sum += w * P.bump(rho, y);
      });
      return sum;
    }
    if (depth >= max_depth || --budget < 0) return cube_has_point(D, Q, S.point(yc)) ? vol * P.bump(rho, yc) : 0.0;
    double sum = 0.0;
    for_each_multi(m, 2, [&](const std::vector<int>& idx) {
      Vec cl(m), ch(m);
      for (int i = 0; i < m; ++i) {
        cl(i) = idx[i] ? yc(i) : l(i);
        ch(i) = idx[i] ? h(i) : yc(i);
      }
      sum += walk(cl, ch, depth + 1);
    });
    return sum;
  };
  return walk(a, b, 0);
}

void classify_pieces(SurfacePartition& P, const DilationStructure& D, double zeta, const ClassifyOptions& opt) {
  if (D.dim != P.surface().dim()) throw Error(ErrorCode::InputInvalid, "dimension mismatch");
  const int s = P.s();
  const double curvature_cut = std::pow(2.0, -P.epsilon() * s);
  const double mass_cut = std::pow(2.0, zeta * s);
  int tau_lo = opt.tau_lo, tau_hi = opt.tau_hi;
  if (tau_lo > tau_hi) {
    tau_lo = -s - 8;
    tau_hi = 0;
  }
  const int d = D.dim;

  for (auto& piece : P.pieces()) {
    double min_k = std::numeric_limits<double>::infinity();
    for (const Vec& y : piece.params) min_k = std::min(min_k, std::abs(gaussian_curvature(P.surface(), y)));
    piece.min_abs_curvature = min_k;
    piece.in_I1 = min_k < curvature_cut * (1.0 - 1e-12);

    Vec blo = piece.nodes.points.front(), bhi = blo;
    for (const Vec& x : piece.nodes.points) {
      blo = blo.cwiseMin(x);
      bhi = bhi.cwiseMax(x);
    }
    piece.max_mass_ratio = 0.0;
    for (int tau = tau_lo; tau <= tau_hi; ++tau) {
      const double volume = std::pow(D.det_scale, tau);
      const double diam = cube_diameter(D, tau);
      auto [clo, chi] = realize(D, GridCube{0, tau, std::vector<std::int64_t>(d, 0)}).bounds();
      double estimate = 1.0;
      for (int i = 0; i < d; ++i) estimate *= (bhi(i) - blo(i)) / (chi(i) - clo(i)) + 2.0;
      std::vector<GridCube> cubes;
      if (estimate <= opt.enumerate_limit) {
        Box box{(blo.array() - 1e-12).matrix(), (bhi.array() + 1e-12).matrix()};
        cubes = enumerate_cover(D, 0, tau, box);
      } else {
        std::set<GridCube> seen;
        const std::size_t count = piece.nodes.points.size();
        const std::size_t stride = std::max<std::size_t>(1, count / std::max(1, opt.probe_nodes));
        for (std::size_t i = stride / 2; i < count; i += stride) seen.insert(locate(D, 0, tau, piece.nodes.points[i]));
        cubes.assign(seen.begin(), seen.end());
      }
      for (const auto& Q : cubes) {
        double mu = piece_mass_in_cube(P, piece.rho, D, Q, opt.mass_depth);
        double ratio = mu * diam / volume;
        if (ratio > piece.max_mass_ratio) {
          piece.max_mass_ratio = ratio;
          piece.worst_cube = Q;
        }
      }
    }
    piece.in_I2 = piece.max_mass_ratio > mass_cut;
    piece.window_edge = piece.max_mass_ratio > 0 &&
                        (piece.worst_cube.tau == tau_lo || (piece.worst_cube.tau == tau_hi && tau_hi < 0));
  }
}

MercuryReport mercury_check(const GraphSurface& S, const DilationStructure& D, double epsilon, double zeta,
                            const std::vector<int>& s_values, const ClassifyOptions& opt, int nodes_per_axis) {
  std::vector<int> distinct = s_values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw Error(ErrorCode::DegenerateFit, "mercury_check needs at least two values of s");
  MercuryReport report;
  std::vector<double> xs, ys;
  for (int s : distinct) {
    SurfacePartition P = partition_measure(S, s, epsilon, nodes_per_axis);
    classify_pieces(P, D, zeta, opt);
    MercuryRow row;
    row.s = s;
    row.pieces = static_cast<long>(P.pieces().size());
    for (const auto& p : P.pieces()) {
      row.in_I1 += p.in_I1;
      row.in_I2 += p.in_I2;
      row.flagged += (p.in_I1 || p.in_I2);
      row.window_edge += p.window_edge;
    }
    report.rows.push_back(row);
    xs.push_back(s);
    ys.push_back(std::log2(double(row.flagged) + 1.0));
  }
  report.growth = fit_line(xs, ys).slope;
  report.eta = (S.dim() - 1) * epsilon - report.growth;
  return report;
}

}  // namespace anisomax
