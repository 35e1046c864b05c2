#include "anisomax/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>
#include <numbers>
#include <random>

namespace anisomax {
namespace {

Vec cofactor_normal(const std::vector<Vec>& rows, int d) {
  // Generalized cross product of d-1 vectors in R^d.
  Vec n(d);
  Mat M(d - 1, d);
  for (int r = 0; r < d - 1; ++r) M.row(r) = rows[static_cast<std::size_t>(r)].transpose();
  for (int i = 0; i < d; ++i) {
    Mat minor(d - 1, d - 1);
    for (int c = 0, cc = 0; c < d; ++c) {
      if (c == i) continue;
      minor.col(cc++) = M.col(c);
    }
    const double det = d - 1 == 0 ? 1.0 : minor.determinant();
    n(i) = (i % 2 == 0 ? 1.0 : -1.0) * det;
  }
  return n;
}

std::vector<Vec> separating_axes(const std::vector<Vec>& dirs, int d) {
  std::vector<Vec> axes;
  if (d == 1) {
    axes.push_back(Vec::Ones(1));
    return axes;
  }
  const int m = static_cast<int>(dirs.size());
  std::vector<int> pick(static_cast<std::size_t>(d - 1));
  for (int i = 0; i < d - 1; ++i) pick[static_cast<std::size_t>(i)] = i;
  while (true) {
    std::vector<Vec> rows;
    for (int i : pick) rows.push_back(dirs[static_cast<std::size_t>(i)]);
    Vec n = cofactor_normal(rows, d);
    double scale = 1.0;
    for (const auto& r : rows) scale *= std::max(r.norm(), 1e-300);
    if (n.norm() > 1e-10 * scale) axes.push_back(n / n.norm());
    int k = d - 2;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == m - (d - 1) + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < d - 1; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return axes;
}

std::pair<double, double> project(const Parallelepiped& p, const Vec& axis) {
  double lo = p.origin.dot(axis);
  double hi = lo;
  for (Eigen::Index j = 0; j < p.edges.cols(); ++j) {
    const double e = p.edges.col(j).dot(axis);
    if (e < 0) lo += e; else hi += e;
  }
  return {lo, hi};
}

bool overlaps(std::pair<double, double> a, std::pair<double, double> b) {
  const double overlap = std::min(a.second, b.second) - std::max(a.first, b.first);
  const double tol = 1e-9 * ((a.second - a.first) + (b.second - b.first));
  return overlap > tol;
}

Mat pullback(const DilationStructure& D, int sigma, int tau) {
  return std::ldexp(1.0, -sigma) * D.power(-tau);
}

}  // namespace

std::string to_string(const GridCube& c) {
  std::string s = "(" + std::to_string(c.sigma) + "," + std::to_string(c.tau) + ",[";
  for (std::size_t i = 0; i < c.index.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(c.index[i]);
  }
  return s + "])";
}

double Parallelepiped::diameter() const {
  const int d = dim();
  std::vector<int> digits(static_cast<std::size_t>(d), -1);
  double best = 0.0;
  Vec u(d);
  while (true) {
    for (int i = 0; i < d; ++i) u(i) = digits[static_cast<std::size_t>(i)];
    best = std::max(best, (edges * u).norm());
    int i = 0;
    while (i < d && digits[static_cast<std::size_t>(i)] == 1) digits[static_cast<std::size_t>(i++)] = -1;
    if (i == d) break;
    ++digits[static_cast<std::size_t>(i)];
  }
  return best;
}

std::vector<Vec> Parallelepiped::vertices() const {
  const int d = dim();
  std::vector<Vec> out;
  out.reserve(std::size_t{1} << d);
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    Vec v = origin;
    for (int i = 0; i < d; ++i)
      if (mask & (1u << i)) v += edges.col(i);
    out.push_back(v);
  }
  return out;
}

bool Parallelepiped::contains(const Vec& x, double tol) const {
  const Vec t = edges.partialPivLu().solve(x - origin);
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (t(i) < -tol || t(i) > 1.0 + tol) return false;
  return true;
}

std::pair<Vec, Vec> Parallelepiped::bounds() const {
  Vec lo = origin, hi = origin;
  for (Eigen::Index j = 0; j < edges.cols(); ++j) {
    for (Eigen::Index i = 0; i < edges.rows(); ++i) {
      const double e = edges(i, j);
      if (e < 0) lo(i) += e; else hi(i) += e;
    }
  }
  return {lo, hi};
}

bool Box::empty() const {
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(hi(i) > lo(i))) return true;
  return false;
}

double Box::volume() const { return empty() ? 0.0 : (hi - lo).prod(); }

Parallelepiped realize(const DilationStructure& D, const GridCube& c) {
  const int d = D.dim;
  const double side = std::ldexp(1.0, c.sigma);
  const Mat P = D.power(c.tau);
  Vec n(d);
  for (int i = 0; i < d; ++i) n(i) = static_cast<double>(c.index[static_cast<std::size_t>(i)]);
  return {side * (P * n), side * P};
}

std::vector<Vec> realize_cube(const DilationStructure& D, const GridCube& c) {
  return realize(D, c).vertices();
}

Parallelepiped expand(const Parallelepiped& p, double factor) {
  const Vec c = p.center();
  Parallelepiped out;
  out.edges = factor * p.edges;
  out.origin = c - 0.5 * out.edges.rowwise().sum();
  return out;
}

Parallelepiped expand_cube(const DilationStructure& D, const GridCube& c, int factor) {
  if (factor != 2 && factor != 4) throw Error(ErrorCode::InputInvalid, "expansion factor must be 2 or 4");
  return expand(realize(D, c), factor);
}

bool contains(const Parallelepiped& outer, const Parallelepiped& inner, double tol) {
  for (const auto& v : inner.vertices())
    if (!outer.contains(v, tol)) return false;
  return true;
}

bool cube_contains(const Parallelepiped& outer, const DilationStructure& D, const GridCube& inner) {
  return contains(outer, realize(D, inner));
}

bool interiors_intersect(const Parallelepiped& a, const Parallelepiped& b) {
  const int d = a.dim();
  std::vector<Vec> dirs;
  for (int j = 0; j < d; ++j) dirs.push_back(a.edges.col(j));
  for (int j = 0; j < d; ++j) dirs.push_back(b.edges.col(j));
  for (const auto& axis : separating_axes(dirs, d)) {
    if (!overlaps(project(a, axis), project(b, axis))) return false;
  }
  return true;
}

bool cube_has_point(const DilationStructure& D, const GridCube& c, const Vec& x) {
  const Vec t = pullback(D, c.sigma, c.tau) * x;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double u = t(i) - static_cast<double>(c.index[static_cast<std::size_t>(i)]);
    if (u < 0.0 || u >= 1.0) return false;
  }
  return true;
}

GridCube locate(const DilationStructure& D, int sigma, int tau, const Vec& x) {
  const Vec t = pullback(D, sigma, tau) * x;
  GridCube c{sigma, tau, {}};
  c.index.resize(static_cast<std::size_t>(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i)
    c.index[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(t(i)));
  return c;
}

GridCube tau_parent(const DilationStructure& D, const GridCube& c) {
  return locate(D, c.sigma, c.tau + 1, realize(D, c).center());
}

GridCube sigma_parent(const GridCube& c) {
  GridCube p{c.sigma + 1, c.tau, c.index};
  for (auto& n : p.index) n = n >= 0 ? n / 2 : -((-n + 1) / 2);
  return p;
}

std::vector<GridCube> enumerate_cover(const DilationStructure& D, int sigma, int tau, const Box& box) {
  std::vector<GridCube> out;
  if (box.empty()) return out;
  const int d = D.dim;
  const Mat M = pullback(D, sigma, tau);
  Parallelepiped pulled{M * box.lo, M * (box.hi - box.lo).asDiagonal()};
  auto [lo, hi] = pulled.bounds();

  std::vector<std::int64_t> first(static_cast<std::size_t>(d)), last(static_cast<std::size_t>(d));
  double count = 1.0;
  for (int i = 0; i < d; ++i) {
    first[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(lo(i)));
    last[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::ceil(hi(i))) - 1;
    count *= static_cast<double>(last[static_cast<std::size_t>(i)] - first[static_cast<std::size_t>(i)] + 1);
  }
  if (count > static_cast<double>(kEnumerationBudget)) {
    throw Error(ErrorCode::BudgetExceeded, "cover of box needs " + format_double(count) + " cubes");
  }

  std::vector<Vec> dirs;
  for (int j = 0; j < d; ++j) dirs.push_back(Vec::Unit(d, j));
  for (int j = 0; j < d; ++j) dirs.push_back(pulled.edges.col(j));
  const auto axes = separating_axes(dirs, d);
  std::vector<std::pair<double, double>> box_proj;
  for (const auto& a : axes) box_proj.push_back(project(pulled, a));

  std::vector<std::int64_t> n = first;
  Parallelepiped unit{Vec::Zero(d), Mat::Identity(d, d)};
  while (true) {
    for (int i = 0; i < d; ++i) unit.origin(i) = static_cast<double>(n[static_cast<std::size_t>(i)]);
    bool hit = true;
    for (std::size_t k = 0; k < axes.size() && hit; ++k) hit = overlaps(project(unit, axes[k]), box_proj[k]);
    if (hit) out.push_back(GridCube{sigma, tau, n});
    int i = d - 1;
    while (i >= 0 && n[static_cast<std::size_t>(i)] == last[static_cast<std::size_t>(i)]) {
      n[static_cast<std::size_t>(i)] = first[static_cast<std::size_t>(i)];
      --i;
    }
    if (i < 0) break;
    ++n[static_cast<std::size_t>(i)];
  }
  return out;
}

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

double distance_to(const Parallelepiped& p, const Vec& y) {
  const int d = p.dim();
  if (p.contains(y, 0.0)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> state(static_cast<std::size_t>(d), 0);  // 0 -> t=0, 1 -> t=1, 2 -> free
  while (true) {
    Vec r = y - p.origin;
    std::vector<int> free_idx;
    for (int i = 0; i < d; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      if (s == 1) r -= p.edges.col(i);
      else if (s == 2) free_idx.push_back(i);
    }
    bool feasible = true;
    Vec resid = r;
    if (!free_idx.empty()) {
      Mat E(d, static_cast<Eigen::Index>(free_idx.size()));
      for (std::size_t k = 0; k < free_idx.size(); ++k) E.col(static_cast<Eigen::Index>(k)) = p.edges.col(free_idx[k]);
      const Vec t = E.colPivHouseholderQr().solve(r);
      for (Eigen::Index k = 0; k < t.size(); ++k)
        if (t(k) < -1e-12 || t(k) > 1.0 + 1e-12) feasible = false;
      resid = r - E * t;
    }
    if (feasible) best = std::min(best, resid.norm());
    int i = 0;
    while (i < d && state[static_cast<std::size_t>(i)] == 2) state[static_cast<std::size_t>(i++)] = 0;
    if (i == d) break;
    ++state[static_cast<std::size_t>(i)];
  }
  return best;
}

bool TendrilBound::contains(const Vec& x) const {
  const Vec y = ball_map_inverse * x;
  return distance_to(pulled_core, y) <= ball_radius * (1.0 + 1e-12);
}

Box TendrilBound::bounding_box() const {
  auto [lo, hi] = core.bounds();
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    const double hw = ball_radius * ball_map.row(i).norm();
    lo(i) -= hw;
    hi(i) += hw;
  }
  return {lo, hi};
}

TendrilBound tendril_of(const DilationStructure& D, const GridCube& c) {
  if (D.norm_power != 1) {
    throw Error(ErrorCode::NotNormalized, "tendrils need ||A^-1|| <= 1/2; use normalized()");
  }
  const int d = D.dim;
  TendrilBound t;
  t.base = c;
  t.core = expand_cube(D, c, 4);
  t.ball_map = D.power(c.tau + 2);
  t.ball_map_inverse = D.power(-(c.tau + 2));
  t.pulled_core = {t.ball_map_inverse * t.core.origin, t.ball_map_inverse * t.core.edges};
  const double a = D.det_scale;
  const double vb1 = unit_ball_volume(d);
  const double vb2 = vb1 * std::pow(2.0, d);
  t.volume_bound = std::pow(4.0, d) * vb2 * a * a * std::ldexp(1.0, c.sigma) * std::pow(a, c.tau);
  // q** sits in a ball of radius 2 * 2^sigma * sqrt(d) in level-tau coordinates.
  const double circ = 2.0 * std::ldexp(1.0, c.sigma) * std::sqrt(static_cast<double>(d));
  Eigen::JacobiSVD<Mat> svd(D.power(-2));
  const double radius = t.ball_radius + circ * svd.singularValues()(0);
  t.outer_volume = std::pow(a, c.tau + 2) * vb1 * std::pow(radius, d);
  return t;
}

SupportSample::SupportSample(std::vector<Vec> points, double radius)
    : points_(std::move(points)), radius_(radius) {
  if (points_.empty()) throw Error(ErrorCode::InputInvalid, "empty support sample");
  dim_ = static_cast<int>(points_.front().size());
  Vec lo = points_.front(), hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // At most ~2^20 cells in total.
  per_axis_ = std::max(1, static_cast<int>(std::pow(1 << 20, 1.0 / dim_)));
  per_axis_ = std::min(per_axis_, 64);
  cell_ = std::max((hi - lo).maxCoeff() / per_axis_, 1e-12) * (1 + 1e-9);
  origin_ = lo;
  std::int64_t cells = 1;
  for (int i = 0; i < dim_; ++i) cells *= per_axis_;
  std::vector<std::int64_t> key(points_.size());
  start_.assign(cells + 1, 0);
  for (std::size_t k = 0; k < points_.size(); ++k) {
    std::int64_t id = 0;
    for (int i = dim_ - 1; i >= 0; --i) {
      auto c = static_cast<std::int64_t>((points_[k](i) - origin_(i)) / cell_);
      id = id * per_axis_ + std::clamp<std::int64_t>(c, 0, per_axis_ - 1);
    }
    key[k] = id;
    ++start_[id + 1];
  }
  for (std::int64_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
  order_.resize(points_.size());
  std::vector<std::int64_t> fill(start_.begin(), start_.end() - 1);
  for (std::size_t k = 0; k < points_.size(); ++k) order_[fill[key[k]]++] = static_cast<std::int32_t>(k);
}

bool SupportSample::any_in_box(const Vec& lo, const Vec& hi, const std::function<bool(const Vec&)>& f) const {
  std::vector<int> a(dim_), b(dim_);
  for (int i = 0; i < dim_; ++i) {
    const double l = std::floor((lo(i) - origin_(i)) / cell_), h = std::floor((hi(i) - origin_(i)) / cell_);
    if (h < 0 || l >= per_axis_) return false;
    a[i] = static_cast<int>(std::max(l, 0.0));
    b[i] = static_cast<int>(std::min(h, per_axis_ - 1.0));
  }
  std::vector<int> c = a;
  while (true) {
    std::int64_t id = 0;
    for (int i = dim_ - 1; i >= 0; --i) id = id * per_axis_ + c[i];
    for (std::int64_t k = start_[id]; k < start_[id + 1]; ++k) {
      const Vec& p = points_[order_[k]];
      if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
      if (f(p)) return true;
    }
    int i = 0;
    while (i < dim_ && ++c[i] > b[i]) c[i] = a[i], ++i;
    if (i == dim_) return false;
  }
}

SupportTendril support_tendril_of(const DilationStructure& D, const GridCube& c,
                                  std::shared_ptr<const SupportSample> support) {
  if (!support) throw Error(ErrorCode::InputInvalid, "support sample required");
  SupportTendril t;
  t.bound = tendril_of(D, c);
  t.support = std::move(support);
  t.k_max = c.tau + 2;
  // Fold levels whose dilated unit ball is below a quarter of q's narrowest width.
  Eigen::JacobiSVD<Mat> svd(D.power(c.tau));
  const double width = 0.25 * std::ldexp(1.0, c.sigma) * svd.singularValues()(D.dim - 1);
  t.k_min = t.k_max;
  for (int m = 0; m < 400; ++m, --t.k_min) {
    Eigen::JacobiSVD<Mat> s(D.power(t.k_min - 1));
    if (s.singularValues()(0) <= width) break;
  }
  const double h = t.support->radius();
  for (int k = t.k_min; k <= t.k_max; ++k) {
    Mat inv = D.power(-k);
    Parallelepiped core{inv * t.bound.core.origin, inv * t.bound.core.edges};
    Mat unit = core.edges.inverse();
    t.level_margin.push_back(h * unit.rowwise().norm());
    t.level_inverse.push_back(std::move(inv));
    t.level_core.push_back(std::move(core));
    t.level_unit.push_back(std::move(unit));
  }
  t.tail_inverse = D.power(-(t.k_min - 1));
  t.tail_core = {t.tail_inverse * t.bound.core.origin, t.tail_inverse * t.bound.core.edges};
  return t;
}

bool SupportTendril::contains(const Vec& x) const {
  if (distance_to(tail_core, tail_inverse * x) <= 1.0) return true;
  const double h = support->radius();
  for (std::size_t l = 0; l < level_core.size(); ++l) {
    // x in q** + A^k(p + B_h)  <=>  A^{-k}x - p in A^{-k}q** + B_h.
    const Vec y = level_inverse[l] * x;
    auto [lo, hi] = level_core[l].bounds();
    const Vec w = level_unit[l] * (y - level_core[l].origin);
    const Vec& m = level_margin[l];
    const Mat& unit = level_unit[l];
    auto hit = [&](const Vec& p) {
      const Vec u = w - unit * p;
      return (u.array() >= -m.array()).all() && (u.array() <= 1.0 + m.array()).all();
    };
    if (support->any_in_box(y - hi - Vec::Constant(y.size(), h), y - lo + Vec::Constant(y.size(), h), hit))
      return true;
  }
  return false;
}

VolumeEstimate monte_carlo_volume(const Box& box, const std::function<bool(const Vec&)>& member,
                                  std::int64_t samples, std::uint64_t seed) {
  VolumeEstimate est;
  if (box.empty() || samples <= 0) return est;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int d = static_cast<int>(box.lo.size());
  Vec x(d);
  std::int64_t hits = 0;
  for (std::int64_t s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) x(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * uni(rng);
    if (member(x)) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  est.volume = p * box.volume();
  est.std_error = box.volume() * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return est;
}

VolumeEstimate tendril_volume_estimate(const TendrilBound& t, std::int64_t samples, std::uint64_t seed) {
  return monte_carlo_volume(t.bounding_box(), [&](const Vec& x) { return t.contains(x); }, samples, seed);
}

}  // namespace anisomax
