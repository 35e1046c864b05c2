#include "anisomax/decomposition.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace anisomax {

bool VerifyReport::pass() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const ConditionReport& c) { return c.pass; });
}

const ConditionReport* VerifyReport::find(const std::string& name) const {
  for (const auto& c : conditions)
    if (c.name == name) return &c;
  return nullptr;
}

std::string VerifyReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : conditions) {
    os << c.name << ' ' << (c.pass ? "pass" : "FAIL") << " ratio=" << format_double(c.worst_ratio);
    if (!c.witness.empty()) os << " witness=" << c.witness;
    if (!c.detail.empty()) os << ' ' << c.detail;
    os << '\n';
  }
  return os.str();
}

namespace {

double cube_volume(const DilationStructure& D, const GridCube& c) {
  return std::pow(2.0, c.sigma * D.dim) * std::pow(D.det_scale, c.tau);
}

using Polygon = std::vector<Eigen::Vector2d>;

Polygon to_polygon(const Parallelepiped& p) {
  const Eigen::Vector2d o = p.origin, e0 = p.edges.col(0), e1 = p.edges.col(1);
  Polygon poly{o, o + e0, o + e0 + e1, o + e1};
  const double orient = e0.x() * e1.y() - e0.y() * e1.x();
  if (orient < 0) std::reverse(poly.begin(), poly.end());
  return poly;
}

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

// Clip a convex polygon by a counter-clockwise convex clipper.
double clip_area(Polygon subject, const Polygon& clipper) {
  for (std::size_t e = 0; e < clipper.size() && !subject.empty(); ++e) {
    const Eigen::Vector2d a = clipper[e], b = clipper[(e + 1) % clipper.size()];
    auto side = [&](const Eigen::Vector2d& p) { return cross(b - a, p - a); };
    Polygon out;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Eigen::Vector2d p = subject[i], q = subject[(i + 1) % subject.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) out.push_back(p + (sp / (sp - sq)) * (q - p));
    }
    subject = std::move(out);
  }
  double area = 0;
  for (std::size_t i = 0; i < subject.size(); ++i) area += cross(subject[i], subject[(i + 1) % subject.size()]);
  return std::abs(area) / 2;
}

}  // namespace

double overlap_volume(const Parallelepiped& a, const Parallelepiped& b) {
  if (contains(a, b)) return b.volume();
  if (contains(b, a)) return a.volume();
  if (!interiors_intersect(a, b)) return 0.0;
  if (a.dim() == 2) return clip_area(to_polygon(a), to_polygon(b));
  const Parallelepiped& small = a.volume() <= b.volume() ? a : b;
  const Parallelepiped& large = a.volume() <= b.volume() ? b : a;
  const int d = small.dim(), m = 12;
  std::vector<int> idx(d, 0);
  long hits = 0, total = 0;
  Vec u(d);
  while (true) {
    for (int i = 0; i < d; ++i) u(i) = (idx[i] + 0.5) / m;
    if (large.contains(small.origin + small.edges * u, 0.0)) ++hits;
    ++total;
    int k = 0;
    while (k < d && ++idx[k] == m) idx[k++] = 0;
    if (k == d) break;
  }
  return small.volume() * static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Whitney

namespace {

struct WhitneyState {
  const DilationStructure& D;
  const std::vector<WeightedCube>& Q;
  std::vector<Parallelepiped> q_geom;
  double alpha;
  int max_levels;

  double average(const GridCube& S) const {
    const Parallelepiped s = realize(D, S);
    double mass = 0.0;
    for (std::size_t j = 0; j < Q.size(); ++j) {
      const double ov = overlap_volume(s, q_geom[j]);
      if (ov > 0) mass += Q[j].lambda * ov / q_geom[j].volume();
    }
    return mass / s.volume();
  }

  double star_mass(const GridCube& S) const {
    const Parallelepiped star = expand_cube(D, S, 2);
    double mass = 0.0;
    for (std::size_t j = 0; j < Q.size(); ++j)
      if (contains(star, q_geom[j])) mass += Q[j].lambda;
    return mass;
  }

  // Drop cubes contained in others, then lift the smaller of any partially
  // overlapping pair to its tau-parent until the family is disjoint.
  void normalize(std::set<GridCube>& sel) const {
    for (int guard = 0;; ++guard) {
      if (guard > 100 * max_levels) throw Error(ErrorCode::BudgetExceeded, "whitney overlap resolution");
      std::vector<GridCube> v(sel.begin(), sel.end());
      std::vector<Parallelepiped> g;
      for (const auto& c : v) g.push_back(realize(D, c));
      bool changed = false;
      for (std::size_t i = 0; i < v.size() && !changed; ++i) {
        for (std::size_t j = 0; j < v.size() && !changed; ++j) {
          if (i == j) continue;
          if (contains(g[j], g[i])) {
            sel.erase(v[i]);
            changed = true;
          }
        }
      }
      for (std::size_t i = 0; i < v.size() && !changed; ++i) {
        for (std::size_t j = i + 1; j < v.size() && !changed; ++j) {
          if (interiors_intersect(g[i], g[j])) {
            const std::size_t lo = v[i].tau <= v[j].tau ? i : j;
            sel.erase(v[lo]);
            sel.insert(tau_parent(D, v[lo]));
            changed = true;
          }
        }
      }
      if (!changed) return;
    }
  }
};

}  // namespace

WhitneyResult whitney_decompose(const DilationStructure& D, const std::vector<WeightedCube>& Q, double alpha,
                                const WhitneyOptions& opt) {
  if (!(alpha > 0)) throw Error(ErrorCode::InputInvalid, "alpha must be positive");
  WhitneyState st{D, Q, {}, alpha, opt.max_levels};
  double total = 0.0;
  for (const auto& q : Q) {
    if (q.cube.sigma != 0) throw Error(ErrorCode::InputInvalid, "Whitney input must lie in R_0");
    if (!(q.lambda > 0)) throw Error(ErrorCode::InputInvalid, "lambda must be positive");
    st.q_geom.push_back(realize(D, q.cube));
    total += q.lambda;
  }

  // Above this level the average of F over any cube is below alpha.
  int tau_cap = INT_MIN;
  for (const auto& q : Q) tau_cap = std::max(tau_cap, q.cube.tau);
  while (alpha * std::pow(D.det_scale, tau_cap) <= total) ++tau_cap;

  std::set<GridCube> sel;
  for (const auto& q : Q) {
    GridCube c = q.cube;
    std::optional<GridCube> best;
    for (int level = 0; c.tau <= tau_cap; ++level) {
      if (level > opt.max_levels) throw Error(ErrorCode::BudgetExceeded, "parent chain longer than max_levels");
      if (st.average(c) > alpha) best = c;
      c = tau_parent(D, c);
    }
    if (best) sel.insert(*best);
  }
  st.normalize(sel);

  WhitneyResult res;
  for (int guard = 0;; ++guard) {
    if (guard > 100 * opt.max_levels) throw Error(ErrorCode::BudgetExceeded, "whitney repair");
    std::optional<GridCube> bad;
    for (const auto& s : sel) {
      if (st.star_mass(s) > opt.c_w * alpha * cube_volume(D, s)) {
        bad = s;
        break;
      }
    }
    if (!bad) break;
    sel.erase(*bad);
    sel.insert(tau_parent(D, *bad));
    st.normalize(sel);
    ++res.repairs;
  }

  res.selected.assign(sel.begin(), sel.end());
  std::vector<Parallelepiped> stars;
  for (const auto& s : res.selected) stars.push_back(expand_cube(D, s, 2));
  res.assigned.assign(Q.size(), -1);
  for (std::size_t j = 0; j < Q.size(); ++j) {
    // selected is sorted by (tau, index), so the first hit is the preferred owner
    for (std::size_t k = 0; k < res.selected.size(); ++k) {
      if (contains(stars[k], st.q_geom[j])) {
        res.assigned[j] = static_cast<int>(k);
        break;
      }
    }
    if (res.assigned[j] < 0) res.leftover.push_back(j);
  }
  return res;
}

namespace {

// Points probing every cell of the arrangement formed by the given
// parallelepipeds: centers, inward-nudged vertices and, in the plane, small
// circles around vertices and edge crossings.
std::vector<Vec> arrangement_probes(const std::vector<Parallelepiped>& cells) {
  std::vector<Vec> probes;
  if (cells.empty()) return probes;
  const int d = cells.front().dim();
  double min_diam = INFINITY;
  for (const auto& c : cells) min_diam = std::min(min_diam, c.diameter());
  const double r = 1e-7 * min_diam;
  std::vector<Vec> anchors;
  for (const auto& c : cells) {
    probes.push_back(c.center());
    for (int mask = 0; mask < (1 << d); ++mask) {
      Vec u(d);
      for (int i = 0; i < d; ++i) u(i) = (mask >> i & 1) ? 1.0 - 1e-7 : 1e-7;
      probes.push_back(c.origin + c.edges * u);
    }
    for (const auto& v : c.vertices()) anchors.push_back(v);
  }
  if (d != 2) return probes;
  auto edges_of = [](const Parallelepiped& p) {
    auto v = to_polygon(p);
    std::vector<std::array<Eigen::Vector2d, 2>> e;
    for (std::size_t i = 0; i < v.size(); ++i) e.push_back({v[i], v[(i + 1) % v.size()]});
    return e;
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = i + 1; j < cells.size(); ++j) {
      if (!interiors_intersect(cells[i], cells[j])) continue;
      for (const auto& e : edges_of(cells[i])) {
        for (const auto& f : edges_of(cells[j])) {
          const Eigen::Vector2d p = e[0], rr = e[1] - e[0], q = f[0], s = f[1] - f[0];
          const double den = cross(rr, s);
          if (std::abs(den) < 1e-300) continue;
          const double t = cross(q - p, s) / den, w = cross(q - p, rr) / den;
          if (t < 0 || t > 1 || w < 0 || w > 1) continue;
          anchors.push_back(p + t * rr);
        }
      }
    }
  }
  constexpr int kDirections = 64;
  for (const auto& a : anchors) {
    for (int k = 0; k < kDirections; ++k) {
      const double th = 2 * std::numbers::pi * (k + 0.5) / kDirections;
      probes.push_back(a + r * Vec{{std::cos(th), std::sin(th)}});
    }
  }
  return probes;
}

}  // namespace

VerifyReport verify_whitney(const DilationStructure& D, const WhitneyResult& res, const std::vector<WeightedCube>& Q,
                            double alpha, double c_w) {
  VerifyReport rep;
  std::vector<Parallelepiped> sg, stars, qg;
  for (const auto& s : res.selected) {
    sg.push_back(realize(D, s));
    stars.push_back(expand_cube(D, s, 2));
  }
  for (const auto& q : Q) qg.push_back(realize(D, q.cube));

  ConditionReport disjoint{"disjoint"};
  for (std::size_t i = 0; i < sg.size(); ++i) {
    if (res.selected[i].sigma != 0) {
      disjoint.pass = false;
      disjoint.witness = anisomax::to_string(res.selected[i]);
    }
    for (std::size_t j = i + 1; j < sg.size(); ++j) {
      if (interiors_intersect(sg[i], sg[j])) {
        disjoint.pass = false;
        disjoint.witness = anisomax::to_string(res.selected[i]) + "&" + anisomax::to_string(res.selected[j]);
      }
    }
  }
  rep.conditions.push_back(disjoint);

  ConditionReport c1{"condition_1"};
  for (std::size_t i = 0; i < sg.size(); ++i) {
    double mass = 0;
    for (std::size_t j = 0; j < Q.size(); ++j)
      if (contains(stars[i], qg[j])) mass += Q[j].lambda;
    const double ratio = mass / (c_w * alpha * sg[i].volume());
    if (ratio > c1.worst_ratio) {
      c1.worst_ratio = ratio;
      c1.witness = anisomax::to_string(res.selected[i]);
    }
  }
  c1.pass = c1.worst_ratio <= 1.0;
  rep.conditions.push_back(c1);

  ConditionReport c2{"condition_2"};
  double total = 0, vol = 0;
  for (const auto& q : Q) total += q.lambda;
  for (const auto& s : sg) vol += s.volume();
  c2.worst_ratio = total > 0 ? vol * alpha / total : (vol > 0 ? INFINITY : 0.0);
  c2.pass = c2.worst_ratio <= 1.0 + 1e-12;
  rep.conditions.push_back(c2);

  ConditionReport c3{"condition_3"};
  std::vector<Parallelepiped> left;
  std::vector<double> dens;
  for (auto j : res.leftover) {
    left.push_back(qg[j]);
    dens.push_back(Q[j].lambda / qg[j].volume());
  }
  for (const auto& x : arrangement_probes(left)) {
    double f = 0;
    for (std::size_t k = 0; k < left.size(); ++k)
      if (left[k].contains(x, 0.0)) f += dens[k];
    if (f / alpha > c3.worst_ratio) {
      c3.worst_ratio = f / alpha;
      std::ostringstream os;
      os << '(' << format_double(x(0));
      for (int i = 1; i < x.size(); ++i) os << ',' << format_double(x(i));
      os << ')';
      c3.witness = os.str();
    }
  }
  c3.pass = c3.worst_ratio <= 1.0 + 1e-12;
  rep.conditions.push_back(c3);

  ConditionReport asg{"assignment"};
  for (std::size_t j = 0; j < Q.size(); ++j) {
    bool in_some = false;
    for (const auto& st : stars) in_some = in_some || contains(st, qg[j]);
    const int a = j < res.assigned.size() ? res.assigned[j] : -1;
    const bool ok = a >= 0 ? contains(stars[a], qg[j]) : !in_some;
    if (!ok) {
      asg.pass = false;
      asg.witness = anisomax::to_string(Q[j].cube);
    }
  }
  rep.conditions.push_back(asg);
  return rep;
}

// ---------------------------------------------------------------------------
// Stopping time

std::vector<GridCube> star_candidates(const DilationStructure& D, int sigma, int tau, const Vec& c) {
  const int d = D.dim;
  const Vec u = std::pow(2.0, -sigma) * (D.power(-tau) * c);
  std::vector<std::int64_t> lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo[i] = static_cast<std::int64_t>(std::ceil(u(i) - 1.5 - 1e-9));
    hi[i] = static_cast<std::int64_t>(std::floor(u(i) + 0.5 + 1e-9));
  }
  std::vector<GridCube> out;
  std::vector<std::int64_t> n = lo;
  while (true) {
    out.push_back({sigma, tau, n});
    int k = d - 1;
    while (k >= 0 && ++n[k] > hi[k]) n[k] = lo[k], --k;
    if (k < 0) break;
  }
  return out;
}

std::string TraceEvent::to_line() const {
  std::ostringstream os;
  const char* k = kind == Kind::Select ? "select" : kind == Kind::ClassifyC2 ? "classify_c2" : "repair";
  os << "step=" << step << " event=" << k << " sigma=";
  if (sigma == INT_MIN) os << "-inf";
  else os << sigma;
  os << " tau=" << tau << " cube=" << anisomax::to_string(cube);
  if (kind == Kind::Select) os << " Lambda=" << format_double(lambda_sum);
  else os << " Q=" << q_index << " kappa=" << kappa_before << "->" << kappa_after;
  return os.str();
}

bool StoppingResult::in_exceptional(const Vec& x) const {
  for (const auto& p : quadruples)
    if (p.contains(x)) return true;
  auto scan = [&](const auto& list) {
    for (const auto& t : list) {
      const Box b = t.bounding_box();
      if ((x.array() < b.lo.array()).any() || (x.array() > b.hi.array()).any()) continue;
      if (t.contains(x)) return true;
    }
    return false;
  };
  return support_tendrils.empty() ? scan(tendrils) : scan(support_tendrils);
}

Box StoppingResult::bounding_box() const {
  std::optional<Box> b;
  auto grow = [&](const Box& c) {
    if (!b) b = c;
    else {
      b->lo = b->lo.cwiseMin(c.lo);
      b->hi = b->hi.cwiseMax(c.hi);
    }
  };
  for (const auto& p : quadruples) {
    auto [lo, hi] = p.bounds();
    grow({lo, hi});
  }
  for (const auto& t : tendrils) grow(t.bounding_box());
  return b ? *b : Box{Vec::Zero(1), Vec::Zero(1)};
}

std::string StoppingResult::trace_text() const {
  std::string s;
  for (const auto& e : trace) s += e.to_line() + "\n";
  return s;
}

namespace {

double min_diameter(const DilationStructure& D, const std::vector<WeightedCube>& Q, const std::vector<bool>& live) {
  double m = INFINITY;
  for (std::size_t j = 0; j < Q.size(); ++j)
    if (live[j]) m = std::min(m, std::pow(2.0, Q[j].cube.sigma) * cube_diameter(D, Q[j].cube.tau));
  return m;
}

// Diameter of q* for q in R_{sigma,tau}.
double star_diameter(const DilationStructure& D, int sigma, int tau) {
  return 2.0 * std::pow(2.0, sigma) * cube_diameter(D, tau);
}

}  // namespace

StoppingResult stopping_time(const DilationStructure& D, const std::vector<GridCube>& S,
                             const std::vector<WeightedCube>& Q, double alpha, const StoppingOptions& opt,
                             std::shared_ptr<const SupportSample> support) {
  if (!(alpha > 0)) throw Error(ErrorCode::InputInvalid, "alpha must be positive");
  const std::size_t n = Q.size();
  StoppingResult res;
  std::vector<Parallelepiped> qg, stars;
  for (const auto& q : Q) {
    if (!(q.lambda > 0)) throw Error(ErrorCode::InputInvalid, "lambda must be positive");
    qg.push_back(realize(D, q.cube));
  }
  for (const auto& s : S) {
    stars.push_back(expand_cube(D, s, 2));
    res.quadruples.push_back(expand_cube(D, s, 4));
  }

  // Whitney owners: lowest tau(S), then lexicographic.
  res.owner_s.assign(n, -1);
  std::vector<std::vector<long>> owners(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::set<int> taus;
    for (std::size_t k = 0; k < S.size(); ++k) {
      if (!contains(stars[k], qg[j])) continue;
      owners[j].push_back(static_cast<long>(k));
      taus.insert(S[k].tau);
      if (res.owner_s[j] < 0 || S[k] < S[res.owner_s[j]]) res.owner_s[j] = static_cast<long>(k);
    }
    if (res.owner_s[j] < 0)
      throw Error(ErrorCode::InputInvalid, "cube " + anisomax::to_string(Q[j].cube) + " lies in no S*");
    if (taus.size() > 1) res.mixed_dimension_witnesses.push_back(anisomax::to_string(Q[j].cube));
  }

  res.kappa.assign(n, 0);
  res.classification.assign(n, QClass::Unclassified);
  res.owner_q.assign(n, -1);
  res.classified_step.assign(n, -1);
  if (n == 0) return res;

  double total = 0;
  int tau_max = INT_MIN, tau_min = INT_MAX;
  for (const auto& q : Q) {
    total += q.lambda;
    tau_max = std::max(tau_max, q.cube.tau);
    tau_min = std::min(tau_min, q.cube.tau);
  }
  res.tau0 = tau_max + 1;
  while (alpha * std::pow(D.det_scale, res.tau0) <= total) ++res.tau0;

  std::vector<bool> live(n, true);
  long step = 0;
  for (int tau = res.tau0 - 1; tau >= tau_min; --tau) {
    if (res.tau0 - 1 - tau > opt.max_levels) throw Error(ErrorCode::BudgetExceeded, "tau descent");
    for (int sigma = 0;; --sigma) {
      if (-sigma > opt.max_levels) throw Error(ErrorCode::BudgetExceeded, "sigma descent");
      if (std::none_of(live.begin(), live.end(), [](bool b) { return b; })) break;
      if (star_diameter(D, sigma, tau) < min_diameter(D, Q, live)) break;

      const double threshold = alpha * std::pow(2.0, sigma) * std::pow(D.det_scale, tau);
      std::map<GridCube, double> lambda;
      std::vector<std::vector<GridCube>> fits(n);
      for (std::size_t j = 0; j < n; ++j) {
        if (!live[j]) continue;
        for (auto& q : star_candidates(D, sigma, tau, qg[j].center())) {
          if (contains(expand_cube(D, q, 2), qg[j])) {
            lambda[q] += Q[j].lambda;
            fits[j].push_back(std::move(q));
          }
        }
      }
      std::map<GridCube, long> chosen;
      for (const auto& [q, lam] : lambda) {
        if (lam <= threshold) continue;
        chosen[q] = static_cast<long>(res.selected.size());
        res.selected.push_back(q);
        res.selected_step.push_back(step);
        res.tendrils.push_back(tendril_of(D, q));
        if (support) res.support_tendrils.push_back(support_tendril_of(D, q, support));
        TraceEvent e;
        e.kind = TraceEvent::Kind::Select;
        e.step = step;
        e.sigma = sigma;
        e.tau = tau;
        e.cube = q;
        e.lambda_sum = lam;
        res.trace.push_back(e);
      }
      for (std::size_t j = 0; j < n && !chosen.empty(); ++j) {
        if (!live[j]) continue;
        std::optional<GridCube> best;
        for (const auto& q : fits[j])
          if (chosen.count(q) && (!best || q < *best)) best = q;
        if (!best) continue;
        live[j] = false;
        res.classification[j] = QClass::C1;
        res.kappa[j] = tau + 1;
        res.owner_q[j] = chosen[*best];
        res.classified_step[j] = step;
      }
      res.steps.emplace_back(sigma, tau);
      ++step;
    }
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (!live[j] || Q[j].cube.tau != tau) continue;
      any = true;
      live[j] = false;
      const GridCube& s = S[res.owner_s[j]];
      res.classification[j] = QClass::C2;
      res.kappa[j] = s.tau + 1;
      res.classified_step[j] = step;
      TraceEvent e;
      e.kind = TraceEvent::Kind::ClassifyC2;
      e.step = step;
      e.sigma = INT_MIN;
      e.tau = tau;
      e.cube = s;
      e.q_index = static_cast<long>(j);
      e.kappa_after = res.kappa[j];
      res.trace.push_back(e);
    }
    res.steps.emplace_back(INT_MIN, tau);
    ++step;
    (void)any;
  }

  for (std::size_t j = 0; j < n; ++j) {
    for (long k : owners[j]) {
      if (res.kappa[j] > S[k].tau) continue;
      TraceEvent e;
      e.kind = TraceEvent::Kind::Repair;
      e.step = step;
      e.sigma = INT_MIN;
      e.tau = S[k].tau;
      e.cube = S[k];
      e.q_index = static_cast<long>(j);
      e.kappa_before = res.kappa[j];
      res.kappa[j] = S[k].tau + 1;
      e.kappa_after = res.kappa[j];
      res.trace.push_back(e);
    }
  }
  return res;
}

VerifyReport verify_stopping(const DilationStructure& D, const StoppingResult& res, const std::vector<GridCube>& S,
                             const std::vector<WeightedCube>& Q, double alpha, const StoppingCheckOptions& opt) {
  VerifyReport rep;
  const std::size_t n = Q.size();
  std::vector<Parallelepiped> qg;
  for (const auto& q : Q) qg.push_back(realize(D, q.cube));
  double total = 0, s_volume = 0;
  for (const auto& q : Q) total += q.lambda;
  for (const auto& s : S) s_volume += cube_volume(D, s);

  ConditionReport part{"partition"};
  for (std::size_t j = 0; j < n; ++j) {
    if (j >= res.classification.size() || res.classification[j] == QClass::Unclassified) {
      part.pass = false;
      part.witness = anisomax::to_string(Q[j].cube);
    }
  }
  rep.conditions.push_back(part);

  if (opt.check_i) {
    ConditionReport c{"i"};
    double quad = 0, formula = 0, outer = 0;
    for (const auto& p : res.quadruples) quad += p.volume();
    for (const auto& t : res.tendrils) {
      formula += t.volume_bound;
      outer += t.outer_volume;
    }
    VolumeEstimate uni;
    if (!res.tendrils.empty()) {
      Box box = res.tendrils.front().bounding_box();
      for (const auto& t : res.tendrils) {
        const Box b = t.bounding_box();
        box.lo = box.lo.cwiseMin(b.lo);
        box.hi = box.hi.cwiseMax(b.hi);
      }
      StoppingResult only_tendrils;
      only_tendrils.tendrils = res.tendrils;
      only_tendrils.support_tendrils = res.support_tendrils;
      uni = monte_carlo_volume(box, [&](const Vec& x) { return only_tendrils.in_exceptional(x); },
                               opt.volume_samples, opt.seed);
    }
    const double union_upper = uni.volume + 3 * uni.std_error;
    const double tendril_measure = res.support_tendrils.empty() ? std::min(outer, union_upper) : union_upper;
    const double lhs = quad + tendril_measure;
    const double rhs = opt.c_i * (total / alpha + s_volume);
    c.worst_ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? INFINITY : 0.0);
    c.pass = c.worst_ratio <= 1.0;
    std::ostringstream os;
    os << "quadruples=" << format_double(quad) << " tendril_union=" << format_double(uni.volume) << "+-"
       << format_double(uni.std_error) << " tendril_outer_sum=" << format_double(outer)
       << " tendril_formula_sum=" << format_double(formula) << " rhs=" << format_double(rhs);
    c.detail = os.str();
    rep.conditions.push_back(c);
  }

  if (opt.check_ii) {
    ConditionReport c{"ii"};
    if (opt.support.empty()) {
      c.pass = false;
      c.detail = "no support samples supplied";
    } else {
      std::mt19937_64 rng(opt.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::uniform_int_distribution<std::size_t> pick(0, opt.support.size() - 1);
      long misses = 0, tested = 0;
      for (std::size_t j = 0; j < n; ++j) {
        for (int back : {1, 3, 8}) {
          const int jj = res.kappa[j] - back;
          const Mat Aj = D.power(jj);
          for (int p = 0; p < opt.support_points; ++p) {
            Vec u(D.dim);
            for (int i = 0; i < D.dim; ++i) u(i) = unit(rng);
            const Vec x = qg[j].origin + qg[j].edges * u + Aj * opt.support[pick(rng)];
            ++tested;
            if (!res.in_exceptional(x)) {
              if (misses++ == 0) c.witness = anisomax::to_string(Q[j].cube) + " j=" + std::to_string(jj);
            }
          }
        }
      }
      c.pass = misses == 0;
      c.worst_ratio = tested ? static_cast<double>(misses) / static_cast<double>(tested) : 0.0;
      c.detail = "misses=" + std::to_string(misses) + "/" + std::to_string(tested);
    }
    rep.conditions.push_back(c);
  }

  if (opt.check_iii) {
    ConditionReport c{"iii"};
    for (std::size_t j = 0; j < n; ++j) {
      for (const auto& s : S) {
        if (!contains(expand_cube(D, s, 2), qg[j])) continue;
        if (res.kappa[j] <= s.tau) {
          c.pass = false;
          c.witness = anisomax::to_string(Q[j].cube) + " in " + anisomax::to_string(s) + "* kappa=" +
                      std::to_string(res.kappa[j]);
        }
      }
    }
    rep.conditions.push_back(c);
  }

  if (opt.check_iv) {
    ConditionReport c{"iv"};
    int tau_min = INT_MAX;
    double min_diam = INFINITY;
    for (const auto& q : Q) {
      tau_min = std::min(tau_min, q.cube.tau);
      min_diam = std::min(min_diam, cube_diameter(D, q.cube.tau));
    }
    for (int tau = res.tau0 - 1; tau >= tau_min - 1; --tau) {
      for (int sigma = 0; star_diameter(D, sigma, tau) >= min_diam; --sigma) {
        const double allowed = opt.c_iv * alpha * std::pow(2.0, sigma) * std::pow(D.det_scale, tau);
        std::map<GridCube, double> sum;
        for (std::size_t j = 0; j < n; ++j) {
          if (res.kappa[j] > tau) continue;
          for (const auto& q : star_candidates(D, sigma, tau, qg[j].center()))
            if (contains(expand_cube(D, q, 2), qg[j])) sum[q] += Q[j].lambda;
        }
        for (const auto& [q, v] : sum) {
          if (v / allowed > c.worst_ratio) {
            c.worst_ratio = v / allowed;
            c.witness = anisomax::to_string(q);
          }
        }
      }
    }
    c.pass = c.worst_ratio <= 1.0;
    rep.conditions.push_back(c);
  }

  // Lambda recomputed from scratch at every selection must match the trace,
  // and no sigma-ancestor at the same tau may have been selectable earlier.
  ConditionReport book{"lambda_bookkeeping"};
  ConditionReport anc{"stopping_ancestors"};
  std::map<std::pair<int, int>, long> step_of;
  for (std::size_t k = 0; k < res.steps.size(); ++k) step_of[res.steps[k]] = static_cast<long>(k);
  auto lambda_at = [&](const GridCube& q, long step) {
    const Parallelepiped star = expand_cube(D, q, 2);
    double v = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (res.classified_step[j] >= step && contains(star, qg[j])) v += Q[j].lambda;
    return v;
  };
  for (const auto& e : res.trace) {
    if (e.kind != TraceEvent::Kind::Select) continue;
    if (lambda_at(e.cube, e.step) != e.lambda_sum) {
      book.pass = false;
      book.witness = anisomax::to_string(e.cube);
    }
    GridCube a = e.cube;
    while (a.sigma < 0) {
      a = sigma_parent(a);
      auto it = step_of.find({a.sigma, a.tau});
      if (it == step_of.end()) continue;
      const double thr = alpha * std::pow(2.0, a.sigma) * std::pow(D.det_scale, a.tau);
      const double lam = lambda_at(a, it->second);
      anc.worst_ratio = std::max(anc.worst_ratio, lam / thr);
      if (lam > thr) {
        anc.pass = false;
        anc.witness = anisomax::to_string(a);
      }
    }
  }
  rep.conditions.push_back(book);
  rep.conditions.push_back(anc);

  ConditionReport mixed{"same_dimensions"};
  mixed.pass = res.mixed_dimension_witnesses.empty();
  if (!mixed.pass) mixed.witness = res.mixed_dimension_witnesses.front();
  mixed.worst_ratio = static_cast<double>(res.mixed_dimension_witnesses.size());
  rep.conditions.push_back(mixed);
  return rep;
}

}  // namespace anisomax

namespace anisomax {

std::vector<WeightedCube> random_weighted_cubes(const DilationStructure& D, const RandomCubeSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> tau(spec.tau_lo, spec.tau_hi);
  std::uniform_real_distribution<double> pos(-spec.extent, spec.extent);
  std::uniform_real_distribution<double> logd(std::log(spec.density_lo), std::log(spec.density_hi));
  std::vector<WeightedCube> out;
  for (int k = 0; k < spec.count; ++k) {
    Vec x(D.dim);
    for (int i = 0; i < D.dim; ++i) x(i) = pos(rng);
    WeightedCube w;
    w.cube = locate(D, 0, tau(rng), x);
    w.lambda = spec.alpha * std::exp(logd(rng)) * std::pow(D.det_scale, w.cube.tau);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace anisomax
