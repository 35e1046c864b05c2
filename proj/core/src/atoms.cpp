#include "anisomax/atoms.hpp"

#include <cmath>

namespace anisomax {

const char* to_string(AtomProfile p) {
  switch (p) {
    case AtomProfile::HaarSplit: return "haar";
    case AtomProfile::TensorBump: return "bump";
    case AtomProfile::PlainBump: return "plain";
  }
  return "?";
}

AtomProfile parse_profile(const std::string& name) {
  if (name == "haar" || name == "haar-split") return AtomProfile::HaarSplit;
  if (name == "bump" || name == "tensor-bump") return AtomProfile::TensorBump;
  if (name == "plain" || name == "plain-bump") return AtomProfile::PlainBump;
  throw Error(ErrorCode::ConfigInvalid, "unknown atom profile '" + name + "'");
}

double bump(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

Atom make_atom(const DilationStructure& D, const GridCube& Q, AtomProfile profile, std::uint64_t seed) {
  if (Q.sigma != 0) throw Error(ErrorCode::InputInvalid, "atoms live on R_0, got " + to_string(Q));
  if (static_cast<int>(Q.index.size()) != D.dim) throw Error(ErrorCode::InputInvalid, "cube dimension mismatch");
  Atom a;
  a.support = Q;
  a.profile = profile;
  a.axis = static_cast<int>(seed % static_cast<std::uint64_t>(D.dim));
  a.sign = (profile == AtomProfile::TensorBump && (seed / D.dim) % 2 == 1) ? -1.0 : 1.0;
  a.amplitude = std::pow(D.det_scale, -Q.tau);
  a.region = realize(D, Q);
  a.to_unit = a.region.edges.inverse();
  return a;
}

Atom dilate(const DilationStructure& D, const Atom& atom) {
  Atom b = atom;
  b.support.tau += 1;
  b.amplitude = atom.amplitude / D.det_scale;
  b.region = realize(D, b.support);
  b.to_unit = b.region.edges.inverse();
  return b;
}

double Atom::at_unit(const Vec& u) const {
  if (profile == AtomProfile::HaarSplit) return u(axis) < 0.5 ? amplitude : -amplitude;
  double v = sign * amplitude;
  if (profile == AtomProfile::PlainBump) {
    for (int i = 0; i < u.size(); ++i) v *= bump(2.0 * u(i) - 1.0);
    return v;
  }
  for (int i = 0; i < u.size(); ++i) {
    if (i == axis) {
      v *= bump(4.0 * u(i) - 1.0) - bump(4.0 * u(i) - 3.0);
    } else {
      v *= bump(2.0 * u(i) - 1.0);
    }
  }
  return v;
}

double Atom::operator()(const Vec& x) const {
  const Vec u = to_unit * (x - region.origin);
  for (int i = 0; i < u.size(); ++i) {
    if (u(i) < 0.0 || u(i) >= 1.0) return 0.0;
  }
  return at_unit(u);
}

Box Atom::bounding_box() const {
  auto [lo, hi] = region.bounds();
  return {lo, hi};
}

AtomIntegrals integrate(const Atom& atom, int nodes_per_half) {
  const int d = atom.region.dim();
  auto left = gauss_legendre(nodes_per_half, 0.0, 0.5);
  auto right = gauss_legendre(nodes_per_half, 0.5, 1.0);
  std::vector<double> nodes = left.nodes, weights = left.weights;
  nodes.insert(nodes.end(), right.nodes.begin(), right.nodes.end());
  weights.insert(weights.end(), right.weights.begin(), right.weights.end());
  const int m = static_cast<int>(nodes.size());

  std::vector<int> idx(d, 0);
  Vec u(d);
  double integral = 0.0, l1 = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      u(i) = nodes[idx[i]];
      w *= weights[idx[i]];
    }
    const double v = atom.at_unit(u);
    integral += w * v;
    l1 += w * std::abs(v);
    int k = 0;
    while (k < d && ++idx[k] == m) idx[k++] = 0;
    if (k == d) break;
  }
  const double jac = atom.region.volume();
  return {integral * jac, l1 * jac};
}

double AtomicSum::operator()(const Vec& x) const {
  double v = 0.0;
  for (const auto& t : terms) v += t.lambda * t.atom(x);
  return v;
}

double AtomicSum::h1_norm() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.lambda;
  return s;
}

AtomicSum AtomicSum::scaled(double c) const {
  AtomicSum out = *this;
  for (auto& t : out.terms) t.lambda *= c;
  return out;
}

Box AtomicSum::bounding_box() const {
  if (terms.empty()) return {Vec::Zero(dilation ? dilation->dim : 1), Vec::Zero(dilation ? dilation->dim : 1)};
  Box b = terms.front().atom.bounding_box();
  for (const auto& t : terms) {
    Box c = t.atom.bounding_box();
    b.lo = b.lo.cwiseMin(c.lo);
    b.hi = b.hi.cwiseMax(c.hi);
  }
  return b;
}

}  // namespace anisomax
