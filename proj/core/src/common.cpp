#include "anisomax/common.hpp"

#include <charconv>
#include <cmath>
#include <vector>

namespace anisomax {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::EigenvalueNotExpanding: return "EigenvalueNotExpanding";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::WindowExhausted: return "WindowExhausted";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::InputInvalid: return "InputInvalid";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::TailNotNegligible: return "TailNotNegligible";
  }
  return "Unknown";
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::DegenerateFit, "need at least two points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw Error(ErrorCode::DegenerateFit, "abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace anisomax

namespace anisomax {

QuadratureRule gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw Error(ErrorCode::InputInvalid, "gauss_legendre needs n >= 1");
  Mat jacobi = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi);
  QuadratureRule rule;
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (int k = 0; k < n; ++k) {
    const double v0 = eig.eigenvectors()(0, k);
    rule.nodes.push_back(mid + half * eig.eigenvalues()(k));
    rule.weights.push_back(2.0 * v0 * v0 * half);
  }
  return rule;
}

}  // namespace anisomax
