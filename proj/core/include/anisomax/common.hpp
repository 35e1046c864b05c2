#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anisomax {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorCode {
  NonSquare,
  EigenvalueNotExpanding,
  NumericalFailure,
  WindowExhausted,
  DegenerateFit,
  BudgetExceeded,
  NotNormalized,
  InputInvalid,
  ResolutionTooCoarse,
  ConfigInvalid,
  TailNotNegligible,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Ordinary least squares of y on x with intercept. Returns {slope, intercept}.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Shortest round-trip decimal representation; used for all CSV output so
// repeated runs are byte-identical.
std::string format_double(double v);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [lo, hi] (Golub-Welsch).
QuadratureRule gauss_legendre(int n, double lo = -1.0, double hi = 1.0);

}  // namespace anisomax
