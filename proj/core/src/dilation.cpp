#include "anisomax/dilation.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace anisomax {
namespace {

using cplx = std::complex<double>;

struct EigenCluster {
  cplx center;
  int multiplicity = 0;  // algebraic multiplicity over C
};

// Defective eigenvalues come back from the QR iteration split by roughly
// eps^(1/n); group them before doing any rank analysis.
std::vector<EigenCluster> cluster_eigenvalues(const Eigen::VectorXcd& ev, double scale) {
  const double tol = 1e-3 * std::max(1.0, scale);
  std::vector<cplx> vals(ev.data(), ev.data() + ev.size());
  std::sort(vals.begin(), vals.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  std::vector<int> label(vals.size(), -1);
  std::vector<EigenCluster> out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (label[i] >= 0) continue;
    label[i] = static_cast<int>(out.size());
    std::vector<std::size_t> members{i};
    for (std::size_t k = 0; k < members.size(); ++k) {
      for (std::size_t j = 0; j < vals.size(); ++j) {
        if (label[j] < 0 && std::abs(vals[j] - vals[members[k]]) < tol) {
          label[j] = label[i];
          members.push_back(j);
        }
      }
    }
    cplx sum = 0;
    for (auto m : members) sum += vals[m];
    EigenCluster c;
    c.center = sum / static_cast<double>(members.size());
    c.multiplicity = static_cast<int>(members.size());
    out.push_back(c);
  }
  return out;
}

int nullity(const Mat& M, double tol) {
  Eigen::JacobiSVD<Mat> svd(M);
  const auto& s = svd.singularValues();
  int n = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) <= tol) ++n;
  return n;
}

Mat null_basis(const Mat& M, int count) {
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
  // Singular values are sorted descending; the trailing columns of V span the kernel.
  return svd.matrixV().rightCols(count);
}

double op_norm(const Mat& M) {
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

// Real polynomial whose kernel powers give the real generalized eigenspace.
Mat real_factor(const Mat& A, cplx lambda, bool is_complex) {
  const Eigen::Index d = A.rows();
  const Mat I = Mat::Identity(d, d);
  if (!is_complex) return A - lambda.real() * I;
  return A * A - 2.0 * lambda.real() * A + std::norm(lambda) * I;
}

Mat matrix_power(const Mat& base, int e) {
  Mat result = Mat::Identity(base.rows(), base.cols());
  Mat b = base;
  while (e > 0) {
    if (e & 1) result = result * b;
    b = b * b;
    e >>= 1;
  }
  return result;
}

}  // namespace

Mat DilationStructure::power(int k) const {
  if (!power_table.empty() && k >= -kPowerTableRadius && k <= kPowerTableRadius) {
    return power_table[static_cast<std::size_t>(k + kPowerTableRadius)];
  }
  if (k >= 0) return matrix_power(matrix, k);
  return matrix_power(matrix.inverse(), -k);
}

DilationStructure validate_dilation(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw Error(ErrorCode::NonSquare, "dilation matrix must be square and non-empty");
  }
  if (!A.allFinite()) throw Error(ErrorCode::InputInvalid, "dilation matrix has non-finite entries");

  const int d = static_cast<int>(A.rows());
  Eigen::EigenSolver<Mat> es(A, false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "eigenvalue iteration did not converge");
  }
  const Eigen::VectorXcd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) <= 1.0 + kSpectralTolerance) {
      throw Error(ErrorCode::EigenvalueNotExpanding,
                  "eigenvalue of modulus " + format_double(std::abs(ev(i))) + " is not > 1");
    }
  }

  DilationStructure D;
  D.matrix = A;
  D.dim = d;
  D.det_scale = std::abs(A.determinant());

  const double a_norm = op_norm(A);
  auto clusters = cluster_eigenvalues(ev, a_norm);
  const double ctol = 1e-3 * std::max(1.0, a_norm);

  double r = std::numeric_limits<double>::infinity();
  for (const auto& c : clusters) r = std::min(r, std::abs(c.center));
  D.r_min = r;

  // Among clusters of modulus r, find the longest nilpotent chain. A complex
  // conjugate pair is analysed once, through its real quadratic factor, so a
  // 2n x 2n real block counts as size n.
  int best_n = 0;
  Mat best_factor;
  int best_real_mult = 0;
  for (const auto& c : clusters) {
    if (std::abs(c.center) > r * (1.0 + 1e-6)) continue;
    const bool is_complex = std::abs(c.center.imag()) > ctol;
    if (is_complex && c.center.imag() < 0) continue;
    const cplx lam = is_complex ? c.center : cplx(c.center.real(), 0.0);
    const Mat P = real_factor(A, lam, is_complex);
    const int real_mult = is_complex ? 2 * c.multiplicity : c.multiplicity;
    const double base_tol = 1e-7 * std::max(1.0, op_norm(P));
    int index = 0;
    Mat Pj = Mat::Identity(d, d);
    for (int j = 1; j <= c.multiplicity; ++j) {
      Pj = Pj * P;
      if (nullity(Pj, base_tol * std::pow(std::max(1.0, op_norm(P)), j - 1)) >= real_mult) {
        index = j;
        break;
      }
    }
    if (index == 0) throw Error(ErrorCode::NumericalFailure, "could not resolve Jordan structure");
    if (index > best_n) {
      best_n = index;
      best_factor = P;
      best_real_mult = real_mult;
    }
  }
  if (best_n == 0) throw Error(ErrorCode::NumericalFailure, "no eigenvalue attains the minimum modulus");
  D.block_size = best_n;

  // Slow vector: project the coordinate axes onto the generalized eigenspace
  // and keep the one whose chain reaches deepest; ties go to the first axis.
  const Mat Pn = matrix_power(best_factor, best_n);
  const Mat N = null_basis(Pn, best_real_mult);
  const Mat proj = N * N.transpose();
  const Mat top = matrix_power(best_factor, best_n - 1);
  double best_score = -1.0;
  Vec v;
  for (int i = 0; i < d; ++i) {
    Vec pe = proj.col(i);
    const double len = pe.norm();
    if (len < 1e-9) continue;
    pe /= len;
    const double score = (top * pe).norm();
    if (score > best_score * (1.0 + 1e-9) + 1e-12) {
      best_score = score;
      v = pe;
    }
  }
  if (v.size() == 0) throw Error(ErrorCode::NumericalFailure, "empty slow eigenspace");
  D.slow_vector = v;

  Vec w = top * v;
  if (w.norm() < 1e-12) w = v;
  // For a real eigenvalue A w is parallel to w; otherwise W is the
  // A-invariant plane spanned by w and A w.
  Mat W;
  const Vec Aw = A * w;
  if (std::abs(w.normalized().dot(Aw.normalized())) > 1.0 - 1e-10) {
    W = w.normalized();
  } else {
    Mat span(d, 2);
    span.col(0) = w;
    span.col(1) = Aw;
    Eigen::HouseholderQR<Mat> qr(span);
    W = qr.householderQ() * Mat::Identity(d, 2);
  }
  D.slow_subspace = W;

  const Mat Ainv = A.inverse();
  D.power_table.reserve(2 * kPowerTableRadius + 1);
  for (int k = -kPowerTableRadius; k <= kPowerTableRadius; ++k) {
    D.power_table.push_back(k >= 0 ? matrix_power(A, k) : matrix_power(Ainv, -k));
  }

  D.norm_power = normalization_power(D);
  return D;
}

double quasi_metric(const DilationStructure& D, const Vec& x, const Vec& y) {
  const Vec z = y - x;
  if (z.norm() == 0.0) return 0.0;
  const Mat Ainv = D.inverse();
  auto member = [&](int k) {
    // |A^-k z| <= 1
    Vec u = z;
    if (k < 0) {
      for (int i = 0; i < -k; ++i) u = D.matrix * u;
    } else {
      for (int i = 0; i < k; ++i) u = Ainv * u;
    }
    return u.norm() <= 1.0;
  };
  const int lo = -kQuasiMetricWindow;
  if (member(lo - 1)) throw Error(ErrorCode::WindowExhausted, "k* lies below the scan window");
  for (int k = lo; k <= kQuasiMetricWindow; ++k) {
    if (member(k)) return std::exp(static_cast<double>(k));
  }
  throw Error(ErrorCode::WindowExhausted, "k* lies above the scan window");
}

double cube_diameter(const DilationStructure& D, int tau) {
  const Mat P = D.power(tau);
  const int d = D.dim;
  std::vector<int> digits(d, -1);
  double best = 0.0;
  Vec u(d);
  while (true) {
    for (int i = 0; i < d; ++i) u(i) = digits[i];
    best = std::max(best, (P * u).norm());
    int i = 0;
    while (i < d && digits[i] == 1) digits[i++] = -1;
    if (i == d) break;
    ++digits[i];
  }
  return best;
}

double fit_diameter_exponent(const DilationStructure& D, int tau_lo, int tau_hi) {
  if (tau_hi >= 0) throw Error(ErrorCode::DegenerateFit, "tau range must be negative");
  if (tau_hi - tau_lo + 1 < 10) throw Error(ErrorCode::DegenerateFit, "tau range needs at least 10 points");
  std::vector<double> xs, ys;
  const double log_r = std::log(D.r_min);
  for (int tau = tau_lo; tau <= tau_hi; ++tau) {
    xs.push_back(std::log(static_cast<double>(-tau)));
    ys.push_back(std::log(cube_diameter(D, tau)) - tau * log_r);
  }
  return fit_line(xs, ys).slope;
}

double slow_alignment_error(const DilationStructure& D, int tau) {
  Vec it = D.power(tau) * D.slow_vector;
  it.normalize();
  const Mat& W = D.slow_subspace;
  const Vec residual = it - W * (W.transpose() * it);
  return residual.norm();
}

SlowDirection slowest_direction(const DilationStructure& D) {
  const double err = slow_alignment_error(D, -40);
  if (!(err < 0.05)) {
    throw Error(ErrorCode::NumericalFailure,
                "slow iterate misaligned with W by " + format_double(err) + " at tau=-40");
  }
  return {D.slow_vector, D.slow_subspace};
}

int normalization_power(const DilationStructure& D) {
  const Mat Ainv = D.inverse();
  Mat P = Ainv;
  for (int m = 1; m <= kQuasiMetricWindow; ++m) {
    if (op_norm(P) <= 0.5 + 1e-12) return m;
    P = P * Ainv;
  }
  throw Error(ErrorCode::WindowExhausted, "no power up to 64 contracts the unit ball into B(0,1/2)");
}

DilationStructure normalized(const DilationStructure& D) {
  if (D.norm_power == 1) return D;
  return validate_dilation(D.power(D.norm_power));
}

}  // namespace anisomax
