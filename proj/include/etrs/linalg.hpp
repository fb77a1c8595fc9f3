#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace etrs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kSqrt2 = 1.41421356237309504880;

/// Length of the symmetric vectorization of an m x m matrix.
constexpr int svec_size(int m) { return m * (m + 1) / 2; }

/// Position of entry (i, j), i >= j, in the lower-triangular column-major svec.
constexpr int svec_index(int m, int i, int j) {
  if (i < j) {
    const int t = i;
    i = j;
    j = t;
  }
  return j * m - j * (j - 1) / 2 + (i - j);
}

/// Side length m such that svec_size(m) == len.
inline int svec_side(int len) {
  const int m = static_cast<int>(std::lround((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0));
  if (svec_size(m) != len) {
    throw std::invalid_argument("svec length " + std::to_string(len) + " is not triangular");
  }
  return m;
}

// Off-diagonals carry a sqrt(2) factor so that svec(A).dot(svec(B)) == trace(A B).
inline Vec svec(const Mat& a) {
  const int m = static_cast<int>(a.rows());
  Vec out(svec_size(m));
  int k = 0;
  for (int j = 0; j < m; ++j) {
    out(k++) = a(j, j);
    for (int i = j + 1; i < m; ++i) out(k++) = 0.5 * kSqrt2 * (a(i, j) + a(j, i));
  }
  return out;
}

template <typename Derived>
Mat smat(const Eigen::MatrixBase<Derived>& v) {
  const int m = svec_side(static_cast<int>(v.size()));
  Mat out(m, m);
  int k = 0;
  for (int j = 0; j < m; ++j) {
    out(j, j) = v(k++);
    for (int i = j + 1; i < m; ++i) {
      out(i, j) = out(j, i) = v(k++) / kSqrt2;
    }
  }
  return out;
}

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline bool is_symmetric(const Mat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol;
}

/// Trace inner product A . B.
inline double inner(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

/// Eigenvalues of a symmetric matrix in descending order.
inline Vec eigenvalues_desc(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

inline void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
  }
}

}  // namespace etrs
