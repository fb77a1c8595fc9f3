#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "etrs/linalg.hpp"

namespace etrs::conic {

/// Cartesian product of cones in the fixed row order
/// zero | nonnegative | second-order blocks | PSD blocks (svec).
struct ConeSpec {
  int zero_dim = 0;
  int nonneg_dim = 0;
  std::vector<int> soc_dims;
  std::vector<int> psd_side_lengths;

  int soc_total() const { return std::accumulate(soc_dims.begin(), soc_dims.end(), 0); }

  int psd_total() const {
    int t = 0;
    for (int m : psd_side_lengths) t += svec_size(m);
    return t;
  }

  /// Total number of rows, zero cone included.
  int dim() const { return zero_dim + nonneg_dim + soc_total() + psd_total(); }

  /// Barrier degree of the non-zero part.
  int degree() const {
    return nonneg_dim + static_cast<int>(soc_dims.size()) +
           std::accumulate(psd_side_lengths.begin(), psd_side_lengths.end(), 0);
  }

  void validate() const {
    if (zero_dim < 0 || nonneg_dim < 0) throw std::invalid_argument("negative cone dimension");
    for (int d : soc_dims)
      if (d < 1) throw std::invalid_argument("second-order cone blocks need dimension >= 1");
    for (int m : psd_side_lengths)
      if (m < 1) throw std::invalid_argument("PSD blocks need side length >= 1");
  }

  /// The same product with the zero cone removed.
  ConeSpec without_zero() const {
    ConeSpec out = *this;
    out.zero_dim = 0;
    return out;
  }

  void append(const ConeSpec& other) {
    if (other.zero_dim != 0 || zero_dim != 0) {
      throw std::invalid_argument("ConeSpec::append does not merge zero cones");
    }
    nonneg_dim += other.nonneg_dim;
    soc_dims.insert(soc_dims.end(), other.soc_dims.begin(), other.soc_dims.end());
    psd_side_lengths.insert(psd_side_lengths.end(), other.psd_side_lengths.begin(),
                            other.psd_side_lengths.end());
  }
};

inline bool operator==(const ConeSpec& a, const ConeSpec& b) {
  return a.zero_dim == b.zero_dim && a.nonneg_dim == b.nonneg_dim && a.soc_dims == b.soc_dims &&
         a.psd_side_lengths == b.psd_side_lengths;
}

// ---------------------------------------------------------------------------
// Euclidean projections

inline Vec project_soc(const Vec& v) {
  const double t = v(0);
  const double nx = v.tail(v.size() - 1).norm();
  if (nx <= t) return v;
  if (nx <= -t) return Vec::Zero(v.size());
  Vec out(v.size());
  const double a = 0.5 * (t + nx);
  out(0) = a;
  out.tail(v.size() - 1) = (a / nx) * v.tail(v.size() - 1);
  return out;
}

inline Vec project_psd_svec(const Vec& v) {
  Eigen::SelfAdjointEigenSolver<Mat> es(smat(v));
  const Vec lam = es.eigenvalues().cwiseMax(0.0);
  return svec(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

/// Projection onto K (zero rows map to 0).
inline Vec project(const ConeSpec& k, const Vec& v) {
  require_size(v.size(), k.dim(), "project");
  Vec out(v.size());
  int off = 0;
  out.segment(off, k.zero_dim).setZero();
  off += k.zero_dim;
  out.segment(off, k.nonneg_dim) = v.segment(off, k.nonneg_dim).cwiseMax(0.0);
  off += k.nonneg_dim;
  for (int d : k.soc_dims) {
    out.segment(off, d) = project_soc(v.segment(off, d));
    off += d;
  }
  for (int m : k.psd_side_lengths) {
    const int len = svec_size(m);
    out.segment(off, len) = project_psd_svec(v.segment(off, len));
    off += len;
  }
  return out;
}

/// Projection onto the dual cone K* (zero rows are free).
inline Vec project_dual(const ConeSpec& k, const Vec& v) {
  Vec out = project(k, v);
  out.head(k.zero_dim) = v.head(k.zero_dim);
  return out;
}

/// Projection onto the polar cone -K*.
inline Vec project_polar(const ConeSpec& k, const Vec& v) { return -project_dual(k, -v); }

// ---------------------------------------------------------------------------
// Jordan algebra on the zero-free part. PSD blocks are svec-encoded.

inline Vec identity_element(const ConeSpec& k) {
  Vec e = Vec::Zero(k.dim() - k.zero_dim);
  int off = 0;
  e.segment(off, k.nonneg_dim).setOnes();
  off += k.nonneg_dim;
  for (int d : k.soc_dims) {
    e(off) = 1.0;
    off += d;
  }
  for (int m : k.psd_side_lengths) {
    for (int j = 0; j < m; ++j) e(off + svec_index(m, j, j)) = 1.0;
    off += svec_size(m);
  }
  return e;
}

/// Smallest Jordan eigenvalue; positive iff u is interior.
inline double min_eigenvalue(const ConeSpec& k, const Vec& u) {
  double best = std::numeric_limits<double>::infinity();
  int off = 0;
  if (k.nonneg_dim > 0) best = std::min(best, u.segment(off, k.nonneg_dim).minCoeff());
  off += k.nonneg_dim;
  for (int d : k.soc_dims) {
    best = std::min(best, u(off) - u.segment(off + 1, d - 1).norm());
    off += d;
  }
  for (int m : k.psd_side_lengths) {
    const int len = svec_size(m);
    Eigen::SelfAdjointEigenSolver<Mat> es(smat(u.segment(off, len)), Eigen::EigenvaluesOnly);
    best = std::min(best, es.eigenvalues()(0));
    off += len;
  }
  return best;
}

/// Jordan product u o v.
inline Vec jordan_product(const ConeSpec& k, const Vec& u, const Vec& v) {
  Vec out(u.size());
  int off = 0;
  out.segment(off, k.nonneg_dim) =
      u.segment(off, k.nonneg_dim).cwiseProduct(v.segment(off, k.nonneg_dim));
  off += k.nonneg_dim;
  for (int d : k.soc_dims) {
    out(off) = u.segment(off, d).dot(v.segment(off, d));
    out.segment(off + 1, d - 1) =
        u(off) * v.segment(off + 1, d - 1) + v(off) * u.segment(off + 1, d - 1);
    off += d;
  }
  for (int m : k.psd_side_lengths) {
    const int len = svec_size(m);
    const Mat a = smat(u.segment(off, len));
    const Mat b = smat(v.segment(off, len));
    out.segment(off, len) = svec(0.5 * (a * b + b * a));
    off += len;
  }
  return out;
}

/// Solves lam o x = v for x, where lam is a scaled point whose PSD blocks are diagonal.
inline Vec jordan_divide(const ConeSpec& k, const Vec& lam, const Vec& v) {
  Vec out(v.size());
  int off = 0;
  out.segment(off, k.nonneg_dim) =
      v.segment(off, k.nonneg_dim).cwiseQuotient(lam.segment(off, k.nonneg_dim));
  off += k.nonneg_dim;
  for (int d : k.soc_dims) {
    const double l0 = lam(off);
    const auto l1 = lam.segment(off + 1, d - 1);
    const auto v1 = v.segment(off + 1, d - 1);
    const double x0 = (l0 * v(off) - l1.dot(v1)) / (l0 * l0 - l1.squaredNorm());
    out(off) = x0;
    out.segment(off + 1, d - 1) = (v1 - x0 * l1) / l0;
    off += d;
  }
  for (int m : k.psd_side_lengths) {
    for (int j = 0; j < m; ++j) {
      const double lj = lam(off + svec_index(m, j, j));
      for (int i = j; i < m; ++i) {
        const double li = lam(off + svec_index(m, i, i));
        const int idx = off + svec_index(m, i, j);
        out(idx) = 2.0 * v(idx) / (li + lj);
      }
    }
    off += svec_size(m);
  }
  return out;
}

/// Largest alpha with lam + alpha * d in K (infinity if unbounded); lam interior with
/// diagonal PSD blocks.
inline double max_step(const ConeSpec& k, const Vec& lam, const Vec& d) {
  double alpha = std::numeric_limits<double>::infinity();
  int off = 0;
  for (int i = 0; i < k.nonneg_dim; ++i) {
    if (d(i) < 0) alpha = std::min(alpha, -lam(i) / d(i));
  }
  off += k.nonneg_dim;
  for (int dim : k.soc_dims) {
    const double l0 = lam(off);
    const auto l1 = lam.segment(off + 1, dim - 1);
    const double d0 = d(off);
    const auto d1 = d.segment(off + 1, dim - 1);
    const double qa = d0 * d0 - d1.squaredNorm();
    const double qb = 2.0 * (l0 * d0 - l1.dot(d1));
    const double qc = std::max(l0 * l0 - l1.squaredNorm(), 0.0);
    double root = std::numeric_limits<double>::infinity();
    const double disc = qb * qb - 4.0 * qa * qc;
    if (qa < 0) {
      // exactly one nonnegative root
      const double sq = std::sqrt(std::max(disc, 0.0));
      const double q = -0.5 * (qb + std::copysign(sq, qb));
      root = q / qa;
      if (q != 0.0) root = std::max(root, qc / q);
    } else if (qb < 0 && disc >= 0) {
      const double sq = std::sqrt(disc);
      // both roots positive; the smaller one, computed stably
      root = (2.0 * qc) / (-qb + sq);
    }
    if (d0 < 0) root = std::min(root, -l0 / d0);
    alpha = std::min(alpha, root);
    off += dim;
  }
  for (int m : k.psd_side_lengths) {
    const int len = svec_size(m);
    Vec isq(m);
    for (int j = 0; j < m; ++j) isq(j) = 1.0 / std::sqrt(lam(off + svec_index(m, j, j)));
    const Mat dm = smat(d.segment(off, len));
    const Mat scaled = -(isq.asDiagonal() * dm * isq.asDiagonal());
    Eigen::SelfAdjointEigenSolver<Mat> es(scaled, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues()(m - 1);
    if (top > 0) alpha = std::min(alpha, 1.0 / top);
    off += len;
  }
  return alpha;
}

// ---------------------------------------------------------------------------
// Nesterov-Todd scaling: W z = W^{-T} s = lambda.

struct NtScaling {
  Vec d;  // nonnegative block: sqrt(s ./ z)
  std::vector<double> beta;
  std::vector<Vec> v;  // hyperbolic reflection vectors, v' J v = 1
  std::vector<Mat> r;
  std::vector<Mat> rinv;
  Vec lambda;  // PSD blocks hold svec(diag(eigenvalues))
};

enum class ScaleOp { W, WT, WInv, WInvT };

/// Throws std::runtime_error if s or z is not strictly interior.
inline NtScaling compute_scaling(const ConeSpec& k, const Vec& s, const Vec& z) {
  NtScaling w;
  w.lambda = Vec::Zero(s.size());
  int off = 0;
  const int l = k.nonneg_dim;
  if ((s.head(l).array() <= 0).any() || (z.head(l).array() <= 0).any()) {
    throw std::runtime_error("nonnegative block left the cone interior");
  }
  w.d = (s.head(l).array() / z.head(l).array()).sqrt();
  w.lambda.head(l) = (s.head(l).array() * z.head(l).array()).sqrt();
  off += l;
  for (int dim : k.soc_dims) {
    const Vec sb = s.segment(off, dim);
    const Vec zb = z.segment(off, dim);
    const double sj = sb(0) * sb(0) - sb.tail(dim - 1).squaredNorm();
    const double zj = zb(0) * zb(0) - zb.tail(dim - 1).squaredNorm();
    if (!(sj > 0) || !(zj > 0) || sb(0) <= 0 || zb(0) <= 0) {
      throw std::runtime_error("second-order block left the cone interior");
    }
    const double a = std::sqrt(sj);
    const double b = std::sqrt(zj);
    const Vec sn = sb / a;
    Vec zn = zb / b;
    const double gam = std::sqrt(0.5 * (1.0 + sn.dot(zn)));
    zn.tail(dim - 1) *= -1.0;  // J z
    const Vec wb = (sn + zn) / (2.0 * gam);
    Vec v = wb;
    v(0) += 1.0;
    v /= std::sqrt(2.0 * (wb(0) + 1.0));
    const double beta = std::sqrt(a / b);
    w.beta.push_back(beta);
    w.v.push_back(v);
    // lambda = W z
    Vec jz = zb;
    jz.tail(dim - 1) *= -1.0;
    w.lambda.segment(off, dim) = beta * (2.0 * v * v.dot(zb) - jz);
    off += dim;
  }
  for (int m : k.psd_side_lengths) {
    const int len = svec_size(m);
    Eigen::LLT<Mat> ls(smat(s.segment(off, len)));
    Eigen::LLT<Mat> lz(smat(z.segment(off, len)));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
      throw std::runtime_error("PSD block left the cone interior");
    }
    const Mat lsm = ls.matrixL();
    const Mat lzm = lz.matrixL();
    Eigen::JacobiSVD<Mat> svd(lzm.transpose() * lsm, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec sig = svd.singularValues();
    if ((sig.array() <= 0).any()) throw std::runtime_error("degenerate PSD scaling");
    const Vec isq = sig.cwiseSqrt().cwiseInverse();
    const Mat r = lsm * svd.matrixV() * isq.asDiagonal();
    const Mat lsinv = lsm.triangularView<Eigen::Lower>().solve(Mat::Identity(m, m));
    const Mat rinv = sig.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * lsinv;
    w.r.push_back(r);
    w.rinv.push_back(rinv);
    for (int j = 0; j < m; ++j) w.lambda(off + svec_index(m, j, j)) = sig(j);
    off += len;
  }
  return w;
}

namespace detail {

inline Vec scale_soc(double beta, const Vec& v, ScaleOp op, const Vec& u) {
  const int dim = static_cast<int>(u.size());
  Vec ju = u;
  ju.tail(dim - 1) *= -1.0;
  if (op == ScaleOp::W || op == ScaleOp::WT) {
    return beta * (2.0 * v * v.dot(u) - ju);
  }
  Vec jv = v;
  jv.tail(dim - 1) *= -1.0;
  return (2.0 * jv * jv.dot(u) - ju) / beta;
}

inline Mat congruence(const NtScaling& w, std::size_t idx, ScaleOp op, const Mat& u) {
  switch (op) {
    case ScaleOp::W:
      return w.r[idx].transpose() * u * w.r[idx];
    case ScaleOp::WT:
      return w.r[idx] * u * w.r[idx].transpose();
    case ScaleOp::WInv:
      return w.rinv[idx].transpose() * u * w.rinv[idx];
    case ScaleOp::WInvT:
      return w.rinv[idx] * u * w.rinv[idx].transpose();
  }
  return u;
}

}  // namespace detail

/// Applies W, W^T, W^{-1} or W^{-T} to a vector over the zero-free part.
inline Vec apply_scaling(const ConeSpec& k, const NtScaling& w, ScaleOp op, const Vec& u) {
  Vec out(u.size());
  int off = 0;
  const int l = k.nonneg_dim;
  if (op == ScaleOp::W || op == ScaleOp::WT) {
    out.head(l) = u.head(l).cwiseProduct(w.d);
  } else {
    out.head(l) = u.head(l).cwiseQuotient(w.d);
  }
  off += l;
  for (std::size_t i = 0; i < k.soc_dims.size(); ++i) {
    const int dim = k.soc_dims[i];
    out.segment(off, dim) = detail::scale_soc(w.beta[i], w.v[i], op, u.segment(off, dim));
    off += dim;
  }
  for (std::size_t i = 0; i < k.psd_side_lengths.size(); ++i) {
    const int len = svec_size(k.psd_side_lengths[i]);
    out.segment(off, len) = svec(detail::congruence(w, i, op, smat(u.segment(off, len))));
    off += len;
  }
  return out;
}

/// Column-wise scaling of a matrix; columns that vanish on a block are skipped there.
inline Mat apply_scaling_columns(const ConeSpec& k, const NtScaling& w, ScaleOp op,
                                 const Mat& g) {
  Mat out = Mat::Zero(g.rows(), g.cols());
  const auto cols = g.cols();
  int off = 0;
  const int l = k.nonneg_dim;
  if (l > 0) {
    const Vec f = (op == ScaleOp::W || op == ScaleOp::WT) ? w.d : Vec(w.d.cwiseInverse());
    out.topRows(l) = f.asDiagonal() * g.topRows(l);
  }
  off += l;
  auto active = [&](int row0, int len, Eigen::Index j) {
    return g.col(j).segment(row0, len).cwiseAbs().maxCoeff() > 0.0;
  };
  for (std::size_t i = 0; i < k.soc_dims.size(); ++i) {
    const int dim = k.soc_dims[i];
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!active(off, dim, j)) continue;
      out.col(j).segment(off, dim) =
          detail::scale_soc(w.beta[i], w.v[i], op, g.col(j).segment(off, dim));
    }
    off += dim;
  }
  for (std::size_t i = 0; i < k.psd_side_lengths.size(); ++i) {
    const int len = svec_size(k.psd_side_lengths[i]);
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!active(off, len, j)) continue;
      out.col(j).segment(off, len) =
          svec(detail::congruence(w, i, op, smat(g.col(j).segment(off, len))));
    }
    off += len;
  }
  return out;
}

}  // namespace etrs::conic
