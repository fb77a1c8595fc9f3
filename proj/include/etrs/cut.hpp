#pragma once

#include <stdexcept>
#include <string>

#include "etrs/model.hpp"

namespace etrs {

/// UseGamma keeps the lower radius in the cut; UseZero replaces it by 0.
enum class CutVariant { UseGamma, UseZero };

inline const char* to_string(CutVariant v) {
  return v == CutVariant::UseGamma ? "use_gamma" : "use_zero";
}

inline CutVariant parse_cut_variant(const std::string& s) {
  if (s == "use_gamma") return CutVariant::UseGamma;
  if (s == "use_zero") return CutVariant::UseZero;
  throw std::invalid_argument("unknown cut variant '" + s + "'");
}

/// One member of the cut family, built from a quadratic q(x) = x'Hq x + 2gq'x + fq and a
/// linear l(x) = 2gl'x + fl that are nonnegative on the feasible set, together with a
/// lower bound qlow on q + l.
struct Cut {
  Mat Hq;
  Vec gq;
  double fq = 0.0;
  Vec gl;
  double fl = 0.0;
  double qlow = 0.0;
  CutVariant variant = CutVariant::UseGamma;
  double rho = 0.0;

  static Cut zero(int n) {
    Cut c;
    c.Hq = Mat::Zero(n, n);
    c.gq = Vec::Zero(n);
    c.gl = Vec::Zero(n);
    return c;
  }

  /// [[fq, gq'], [gq, Hq]].
  Mat q_matrix() const {
    const auto n = gq.size();
    Mat m(n + 1, n + 1);
    m(0, 0) = fq;
    m.block(1, 0, n, 1) = gq;
    m.block(0, 1, 1, n) = gq.transpose();
    m.bottomRightCorner(n, n) = Hq;
    return m;
  }

  /// [[fl, gl'], [gl, 0]].
  Mat l_matrix() const {
    const auto n = gl.size();
    Mat m = Mat::Zero(n + 1, n + 1);
    m(0, 0) = fl;
    m.block(1, 0, n, 1) = gl;
    m.block(0, 1, 1, n) = gl.transpose();
    return m;
  }

  double q(const Vec& x) const { return x.dot(Hq * x) + 2.0 * gq.dot(x) + fq; }
  double l(const Vec& x) const { return 2.0 * gl.dot(x) + fl; }
};

/// Affine function phi(x) = phi0 + phi1'x that multiplies l(x) inside the cut.
struct CutMultiplier {
  double phi0 = 0.0;
  Vec phi1;
};

inline CutMultiplier cut_multiplier(const EtrsInstance& inst, CutVariant variant, double rho) {
  const double g = variant == CutVariant::UseGamma ? inst.gamma : 0.0;
  const double nu = inst.nu;
  CutMultiplier m;
  m.phi0 = -(g + nu) * inst.alpha - g * nu + rho * nu;
  m.phi1 = (g + nu) * inst.b + inst.c;
  return m;
}

/// Homogenized generator M of a cut: the cut reads M . Y(x, X) >= 0.
///
/// Expanding the cut and cancelling the gamma*nu*q term on both sides leaves
/// nu^2 q + l * phi - qlow * tr(X) >= 0, with products of x-terms linearized into X.
inline Mat cut_generator(const Cut& cut, const EtrsInstance& inst) {
  const int n = inst.n;
  require_size(cut.gq.size(), n, "cut gq");
  require_size(cut.gl.size(), n, "cut gl");
  const CutMultiplier phi = cut_multiplier(inst, cut.variant, cut.rho);
  Mat m = inst.nu * inst.nu * cut.q_matrix();
  m(0, 0) += cut.fl * phi.phi0;
  const Vec border = phi.phi0 * cut.gl + 0.5 * cut.fl * phi.phi1;
  m.block(1, 0, n, 1) += border;
  m.block(0, 1, 1, n) += border.transpose();
  m.bottomRightCorner(n, n) += cut.gl * phi.phi1.transpose() + phi.phi1 * cut.gl.transpose();
  m.bottomRightCorner(n, n).diagonal().array() -= cut.qlow;
  return m;
}

/// A linear inequality  A . X + a'x + a0 >= 0  in the lifted space.
struct LinearRow {
  Mat A;
  Vec a;
  double a0 = 0.0;

  double evaluate(const LiftedPoint& p) const { return inner(A, p.X) + a.dot(p.x) + a0; }

  /// Generator M with M . Y(x, X) equal to the left-hand side.
  Mat generator() const {
    const auto n = a.size();
    Mat m(n + 1, n + 1);
    m(0, 0) = a0;
    m.block(1, 0, n, 1) = 0.5 * a;
    m.block(0, 1, 1, n) = 0.5 * a.transpose();
    m.bottomRightCorner(n, n) = symmetrize(A);
    return m;
  }

  static LinearRow from_generator(const Mat& m) {
    const auto n = m.rows() - 1;
    LinearRow r;
    r.a0 = m(0, 0);
    r.a = m.block(1, 0, n, 1) + m.block(0, 1, 1, n).transpose();
    r.A = symmetrize(m.bottomRightCorner(n, n));
    return r;
  }
};

inline LinearRow cut_to_linear(const Cut& cut, const EtrsInstance& inst) {
  return LinearRow::from_generator(cut_generator(cut, inst));
}

}  // namespace etrs
