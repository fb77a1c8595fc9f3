#pragma once

// Two-bus substructure of the OPF relaxation: the rank-1 system in (W11, W22, W12, T12),
// its real three-dimensional model, and the closed-form hull inequalities.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "etrs/slabs.hpp"

namespace etrs::opf {

struct OpfBusPair {
  double L11 = 0.0, L22 = 0.0, L12 = 0.0;
  double U11 = 0.0, U22 = 0.0, U12 = 0.0;

  void validate(bool for_soc = true) const {
    if (!(L11 <= U11 && L22 <= U22 && L12 <= U12)) throw std::invalid_argument("OPF data needs L <= U");
    if (L11 < 0.0 || L22 < 0.0) throw std::invalid_argument("OPF data needs L11, L22 >= 0");
    if (for_soc && !(L22 > 0.0 && U12 > L12)) {
      throw std::invalid_argument("OPF data needs L22 > 0 and U12 > L12");
    }
  }
};

struct HullPoint {
  double W11 = 0.0, W22 = 0.0, W12 = 0.0, T12 = 0.0;
};

/// (W11, W22, W12, T12) = (x1^2 + x2^2, x3^2, x1 x3, x2 x3).
inline HullPoint generator_point(const Vec& x) {
  require_size(x.size(), 3, "OPF point");
  return {x(0) * x(0) + x(1) * x(1), x(2) * x(2), x(0) * x(2), x(1) * x(2)};
}

/// b with |r_j| = b'r_j, so that cone{r1, r2} = {x : |x| <= b'x}.
inline Eigen::Vector2d cone_to_soc(const Eigen::Vector2d& r1, const Eigen::Vector2d& r2) {
  if (r1.norm() == 0.0 || r2.norm() == 0.0) throw std::invalid_argument("cone rays must be nonzero");
  Eigen::Matrix2d R;
  R.row(0) = r1.transpose();
  R.row(1) = r2.transpose();
  if (std::abs(R.determinant()) <= 1e-14 * r1.norm() * r2.norm()) {
    throw std::invalid_argument("cone rays are parallel");
  }
  return R.partialPivLu().solve(Eigen::Vector2d(r1.norm(), r2.norm()));
}

/// gamma <= |(x1, x2)| <= nu,  |(x1, x2)| <= b'(x1, x2),  lambda <= x3 <= mu.
struct OpfSet {
  double gamma = 0.0;
  double nu = 0.0;
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  double lambda = 0.0;
  double mu = 0.0;

  bool contains(const Vec& x, double tol = 1e-9) const {
    require_size(x.size(), 3, "OPF point");
    const double r = x.head<2>().norm();
    return r >= gamma - tol && r <= nu + tol && r <= b.dot(x.head<2>()) + tol &&
           x(2) >= lambda - tol && x(2) <= mu + tol;
  }
};

namespace detail {

// With L12 == U12 the cone is a single ray r, and b = r / |r| cuts out exactly that ray.
// This is also the limit of cone_to_soc as the two rays merge.
inline OpfSet opf_set(const OpfBusPair& d) {
  OpfSet s;
  s.gamma = std::sqrt(d.L11);
  s.nu = std::sqrt(d.U11);
  if (d.L12 == d.U12) {
    s.b = Eigen::Vector2d(1.0, d.L12).normalized();
  } else {
    s.b = cone_to_soc({1.0, d.L12}, {1.0, d.U12});
  }
  s.lambda = std::sqrt(d.L22);
  s.mu = std::sqrt(d.U22);
  return s;
}

}  // namespace detail

inline OpfSet build_opf_instance(const OpfBusPair& d) {
  d.validate();
  return detail::opf_set(d);
}

/// (sqrt(1 + x^2) - 1) / x, with f(0) = 0; the same expression is used for x < 0.
inline double chen_f(double x) { return x / (std::sqrt(1.0 + x * x) + 1.0); }

inline std::array<double, 5> chen_pi(const OpfBusPair& d) {
  d.validate(false);
  const double fl = chen_f(d.L12);
  const double fu = chen_f(d.U12);
  const double scale = (std::sqrt(d.L11) + std::sqrt(d.U11)) * (std::sqrt(d.L22) + std::sqrt(d.U22));
  return {-std::sqrt(d.L11 * d.L22 * d.U11 * d.U22), -std::sqrt(d.L22 * d.U22),
          -std::sqrt(d.L11 * d.U11), scale * (1.0 - fl * fu) / (1.0 + fl * fu),
          scale * (fl + fu) / (1.0 + fl * fu)};
}

/// constant + coef . (W11, W22, W12, T12) >= 0.
struct HullRow {
  double constant = 0.0;
  Eigen::Vector4d coef = Eigen::Vector4d::Zero();

  double evaluate(const HullPoint& w) const {
    return constant + coef.dot(Eigen::Vector4d(w.W11, w.W22, w.W12, w.T12));
  }
};

/// The upper-bound and lower-bound rows for given coefficients, both moved to the form
/// row >= 0.
inline std::pair<HullRow, HullRow> hull_rows(const OpfBusPair& d, const std::array<double, 5>& pi) {
  HullRow upper{pi[0] + d.U11 * d.U22, {pi[1] - d.U22, pi[2] - d.U11, pi[3], pi[4]}};
  HullRow lower{pi[0] + d.L11 * d.L22, {pi[1] - d.L22, pi[2] - d.L11, pi[3], pi[4]}};
  return {upper, lower};
}

inline std::pair<HullRow, HullRow> chen_inequalities(const OpfBusPair& d) {
  return hull_rows(d, chen_pi(d));
}

/// The two special-case cut rows for the three-dimensional model, in (x, X) coordinates.
/// Unlike build_opf_instance this accepts L12 == U12.
inline std::pair<LinearRow, LinearRow> special_case_opf_rows(const OpfBusPair& d) {
  d.validate(false);
  const OpfSet set = detail::opf_set(d);
  Vec s = Vec::Zero(3);
  s(2) = 1.0;
  Vec b = Vec::Zero(3);
  b.head<2>() = set.b;
  Mat trace = Mat::Zero(3, 3);
  trace(0, 0) = trace(1, 1) = 1.0;
  return special_case_rows(set.gamma, set.nu, set.lambda, set.mu, s, b, trace);
}

struct RowProjection {
  HullRow row;
  double residual = 0.0;  // size of the coefficients with no counterpart in (W11, W22, W12, T12)
};

/// Rewrites a row in (x, X) in terms of (W11, W22, W12, T12) = (X11 + X22, X33, X13, X23).
inline RowProjection project_row(const LinearRow& r) {
  RowProjection p;
  p.row.constant = r.a0;
  p.row.coef << 0.5 * (r.A(0, 0) + r.A(1, 1)), r.A(2, 2), 2.0 * r.A(0, 2), 2.0 * r.A(1, 2);
  p.residual = std::max({r.a.cwiseAbs().maxCoeff(), std::abs(r.A(0, 0) - r.A(1, 1)),
                         2.0 * std::abs(r.A(0, 1))});
  return p;
}

inline bool rows_match(const HullRow& a, const HullRow& b, double tol) {
  auto close = [tol](double u, double v) { return std::abs(u - v) <= tol * (1.0 + std::abs(v)); };
  if (!close(a.constant, b.constant)) return false;
  for (int i = 0; i < 4; ++i) {
    if (!close(a.coef(i), b.coef(i))) return false;
  }
  return true;
}

/// Checks that the special-case cut rows coincide with the closed-form hull rows, given
/// the hull coefficients `pi` (defaults to chen_pi(d)).
inline bool verify_equivalence(const OpfBusPair& d, const std::array<double, 5>& pi,
                               double tol = 1e-8) {
  const auto [a, b] = special_case_opf_rows(d);
  const RowProjection pa = project_row(a);
  const RowProjection pb = project_row(b);
  if (pa.residual > tol || pb.residual > tol) return false;
  const auto [upper, lower] = hull_rows(d, pi);
  return rows_match(pa.row, upper, tol) && rows_match(pb.row, lower, tol);
}

inline bool verify_equivalence(const OpfBusPair& d, double tol = 1e-8) {
  return verify_equivalence(d, chen_pi(d), tol);
}

}  // namespace etrs::opf
