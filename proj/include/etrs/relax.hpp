#pragma once

// Convex relaxations of the lifted feasible set, all expressed as a cone R-hat of
// symmetric (n+1) x (n+1) matrices Y:  Y in R-hat  iff  map * svec(Y) in K.
// The relaxation itself is the slice Y00 = 1.

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "etrs/conic/solver.hpp"
#include "etrs/cut.hpp"
#include "etrs/model.hpp"

namespace etrs {

/// A cone given as the preimage of a product cone under a linear map on svec(Y).
struct ConeMap {
  conic::ConeSpec cone;
  Mat map;  // cone.dim() x svec_size(n + 1)

  int rows() const { return static_cast<int>(map.rows()); }

  void append(const ConeMap& other) {
    if (map.size() == 0) map.resize(0, other.map.cols());
    require_size(other.map.cols(), map.cols(), "ConeMap columns");
    // Rows must follow the canonical cone order, so blocks are interleaved by type.
    const auto split = [](const ConeMap& m) {
      std::vector<Mat> parts;
      int off = 0;
      parts.push_back(m.map.middleRows(off, m.cone.zero_dim));
      off += m.cone.zero_dim;
      parts.push_back(m.map.middleRows(off, m.cone.nonneg_dim));
      off += m.cone.nonneg_dim;
      int soc = 0;
      for (int d : m.cone.soc_dims) soc += d;
      parts.push_back(m.map.middleRows(off, soc));
      off += soc;
      parts.push_back(m.map.middleRows(off, m.map.rows() - off));
      return parts;
    };
    const auto a = split(*this);
    const auto b = split(other);
    Mat merged(map.rows() + other.map.rows(), map.cols());
    int r = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      merged.middleRows(r, a[i].rows()) = a[i];
      r += static_cast<int>(a[i].rows());
      merged.middleRows(r, b[i].rows()) = b[i];
      r += static_cast<int>(b[i].rows());
    }
    map = std::move(merged);
    cone.append(other.cone);
  }

  bool contains(const Mat& y, double tol) const {
    const Vec v = map * svec(y);
    return conic::min_eigenvalue(cone, v.tail(v.size() - cone.zero_dim)) >= -tol &&
           (cone.zero_dim == 0 || v.head(cone.zero_dim).cwiseAbs().maxCoeff() <= tol);
  }
};

namespace detail {

inline Mat border_matrix(int n, double corner, const Vec& border, const Mat& block) {
  Mat m(n + 1, n + 1);
  m(0, 0) = corner;
  m.block(1, 0, n, 1) = border;
  m.block(0, 1, 1, n) = border.transpose();
  m.bottomRightCorner(n, n) = block;
  return m;
}

/// Functional Y -> M . Y as a row acting on svec(Y).
inline Eigen::RowVectorXd functional_row(const Mat& m) { return svec(symmetrize(m)).transpose(); }

/// Unit generator picking out entry (i, j) of Y.
inline Mat entry_selector(int side, int i, int j) {
  Mat m = Mat::Zero(side, side);
  m(i, j) += 0.5;
  m(j, i) += 0.5;
  return m;
}

inline ConeMap linear_rows(const std::vector<Mat>& generators, int side) {
  ConeMap cm;
  cm.cone.nonneg_dim = static_cast<int>(generators.size());
  cm.map.resize(cm.cone.nonneg_dim, svec_size(side));
  for (std::size_t k = 0; k < generators.size(); ++k) {
    cm.map.row(static_cast<Eigen::Index>(k)) = functional_row(generators[k]);
  }
  return cm;
}

/// Rows of an SOC block given one generator per coordinate (head first).
inline ConeMap soc_rows(const std::vector<Mat>& generators, int side) {
  ConeMap cm;
  cm.cone.soc_dims = {static_cast<int>(generators.size())};
  cm.map.resize(static_cast<Eigen::Index>(generators.size()), svec_size(side));
  for (std::size_t k = 0; k < generators.size(); ++k) {
    cm.map.row(static_cast<Eigen::Index>(k)) = functional_row(generators[k]);
  }
  return cm;
}

}  // namespace detail

/// The four homogenized linear generators of the Shor relaxation, in the order
/// lower trace, upper trace, squared SOC, SOC sign.
inline std::vector<Mat> shor_generators(const EtrsInstance& inst) {
  const int n = inst.n;
  const Mat I = Mat::Identity(n, n);
  std::vector<Mat> gens;
  gens.push_back(detail::border_matrix(n, -inst.gamma * inst.gamma, Vec::Zero(n), I));
  gens.push_back(detail::border_matrix(n, inst.nu * inst.nu, Vec::Zero(n), -I));
  // (b'x - alpha)^2 - |x - c|^2 >= 0, linearized.
  gens.push_back(detail::border_matrix(n, inst.alpha * inst.alpha - inst.c.squaredNorm(),
                                       inst.c - inst.alpha * inst.b,
                                       inst.b * inst.b.transpose() - I));
  gens.push_back(detail::border_matrix(n, -inst.alpha, 0.5 * inst.b, Mat::Zero(n, n)));
  return gens;
}

/// Shor relaxation: the linear rows above plus Y PSD.
inline ConeMap build_shor(const EtrsInstance& inst) {
  const int side = inst.n + 1;
  ConeMap cm = detail::linear_rows(shor_generators(inst), side);
  ConeMap psd;
  psd.cone.psd_side_lengths = {side};
  psd.map = Mat::Identity(svec_size(side), svec_size(side));
  cm.append(psd);
  return cm;
}

/// Coefficient matrices of the two arrow matrices P(x) and Q(x), indexed by the entries of
/// u = (1, x): P(x) = sum_a P[a] u_a.
inline std::pair<std::vector<Mat>, std::vector<Mat>> ksoc_factors(const EtrsInstance& inst) {
  const int n = inst.n;
  const int side = n + 1;
  std::vector<Mat> p(side, Mat::Zero(side, side));
  std::vector<Mat> q(side, Mat::Zero(side, side));
  p[0] = inst.nu * Mat::Identity(side, side);
  q[0] = detail::border_matrix(n, -inst.alpha, -inst.c, -inst.alpha * Mat::Identity(n, n));
  for (int i = 0; i < n; ++i) {
    p[i + 1](0, i + 1) = p[i + 1](i + 1, 0) = 1.0;
    q[i + 1].diagonal().setConstant(inst.b(i));
    q[i + 1](0, i + 1) = q[i + 1](i + 1, 0) = 1.0;
  }
  return {p, q};
}

/// Linearized Kronecker product P(x) (x) Q(x) as the matrix-valued map K(Y), evaluated.
inline Mat ksoc_matrix(const EtrsInstance& inst, const Mat& y) {
  const auto [p, q] = ksoc_factors(inst);
  const int side = inst.n + 1;
  Mat k = Mat::Zero(side * side, side * side);
  for (int a = 0; a < side; ++a) {
    for (int b = 0; b < side; ++b) k += y(a, b) * Eigen::kroneckerProduct(p[a], q[b]).eval();
  }
  return symmetrize(k);
}

/// KSOC constraint: one PSD block of side (n+1)^2, linear in Y.
inline ConeMap build_ksoc(const EtrsInstance& inst) {
  const auto [p, q] = ksoc_factors(inst);
  const int side = inst.n + 1;
  const int big = side * side;
  ConeMap cm;
  cm.cone.psd_side_lengths = {big};
  cm.map = Mat::Zero(svec_size(big), svec_size(side));
  for (int b = 0; b < side; ++b) {
    for (int a = b; a < side; ++a) {
      // svec coordinate of Y(a, b); off-diagonal entries appear twice and carry sqrt(2).
      Mat term = Eigen::kroneckerProduct(p[a], q[b]);
      if (a != b) term = (term + Eigen::kroneckerProduct(p[b], q[a]).eval()) / kSqrt2;
      cm.map.col(svec_index(side, a, b)) = svec(term);
    }
  }
  return cm;
}

enum class SocrltKind { Ball, Soc };

struct SocrltDirection {
  Vec v;
  double u = 0.0;
  SocrltKind kind = SocrltKind::Ball;
};

/// Product of a valid v'x >= u with the ball (kind Ball) or with the SOC constraint.
inline ConeMap build_socrlt(const EtrsInstance& inst, const Vec& v, double u, SocrltKind kind) {
  const int n = inst.n;
  const int side = n + 1;
  require_size(v.size(), n, "SOCRLT direction");
  // Generator of the affine function v'x - u.
  const Mat lin = detail::border_matrix(n, -u, 0.5 * v, Mat::Zero(n, n));
  std::vector<Mat> gens;
  if (kind == SocrltKind::Ball) {
    gens.push_back(inst.nu * lin);
    for (int i = 0; i < n; ++i) {
      // (Xv - u x)_i
      Mat m = Mat::Zero(side, side);
      m.block(i + 1, 1, 1, n) = 0.5 * v.transpose();
      m.block(1, i + 1, n, 1) += 0.5 * v;
      m(0, i + 1) -= 0.5 * u;
      m(i + 1, 0) -= 0.5 * u;
      gens.push_back(m);
    }
  } else {
    // b'Xv - u b'x - alpha (v'x - u)
    Mat head = Mat::Zero(side, side);
    head.bottomRightCorner(n, n) = 0.5 * (inst.b * v.transpose() + v * inst.b.transpose());
    head.block(1, 0, n, 1) -= 0.5 * u * inst.b;
    head.block(0, 1, 1, n) -= 0.5 * u * inst.b.transpose();
    head -= inst.alpha * lin;
    gens.push_back(head);
    for (int i = 0; i < n; ++i) {
      // (Xv - u x - (v'x - u) c)_i
      Mat m = Mat::Zero(side, side);
      m.block(i + 1, 1, 1, n) = 0.5 * v.transpose();
      m.block(1, i + 1, n, 1) += 0.5 * v;
      m(0, i + 1) -= 0.5 * u;
      m(i + 1, 0) -= 0.5 * u;
      m -= inst.c(i) * lin;
      gens.push_back(m);
    }
  }
  return detail::soc_rows(gens, side);
}

/// Which constraints make up a relaxation. Shor rows are always present.
struct RelaxationSpec {
  bool use_shor = true;
  bool use_ksoc = false;
  std::vector<SocrltDirection> socrlt_directions;
  std::vector<Cut> cut_pool;
  /// Extra homogenized linear rows M . Y >= 0 that are not members of the cut family.
  std::vector<Mat> linear_rows;

  static RelaxationSpec shor() { return {}; }
  static RelaxationSpec shor_ksoc() {
    RelaxationSpec s;
    s.use_ksoc = true;
    return s;
  }

  /// Adds a cut unless an equivalent one is already present. Returns whether it was added.
  bool add_cut(const Cut& cut, const EtrsInstance& inst, double tol = 1e-9) {
    const Vec key = normalized_key(cut_generator(cut, inst));
    for (const Cut& c : cut_pool) {
      if ((normalized_key(cut_generator(c, inst)) - key).cwiseAbs().maxCoeff() <= tol) return false;
    }
    cut_pool.push_back(cut);
    return true;
  }

  bool add_linear_row(const Mat& generator, double tol = 1e-9) {
    const Vec key = normalized_key(generator);
    for (const Mat& m : linear_rows) {
      if ((normalized_key(m) - key).cwiseAbs().maxCoeff() <= tol) return false;
    }
    linear_rows.push_back(symmetrize(generator));
    return true;
  }

  static Vec normalized_key(const Mat& generator) {
    const Vec v = svec(generator);
    const double s = v.cwiseAbs().maxCoeff();
    return s > 0.0 ? Vec(v / s) : v;
  }
};

/// The homogenized cone R-hat of a relaxation spec.
inline ConeMap homogenize(const RelaxationSpec& spec, const EtrsInstance& inst) {
  const int side = inst.n + 1;
  if (!spec.use_shor) throw std::invalid_argument("relaxations always include the Shor rows");
  ConeMap cm = build_shor(inst);
  std::vector<Mat> extra;
  for (const Cut& c : spec.cut_pool) extra.push_back(cut_generator(c, inst));
  for (const Mat& m : spec.linear_rows) extra.push_back(m);
  if (!extra.empty()) cm.append(detail::linear_rows(extra, side));
  for (const auto& d : spec.socrlt_directions) cm.append(build_socrlt(inst, d.v, d.u, d.kind));
  if (spec.use_ksoc) cm.append(build_ksoc(inst));
  return cm;
}

/// Parameterization of the dual cone: J is in R-hat* iff svec(J) = generators * lambda
/// for some lambda in `cone` (self-dual, no free rows).
struct DualMembership {
  conic::ConeSpec cone;
  Mat generators;  // svec_size(n + 1) x cone.dim()

  int num_linear() const { return cone.nonneg_dim; }
};

inline DualMembership dual_membership_rows(const ConeMap& rhat) {
  if (rhat.cone.zero_dim != 0) {
    throw std::invalid_argument("dual parameterization needs a cone without free rows");
  }
  return {rhat.cone, rhat.map.transpose()};
}

/// Lifted linear objective C . Y, i.e. C00 + 2 C0x'x + C_XX . X.
inline Mat lifted_objective_matrix(const Mat& H, const Vec& g, double constant = 0.0) {
  return detail::border_matrix(static_cast<int>(g.size()), constant, g, H);
}

inline Mat lifted_objective_matrix(const EtrsInstance& inst) {
  return lifted_objective_matrix(inst.H, inst.g);
}

/// min C . Y  over  Y in R-hat, Y00 = 1.
inline conic::ConeProgram assemble(const ConeMap& rhat, const Mat& objective) {
  const int side = svec_side(static_cast<int>(rhat.map.cols()));
  require_size(objective.rows(), side, "objective");
  conic::ConeProgram p;
  const int d = svec_size(side);
  p.c = svec(symmetrize(objective));
  p.cones = rhat.cone;
  p.cones.zero_dim += 1;
  p.A = Mat::Zero(p.cones.dim(), d);
  p.b = Vec::Zero(p.cones.dim());
  p.A(0, svec_index(side, 0, 0)) = 1.0;
  p.b(0) = 1.0;
  p.A.bottomRows(rhat.rows()) = -rhat.map;
  return p;
}

inline conic::ConeProgram assemble(const EtrsInstance& inst, const RelaxationSpec& spec,
                                   const Mat& objective) {
  return assemble(homogenize(spec, inst), objective);
}

struct RelaxationResult {
  double value = 0.0;
  LiftedPoint point;
  Mat Y;
  conic::ConeSolution solution;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, conic::Status status)
      : std::runtime_error(what + " (" + conic::to_string(status) + ")"), status_(status) {}
  conic::Status status() const { return status_; }

 private:
  conic::Status status_;
};

inline RelaxationResult solve_relaxation(const ConeMap& rhat, const Mat& objective,
                                         const conic::SolverSettings& settings = {}) {
  const conic::ConeProgram prog = assemble(rhat, objective);
  RelaxationResult r;
  r.solution = conic::solve(prog, settings);
  if (!conic::is_solved(r.solution.status)) {
    throw SolverError("relaxation solve failed", r.solution.status);
  }
  r.Y = smat(r.solution.x);
  r.Y(0, 0) = 1.0;
  r.point = from_y_matrix(r.Y);
  r.value = r.solution.primal_objective;
  return r;
}

inline RelaxationResult solve_relaxation(const EtrsInstance& inst, const RelaxationSpec& spec,
                                         const Mat& objective,
                                         const conic::SolverSettings& settings = {}) {
  return solve_relaxation(homogenize(spec, inst), objective, settings);
}

inline RelaxationResult solve_relaxation(const EtrsInstance& inst, const RelaxationSpec& spec,
                                         const conic::SolverSettings& settings = {}) {
  return solve_relaxation(inst, spec, lifted_objective_matrix(inst), settings);
}

}  // namespace etrs
