#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "etrs/conic/builder.hpp"
#include "etrs/cut.hpp"
#include "etrs/relax.hpp"

namespace etrs {

/// Smallest rho (up to tol) on [0, |c|] with gamma c'x <= rho x'x on the convex part of the
/// feasible set. Each bisection step solves
///   min rho t - gamma c'x  s.t.  x'x <= t,  |x| <= nu,  |x - c| <= b'x - alpha
/// and accepts rho when the dual bound is at least -tol.
inline double compute_rho(const EtrsInstance& inst, double tol = 1e-8,
                          const conic::SolverSettings& settings = {}) {
  const double cn = inst.c.norm();
  if (inst.gamma == 0.0 || cn == 0.0) return 0.0;
  const int n = inst.n;
  const int p = n + 1;  // (x, t)

  conic::ConeSpec k;
  k.soc_dims = {n + 2, n + 1, n + 1};
  Mat M = Mat::Zero(k.dim(), p);
  Vec m = Vec::Zero(k.dim());
  // (t + 1, 2x, t - 1)
  M(0, n) = 1.0;
  m(0) = 1.0;
  M.block(1, 0, n, n) = 2.0 * Mat::Identity(n, n);
  M(n + 1, n) = 1.0;
  m(n + 1) = -1.0;
  // (nu, x)
  int r = n + 2;
  m(r) = inst.nu;
  M.block(r + 1, 0, n, n) = Mat::Identity(n, n);
  // (b'x - alpha, x - c)
  r += n + 1;
  M.block(r, 0, 1, n) = inst.b.transpose();
  m(r) = -inst.alpha;
  M.block(r + 1, 0, n, n) = Mat::Identity(n, n);
  m.segment(r + 1, n) = -inst.c;

  conic::ConeProgram prog;
  prog.cones = k;
  prog.A = -M;
  prog.b = m;

  auto nonnegative_at = [&](double rho) {
    prog.c = Vec::Zero(p);
    prog.c.head(n) = -inst.gamma * inst.c;
    prog.c(n) = rho;
    const auto sol = conic::solve(prog, settings);
    if (sol.status == conic::Status::PrimalInfeasible) {
      throw std::invalid_argument("compute_rho: the convex part of the feasible set is empty");
    }
    if (!conic::is_solved(sol.status)) {
      throw SolverError("compute_rho: subproblem failed", sol.status);
    }
    return sol.dual_objective >= -tol;
  };

  double lo = 0.0;
  double hi = cn;
  if (nonnegative_at(0.0)) return 0.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (nonnegative_at(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// True when lambda_1(Y) / lambda_2(Y) exceeds tau_rank.
inline bool rank1_check(const Mat& y, double tau_rank = 1e4) {
  const Vec ev = eigenvalues_desc(y);
  if (ev.size() < 2) return true;
  return ev(0) / std::max(ev(1), 1e-300) > tau_rank;
}

/// Shift of the SOC offset that makes |x - c| <= b'x - alpha' a consequence of
/// |Jx - c| <= b'x - alpha on the ball |x| <= R.
inline double relax_general_hessian(const Mat& J, const Vec& /*c*/, const Vec& /*b*/,
                                    double alpha, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("relax_general_hessian: R must be positive");
  const auto n = J.rows();
  const Mat d = Mat::Identity(n, n) - J;
  const double lmax = std::max(0.0, eigenvalues_desc(d.transpose() * d)(0));
  return alpha - std::sqrt(lmax) * R;
}

struct SeparationOutcome {
  bool violated = false;
  std::optional<Cut> cut;
  /// Cut slack at the separated point; negative means the point is cut off.
  double violation = 0.0;
  /// Optimal value reported by the separation program before coefficient rounding.
  double solver_value = 0.0;
  CutVariant variant_tried = CutVariant::UseGamma;
  conic::Status status = conic::Status::Optimal;
};

struct SeparationSettings {
  double tau_sep = -1e-5;
  conic::SolverSettings solver;
};

/// Border matrix C_L(Y) with L . C_L(Y) equal to the linearization of l(x) * phi(x).
inline Mat l_coefficient_matrix(const EtrsInstance& inst, const LiftedPoint& pt,
                                CutVariant variant, double rho) {
  const CutMultiplier phi = cut_multiplier(inst, variant, rho);
  const int n = inst.n;
  Mat cl = Mat::Zero(n + 1, n + 1);
  cl(0, 0) = phi.phi0 + phi.phi1.dot(pt.x);
  const Vec border = phi.phi0 * pt.x + pt.X * phi.phi1;
  cl.block(1, 0, n, 1) = border;
  cl.block(0, 1, 1, n) = border.transpose();
  return cl;
}

/// Finds the most violated cut at (xbar, Xbar) by solving the separation program through
/// its conic dual:
///
///   min  pi1 + pi2
///   s.t. Y1 + Y3 - pi1 Yhat = nu^2 Ybar
///        border(Y2 + Y3 - pi2 Yhat) = border(C_L(Ybar))
///        Y3_00 >= tr(Xbar),  pi >= 0,  Y1, Y2, Y3 in R-hat.
///
/// The multipliers of the three memberships give q, l and q + l - qlow as elements of the
/// dual cone, so the returned coefficients certify themselves.
inline SeparationOutcome separate(const EtrsInstance& inst, const LiftedPoint& pt,
                                  const RelaxationSpec& spec, double rho, CutVariant variant,
                                  const SeparationSettings& settings = {}) {
  if (!inst.interior_point) throw std::invalid_argument("separate: instance has no interior point");
  const int n = inst.n;
  const int side = n + 1;
  const int d = svec_size(side);
  const ConeMap rhat = homogenize(spec, inst);
  const DualMembership dual = dual_membership_rows(rhat);
  const Mat& map = rhat.map;

  const Mat ybar = y_matrix(pt);
  const Vec yhat = svec(y_matrix(lift(*inst.interior_point)));
  const Vec cq = svec(inst.nu * inst.nu * ybar);
  const Vec cl = svec(l_coefficient_matrix(inst, pt, variant, rho));

  const int p = 3 * d + 2;
  const int i_pi1 = 3 * d;
  const int i_pi2 = 3 * d + 1;
  conic::ProgramBuilder pb(p);

  {
    Mat a = Mat::Zero(d, p);
    a.block(0, 0, d, d).setIdentity();
    a.block(0, 2 * d, d, d).setIdentity();
    a.col(i_pi1) = -yhat;
    pb.add_zero(a, cq);
  }
  {
    Mat a = Mat::Zero(side, p);
    Vec b(side);
    for (int i = 0; i < side; ++i) {
      const int idx = svec_index(side, i, 0);
      a(i, d + idx) = 1.0;
      a(i, 2 * d + idx) = 1.0;
      a(i, i_pi2) = -yhat(idx);
      b(i) = cl(idx);
    }
    pb.add_zero(a, b);
  }
  conic::ProgramBuilder::Handle qlow_row;
  {
    Mat a = Mat::Zero(3, p);
    Vec b = Vec::Zero(3);
    a(0, i_pi1) = -1.0;
    a(1, i_pi2) = -1.0;
    a(2, 2 * d + svec_index(side, 0, 0)) = -1.0;
    b(2) = -pt.X.trace();
    const auto h = pb.add_nonneg(a, b);
    qlow_row = h;
  }
  std::vector<conic::ProgramBuilder::Handle> member;
  for (int copy = 0; copy < 3; ++copy) {
    Mat a = Mat::Zero(map.rows(), p);
    a.block(0, copy * d, map.rows(), d) = -map;
    member.push_back(pb.add(dual.cone, a, Vec::Zero(map.rows())));
  }
  Vec c = Vec::Zero(p);
  c(i_pi1) = 1.0;
  c(i_pi2) = 1.0;
  const conic::ConeProgram prog = pb.build(c);
  const conic::ConeSolution sol = conic::solve(prog, settings.solver);

  SeparationOutcome out;
  out.variant_tried = variant;
  out.status = sol.status;
  if (!conic::is_solved(sol.status)) {
    throw SolverError("separation program failed", sol.status);
  }
  out.solver_value = -sol.primal_objective;

  auto dual_element = [&](const conic::ProgramBuilder::Handle& h) {
    const Vec lam = conic::project(dual.cone, pb.extract(h, sol.y));
    return Mat(smat(dual.generators * lam));
  };
  const Mat q = dual_element(member[0]);
  Mat l = dual_element(member[1]);
  const Mat sum = dual_element(member[2]);
  const double t = std::max(0.0, pb.extract(qlow_row, sol.y)(2));

  // l must be affine: drop the quadratic residue and compensate on the constant, which is
  // enough because |x| <= nu on the feasible set.
  const Mat e2 = l.bottomRightCorner(n, n);
  l.bottomRightCorner(n, n).setZero();
  l(0, 0) += std::max(0.0, eigenvalues_desc(e2)(0)) * inst.nu * inst.nu;
  // q + l - t E00 equals `sum` up to Delta; |Delta . Y(x)| <= |Delta|_F (1 + nu^2).
  Mat corner = Mat::Zero(side, side);
  corner(0, 0) = t;
  const double delta = (q + l - corner - sum).norm();
  const double qlow = std::max(0.0, t - delta * (1.0 + inst.nu * inst.nu));

  Cut cut = Cut::zero(n);
  cut.fq = q(0, 0);
  cut.gq = 0.5 * (q.block(1, 0, n, 1) + q.block(0, 1, 1, n).transpose());
  cut.Hq = symmetrize(q.bottomRightCorner(n, n));
  cut.fl = l(0, 0);
  cut.gl = 0.5 * (l.block(1, 0, n, 1) + l.block(0, 1, 1, n).transpose());
  cut.qlow = qlow;
  cut.variant = variant;
  cut.rho = rho;

  out.violation = inner(cut_generator(cut, inst), ybar);
  out.violated = out.violation < settings.tau_sep;
  out.cut = cut;
  return out;
}

struct LoopSettings {
  double tau_sep = -1e-5;
  double tau_rank = 1e4;
  int max_cuts = 100;
  conic::SolverSettings solver;
};

enum class LoopStop { RankOne, NotSeparated, MaxCuts, DuplicateCut, SolverFailure };

inline const char* to_string(LoopStop s) {
  switch (s) {
    case LoopStop::RankOne: return "rank_one";
    case LoopStop::NotSeparated: return "not_separated";
    case LoopStop::MaxCuts: return "max_cuts";
    case LoopStop::DuplicateCut: return "duplicate_cut";
    case LoopStop::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

struct LoopResult {
  double rho = 0.0;
  double v_initial = 0.0;
  double v_final = 0.0;
  std::vector<double> bounds;  // relaxation value after 0, 1, 2, ... cuts
  std::vector<Cut> cuts;
  std::vector<double> violations;
  bool initial_rank1 = false;
  bool final_rank1 = false;
  LiftedPoint initial_point;
  LiftedPoint final_point;
  Mat final_Y;
  LoopStop stop = LoopStop::NotSeparated;
  std::string diagnostic;

  int cuts_added() const { return static_cast<int>(cuts.size()); }
};

/// Solve, separate, add one cut, repeat. With gamma > 0 both cut variants are separated
/// each round and the deeper one is kept.
inline LoopResult cutting_loop(const EtrsInstance& inst, const RelaxationSpec& bootstrap,
                               const LoopSettings& settings = {},
                               std::optional<double> rho_in = std::nullopt) {
  LoopResult res;
  res.rho = rho_in ? *rho_in : compute_rho(inst);
  RelaxationSpec spec = bootstrap;
  const Mat objective = lifted_objective_matrix(inst);
  SeparationSettings sep;
  sep.tau_sep = settings.tau_sep;
  sep.solver = settings.solver;

  RelaxationResult cur = solve_relaxation(inst, spec, objective, settings.solver);
  res.v_initial = cur.value;
  res.bounds.push_back(cur.value);
  res.initial_point = cur.point;
  res.initial_rank1 = rank1_check(cur.Y, settings.tau_rank);

  auto finish = [&](LoopStop why) {
    res.stop = why;
    res.v_final = cur.value;
    res.final_point = cur.point;
    res.final_Y = cur.Y;
    res.final_rank1 = rank1_check(cur.Y, settings.tau_rank);
    return res;
  };

  if (res.initial_rank1) return finish(LoopStop::RankOne);
  while (res.cuts_added() < settings.max_cuts) {
    std::optional<SeparationOutcome> chosen;
    try {
      std::vector<CutVariant> variants{CutVariant::UseGamma};
      if (inst.gamma > 0.0) variants.push_back(CutVariant::UseZero);
      for (CutVariant v : variants) {
        SeparationOutcome o = separate(inst, cur.point, spec, res.rho, v, sep);
        if (o.violated && (!chosen || o.violation < chosen->violation)) chosen = std::move(o);
      }
    } catch (const SolverError& e) {
      res.diagnostic = e.what();
      return finish(LoopStop::SolverFailure);
    }
    if (!chosen) return finish(LoopStop::NotSeparated);
    if (!spec.add_cut(*chosen->cut, inst)) return finish(LoopStop::DuplicateCut);
    res.cuts.push_back(*chosen->cut);
    res.violations.push_back(chosen->violation);
    try {
      cur = solve_relaxation(inst, spec, objective, settings.solver);
    } catch (const SolverError& e) {
      res.diagnostic = e.what();
      return finish(LoopStop::SolverFailure);
    }
    res.bounds.push_back(cur.value);
  }
  return finish(LoopStop::MaxCuts);
}

}  // namespace etrs
