#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "etrs/conic/solver.hpp"
#include "etrs/cut.hpp"
#include "etrs/relax.hpp"

namespace etrs {

/// The two-sided bound lambda <= s'x <= mu.
struct Slab {
  double lambda = 0.0;
  Vec s;
  double mu = 0.0;
};

/// Flips the slab to (-mu, -s, -lambda) when that gives lambda + mu >= 0 and lambda^2 <= mu^2.
inline Slab normalize_slab(const Slab& slab) {
  if (slab.lambda > slab.mu) throw std::invalid_argument("slab has lambda > mu");
  const bool both_nonneg = slab.lambda >= 0.0 && slab.mu >= 0.0;
  const bool both_nonpos = slab.lambda <= 0.0 && slab.mu <= 0.0;
  if (!both_nonneg && (both_nonpos || slab.lambda + slab.mu < 0.0)) {
    return {-slab.mu, -slab.s, -slab.lambda};
  }
  return slab;
}

/// Range of s'x over the convex part {|x| <= nu, |x - c| <= b'x - alpha} of the feasible set,
/// as certified lower and upper bounds.
inline std::pair<double, double> linear_range(const EtrsInstance& inst, const Vec& s,
                                              const conic::SolverSettings& settings = {}) {
  const int n = inst.n;
  require_size(s.size(), n, "slab direction");
  conic::ConeProgram prog;
  prog.cones.soc_dims = {n + 1, n + 1};
  Mat M = Mat::Zero(2 * n + 2, n);
  Vec m = Vec::Zero(2 * n + 2);
  m(0) = inst.nu;
  M.block(1, 0, n, n).setIdentity();
  M.block(n + 1, 0, 1, n) = inst.b.transpose();
  m(n + 1) = -inst.alpha;
  M.block(n + 2, 0, n, n).setIdentity();
  m.segment(n + 2, n) = -inst.c;
  prog.A = -M;
  prog.b = m;
  auto bound = [&](const Vec& obj) {
    prog.c = obj;
    const auto sol = conic::solve(prog, settings);
    if (sol.status == conic::Status::PrimalInfeasible) {
      throw std::invalid_argument("slab check: the convex part of the feasible set is empty");
    }
    if (!conic::is_solved(sol.status)) throw SolverError("slab check failed", sol.status);
    return sol.dual_objective;
  };
  return {bound(s), -bound(-s)};
}

/// Conservative check that the slab contains the feasible set (the lower radius is ignored).
inline bool slab_validity(const EtrsInstance& inst, const Slab& slab, double tol = 1e-7) {
  const auto [lo, hi] = linear_range(inst, slab.s);
  return lo >= slab.lambda - tol && hi <= slab.mu + tol;
}

/// q = mu - s'x, l = s'x - lambda, qlow = mu - lambda; `swap` exchanges q and l.
inline Cut slab_cut_linear(const Slab& slab, const EtrsInstance& inst, double rho,
                           bool swap = false) {
  require_size(slab.s.size(), inst.n, "slab direction");
  Cut cut = Cut::zero(inst.n);
  const Vec half = 0.5 * slab.s;
  if (!swap) {
    cut.gq = -half;
    cut.fq = slab.mu;
    cut.gl = half;
    cut.fl = -slab.lambda;
  } else {
    cut.gq = half;
    cut.fq = -slab.lambda;
    cut.gl = -half;
    cut.fl = slab.mu;
  }
  cut.qlow = slab.mu - slab.lambda;
  cut.variant = CutVariant::UseGamma;
  cut.rho = rho;
  return cut;
}

/// q = mu^2 - (s'x)^2, l = (lambda + mu)(s'x - lambda), qlow = mu^2 - lambda^2 for a
/// normalized slab.
inline Cut slab_cut_quadratic(const Slab& slab, double rho = 0.0) {
  const auto n = static_cast<int>(slab.s.size());
  Cut cut = Cut::zero(n);
  cut.Hq = -slab.s * slab.s.transpose();
  cut.fq = slab.mu * slab.mu;
  cut.gl = 0.5 * (slab.lambda + slab.mu) * slab.s;
  cut.fl = -slab.lambda * (slab.lambda + slab.mu);
  cut.qlow = slab.mu * slab.mu - slab.lambda * slab.lambda;
  cut.rho = rho;
  return cut;
}

/// The pair of cuts for c = 0, alpha = 0 and a slab with lambda >= 0, stated for a general
/// quadratic "trace" P . X so the same algebra serves sub-blocks:
///
///   (g+nu) nu (mu^2 - ss'.X) + (g+nu)(lambda+mu) sb'.X >= (mu^2 + lambda mu)(P.X + g nu)
///   (g+nu)(lambda+mu) sb'.X - (g+nu) g (ss'.X - lambda^2) >= (lambda^2 + lambda mu)(P.X + g nu)
inline std::pair<LinearRow, LinearRow> special_case_rows(double gamma, double nu, double lambda,
                                                         double mu, const Vec& s, const Vec& b,
                                                         const Mat& trace_projector) {
  const auto n = s.size();
  require_size(b.size(), n, "b");
  const Mat ss = s * s.transpose();
  const Mat sb = symmetrize(s * b.transpose());
  const double gn = gamma + nu;
  LinearRow a;
  a.a = Vec::Zero(n);
  a.A = -gn * nu * ss + gn * (lambda + mu) * sb - (mu * mu + lambda * mu) * trace_projector;
  a.a0 = gn * nu * mu * mu - (mu * mu + lambda * mu) * gamma * nu;
  LinearRow c;
  c.a = Vec::Zero(n);
  c.A = gn * (lambda + mu) * sb - gn * gamma * ss - (lambda * lambda + lambda * mu) * trace_projector;
  c.a0 = gn * gamma * lambda * lambda - (lambda * lambda + lambda * mu) * gamma * nu;
  return {a, c};
}

inline std::pair<LinearRow, LinearRow> special_case_cuts(const Slab& slab,
                                                         const EtrsInstance& inst) {
  if (inst.c.norm() != 0.0 || inst.alpha != 0.0) {
    throw std::invalid_argument("special_case_cuts needs c = 0 and alpha = 0");
  }
  if (slab.lambda < 0.0 || slab.lambda > slab.mu) {
    throw std::invalid_argument("special_case_cuts needs 0 <= lambda <= mu");
  }
  require_size(slab.s.size(), inst.n, "slab direction");
  return special_case_rows(inst.gamma, inst.nu, slab.lambda, slab.mu, slab.s, inst.b,
                           Mat::Identity(inst.n, inst.n));
}

/// The embedding of {x >= 0 : |x| <= 1} used by the orthant cuts.
inline EtrsInstance orthant_instance(int n) {
  EtrsInstance inst;
  inst.n = n;
  inst.H = Mat::Zero(n, n);
  inst.g = Vec::Zero(n);
  inst.gamma = 0.0;
  inst.nu = 1.0;
  inst.c = Vec::Zero(n);
  inst.b = Vec::Ones(n);
  inst.alpha = 0.0;
  inst.interior_point = Vec::Constant(n, 0.5 / std::sqrt(static_cast<double>(n)));
  return inst;
}

struct OrthantCut {
  LinearRow row;
  double violation = 0.0;  // row value at the separated point (negative when violated)
  bool first = true;       // trace bound against 1 (true) or against e'x (false)
  Vec s;
};

/// Separates the two locally valid SOC bounds on tr(X) for F = {x >= 0 : |x| <= 1} at
/// (xbar, Xbar) and returns the globally valid supporting row of the more violated one.
inline std::optional<OrthantCut> separate_orthant_cut(const LiftedPoint& pt, double tol = 1e-9) {
  const auto n = pt.x.size();
  const Vec e = Vec::Ones(n);
  const Vec y = pt.X * e - pt.x;
  Vec yi = Vec::Zero(n);
  Vec yj = Vec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) (y(i) >= 0.0 ? yi : yj)(i) = y(i);

  auto make = [&](bool first) {
    OrthantCut oc;
    oc.first = first;
    const Vec& part = first ? yj : yi;
    const double nrm = part.norm();
    oc.s = nrm > 0.0 ? Vec((first ? -1.0 : 1.0) * part / nrm) : Vec::Zero(n);
    // first:  1 + s'(Xe - x) - tr(X) >= 0;  second:  e'x - s'(Xe - x) - tr(X) >= 0
    const double sign = first ? 1.0 : -1.0;
    oc.row.A = sign * symmetrize(oc.s * e.transpose()) - Mat::Identity(n, n);
    oc.row.a = -sign * oc.s + (first ? Vec::Zero(n) : e);
    oc.row.a0 = first ? 1.0 : 0.0;
    oc.violation = oc.row.evaluate(pt);
    return oc;
  };
  const OrthantCut a = make(true);
  const OrthantCut b = make(false);
  const OrthantCut& best = a.violation <= b.violation ? a : b;
  if (best.violation >= -tol) return std::nullopt;
  return best;
}

/// Lifted matrix of e'x - [Xe - x]_1 - tr(X).
inline Mat orthant_objective(int n) {
  if (n < 1) throw std::invalid_argument("orthant_objective: n must be positive");
  Vec w = Vec::Constant(n, 0.5);
  w(0) += 0.5;
  Mat xx = -Mat::Identity(n, n);
  xx.row(0).array() -= 0.5;
  xx.col(0).array() -= 0.5;
  Mat c(n + 1, n + 1);
  c(0, 0) = 0.0;
  c.block(1, 0, n, 1) = w;
  c.block(0, 1, 1, n) = w.transpose();
  c.bottomRightCorner(n, n) = xx;
  return c;
}

struct OrthantLoopResult {
  std::vector<double> bounds;  // value before any cut, then after each cut
  std::vector<OrthantCut> cuts;
  LiftedPoint final_point;
  bool separated_out = false;  // stopped because no row was violated
};

/// Minimizes `objective` over Shor and KSOC for the orthant set, adding the separated row and
/// re-solving until nothing is violated or `max_rounds` rows were added.
inline OrthantLoopResult orthant_loop(int n, const Mat& objective, int max_rounds = 50,
                                      double tol = 1e-9,
                                      const conic::SolverSettings& settings = {}) {
  const EtrsInstance inst = orthant_instance(n);
  RelaxationSpec spec = RelaxationSpec::shor_ksoc();
  OrthantLoopResult out;
  RelaxationResult cur = solve_relaxation(inst, spec, objective, settings);
  out.bounds.push_back(cur.value);
  while (static_cast<int>(out.cuts.size()) < max_rounds) {
    auto cut = separate_orthant_cut(cur.point, tol);
    if (!cut) {
      out.separated_out = true;
      break;
    }
    if (!spec.add_linear_row(cut->row.generator())) break;
    out.cuts.push_back(*cut);
    cur = solve_relaxation(inst, spec, objective, settings);
    out.bounds.push_back(cur.value);
  }
  out.final_point = cur.point;
  return out;
}

}  // namespace etrs
