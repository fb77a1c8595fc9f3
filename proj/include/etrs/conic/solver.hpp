#pragma once

// Dense primal-dual interior-point method for
//
//   minimize    c'x
//   subject to  b - A x in K,   K = {0}^z x R+^l x SOC x ... x PSD x ...
//
// with dual  maximize -b'y  subject to  A'y + c = 0,  y in K*.
// Iterates follow the homogeneous self-dual embedding with Nesterov-Todd scaling
// and a Mehrotra predictor-corrector step.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "etrs/conic/cones.hpp"

namespace etrs::conic {

struct ConeProgram {
  Vec c;
  Mat A;
  Vec b;
  ConeSpec cones;

  int num_vars() const { return static_cast<int>(c.size()); }

  void validate() const {
    cones.validate();
    if (A.rows() != cones.dim()) {
      throw std::invalid_argument("constraint map has " + std::to_string(A.rows()) +
                                  " rows but the cone product has dimension " +
                                  std::to_string(cones.dim()));
    }
    if (A.cols() != c.size()) throw std::invalid_argument("constraint map / objective mismatch");
    if (b.size() != A.rows()) throw std::invalid_argument("offset / constraint map mismatch");
    if (!c.allFinite() || !A.allFinite() || !b.allFinite()) {
      throw std::invalid_argument("program data contains non-finite values");
    }
  }
};

enum class Status { Optimal, OptimalInaccurate, PrimalInfeasible, DualInfeasible, IterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::OptimalInaccurate: return "optimal_inaccurate";
    case Status::PrimalInfeasible: return "primal_infeasible";
    case Status::DualInfeasible: return "dual_infeasible";
    case Status::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

inline bool is_solved(Status s) { return s == Status::Optimal || s == Status::OptimalInaccurate; }

struct Residuals {
  double primal = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
};

struct ConeSolution {
  Status status = Status::IterationLimit;
  Vec x;  // primal variables
  Vec y;  // one multiplier per cone row
  Vec s;  // slack b - A x
  double primal_objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  Residuals residuals;
  int iterations = 0;
};

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 500;
  // Stalled runs within this multiple of tol are reported as OptimalInaccurate.
  double inaccurate_factor = 1e3;
  bool verbose = false;
};

namespace detail {

class KktSystem {
 public:
  KktSystem(const Mat& aeq, const Mat& g) : aeq_(aeq), g_(g) {}

  /// Factors for the block [0 A' G'; A 0 0; G 0 -W'W].
  void factor(const ConeSpec& k, const NtScaling* w) {
    k_ = &k;
    w_ = w;
    gs_ = w ? apply_scaling_columns(k, *w, ScaleOp::WInvT, g_) : g_;
    const auto p = g_.cols();
    const auto me = aeq_.rows();
    kkt_ = Mat::Zero(p + me, p + me);
    kkt_.topLeftCorner(p, p) = gs_.transpose() * gs_;
    kkt_.topRightCorner(p, me) = aeq_.transpose();
    kkt_.bottomLeftCorner(me, p) = aeq_;
    // A tiny regularization keeps rank-deficient rows from producing NaNs; refinement below
    // removes its effect on the solution.
    const double reg = 1e-14 * std::max(1.0, kkt_.diagonal().cwiseAbs().maxCoeff());
    kkt_.topLeftCorner(p, p).diagonal().array() += reg;
    kkt_.bottomRightCorner(me, me).diagonal().array() -= reg;
    lu_.compute(kkt_);
    kkt_.topLeftCorner(p, p).diagonal().array() -= reg;
    kkt_.bottomRightCorner(me, me).diagonal().array() += reg;
  }

  /// Returns (dx, dy, dz), refined against the unreduced block system.
  void solve(const Vec& r1, const Vec& r2, const Vec& r3, Vec& dx, Vec& dy, Vec& dz) const {
    solve_reduced(r1, r2, r3, dx, dy, dz);
    for (int it = 0; it < 3; ++it) {
      const Vec e1 = r1 - aeq_.transpose() * dy - g_.transpose() * dz;
      const Vec e2 = r2 - aeq_ * dx;
      const Vec e3 = r3 - g_ * dx + scaled_square(dz);
      Vec cx, cy, cz;
      solve_reduced(e1, e2, e3, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  Vec scaled_square(const Vec& u) const {
    return w_ ? apply_scaling(*k_, *w_, ScaleOp::WT, apply_scaling(*k_, *w_, ScaleOp::W, u)) : u;
  }

  void solve_reduced(const Vec& r1, const Vec& r2, const Vec& r3, Vec& dx, Vec& dy,
                     Vec& dz) const {
    const auto p = g_.cols();
    const auto me = aeq_.rows();
    const Vec r3s = w_ ? apply_scaling(*k_, *w_, ScaleOp::WInvT, r3) : r3;
    Vec rhs(p + me);
    rhs.head(p) = r1 + gs_.transpose() * r3s;
    rhs.tail(me) = r2;
    Vec sol = lu_.solve(rhs);
    const Vec res = rhs - kkt_ * sol;
    sol += lu_.solve(res);
    dx = sol.head(p);
    dy = sol.tail(me);
    const Vec wdz = gs_ * dx - r3s;
    dz = w_ ? apply_scaling(*k_, *w_, ScaleOp::WInv, wdz) : wdz;
  }

  const Mat& aeq_;
  const Mat& g_;
  const ConeSpec* k_ = nullptr;
  const NtScaling* w_ = nullptr;
  Mat gs_;
  Mat kkt_;
  Eigen::PartialPivLU<Mat> lu_;
};

}  // namespace detail

inline ConeSolution solve(const ConeProgram& prog, const SolverSettings& settings = {}) {
  prog.validate();
  if (!(settings.tol > 0)) throw std::invalid_argument("solver tolerance must be positive");

  const int nz = prog.cones.zero_dim;
  const int p = prog.num_vars();
  const ConeSpec k = prog.cones.without_zero();
  const int mc = k.dim();
  const Mat aeq = prog.A.topRows(nz);
  const Vec beq = prog.b.head(nz);
  const Mat& gfull = prog.A;
  const Mat g = gfull.bottomRows(mc);
  const Vec h = prog.b.tail(mc);
  const Vec& c = prog.c;
  const double theta = k.degree();
  const Vec e = identity_element(k);

  const double resx0 = std::max(1.0, c.norm());
  const double resy0 = std::max(1.0, beq.norm());
  const double resz0 = std::max(1.0, h.norm());

  ConeSolution out;
  detail::KktSystem kkt(aeq, g);

  // Starting point from two least-squares problems.
  Vec x, y, z, s;
  kkt.factor(k, nullptr);
  {
    Vec zt;
    kkt.solve(Vec::Zero(p), beq, h, x, y, zt);
    s = -zt;
    Vec xd;
    kkt.solve(-c, Vec::Zero(nz), Vec::Zero(mc), xd, y, z);
  }
  auto shift = [&](Vec& u) {
    if (mc == 0) return;
    const double t = -min_eigenvalue(k, u);
    if (t >= -1e-8 * std::max(u.norm(), 1.0)) u += (1.0 + t) * e;
  };
  shift(s);
  shift(z);
  double tau = 1.0;
  double kappa = 1.0;

  double pres = std::numeric_limits<double>::infinity();
  double dres = pres;
  double gap = pres;
  int iter = 0;

  struct Snapshot {
    Vec x, y, z, s;
    double tau, kappa, pres, dres, gap, merit;
    int iter;
  };
  std::optional<Snapshot> best;

  auto finish = [&](Status st) {
    out.status = st;
    out.iterations = iter;
    out.residuals = {pres, dres, gap};
    const double scale = (st == Status::PrimalInfeasible || st == Status::DualInfeasible) ? 1.0 : tau;
    out.x = x / scale;
    out.y.resize(nz + mc);
    out.y << y / scale, z / scale;
    out.s.resize(nz + mc);
    out.s << Vec::Zero(nz), s / scale;
    out.primal_objective = c.dot(out.x);
    out.dual_objective = -prog.b.dot(out.y);
    if (st == Status::PrimalInfeasible) {
      const double nrm = -(beq.dot(y) + h.dot(z));
      out.y /= nrm;
      out.primal_objective = std::numeric_limits<double>::infinity();
      out.dual_objective = std::numeric_limits<double>::infinity();
    } else if (st == Status::DualInfeasible) {
      const double nrm = -c.dot(x);
      out.x /= nrm;
      out.s /= nrm;
      out.primal_objective = -std::numeric_limits<double>::infinity();
      out.dual_objective = -std::numeric_limits<double>::infinity();
    }
    return out;
  };

  for (iter = 0; iter <= settings.max_iter; ++iter) {
    const Vec rx = aeq.transpose() * y + g.transpose() * z + c * tau;
    const Vec ry = aeq * x - beq * tau;
    const Vec rz = s + g * x - h * tau;
    const double rt = kappa + c.dot(x) + beq.dot(y) + h.dot(z);
    const double sz = s.dot(z);
    const double mu = (sz + tau * kappa) / (theta + 1.0);

    const double pcost = c.dot(x) / tau;
    const double dcost = -(beq.dot(y) + h.dot(z)) / tau;
    pres = std::max(ry.norm() / resy0, rz.norm() / resz0) / tau;
    dres = rx.norm() / resx0 / tau;
    gap = std::max(std::abs(pcost - dcost), sz / (tau * tau)) /
          (1.0 + std::abs(pcost) + std::abs(dcost));

    if (settings.verbose) {
      std::cerr << std::setw(4) << iter << std::scientific << std::setprecision(3) << "  pcost "
                << pcost << "  dcost " << dcost << "  pres " << pres << "  dres " << dres
                << "  gap " << gap << "  tau " << tau << "  kappa " << kappa << "\n";
    }

    if (pres <= settings.tol && dres <= settings.tol && gap <= settings.tol) {
      return finish(Status::Optimal);
    }
    const double merit = std::max({pres, dres, gap});
    if (std::isfinite(merit) && (!best || merit < best->merit)) {
      best = Snapshot{x, y, z, s, tau, kappa, pres, dres, gap, merit, iter};
    } else if (best && merit > 1e3 * best->merit) {
      // Rounding has taken over; further steps only degrade the iterate.
      break;
    }
    const double hz = beq.dot(y) + h.dot(z);
    if (hz < 0) {
      const double pinf = (aeq.transpose() * y + g.transpose() * z).norm() / resx0 / (-hz);
      if (pinf <= settings.tol) return finish(Status::PrimalInfeasible);
    }
    const double cx = c.dot(x);
    if (cx < 0) {
      const double dinf = std::max((aeq * x).norm() / resy0, (g * x + s).norm() / resz0) / (-cx);
      if (dinf <= settings.tol) return finish(Status::DualInfeasible);
    }
    if (iter == settings.max_iter) break;

    try {
      const NtScaling w = compute_scaling(k, s, z);
      const Vec& lam = w.lambda;
      kkt.factor(k, &w);

      Vec x1, y1, z1;
      kkt.solve(-c, beq, h, x1, y1, z1);
      const double denom1 = c.dot(x1) + beq.dot(y1) + h.dot(z1) - kappa / tau;

      const Vec lamsq = jordan_product(k, lam, lam);
      Vec dx, dy, dz, ds_scaled;
      double dtau = 0.0;
      double dkappa = 0.0;
      double sigma = 0.0;
      Vec corr = Vec::Zero(mc);
      double corr_kappa = 0.0;
      double step = 0.0;

      for (int pass = 0; pass < 2; ++pass) {
        const double eta = 1.0 - sigma;
        const Vec dsv = sigma * mu * e - lamsq - corr;
        const double dk = sigma * mu - tau * kappa - corr_kappa;
        const Vec lam_div = jordan_divide(k, lam, dsv);
        Vec x0, y0, z0;
        kkt.solve(-eta * rx, -eta * ry,
                  -eta * rz - apply_scaling(k, w, ScaleOp::WT, lam_div), x0, y0, z0);
        dtau = (-eta * rt - dk / tau - (c.dot(x0) + beq.dot(y0) + h.dot(z0))) / denom1;
        dx = x0 + dtau * x1;
        dy = y0 + dtau * y1;
        dz = z0 + dtau * z1;
        dkappa = (dk - kappa * dtau) / tau;
        const Vec dz_scaled = apply_scaling(k, w, ScaleOp::W, dz);
        ds_scaled = lam_div - dz_scaled;

        double amax = std::min(max_step(k, lam, ds_scaled), max_step(k, lam, dz_scaled));
        if (dtau < 0) amax = std::min(amax, -tau / dtau);
        if (dkappa < 0) amax = std::min(amax, -kappa / dkappa);
        if (pass == 0) {
          const double aff = std::min(1.0, amax);
          sigma = std::pow(1.0 - aff, 3);
          corr = jordan_product(k, ds_scaled, dz_scaled);
          corr_kappa = dtau * dkappa;
        } else {
          step = std::min(1.0, 0.99 * amax);
        }
      }

      if (!(step > 1e-12) || !dx.allFinite() || !dz.allFinite()) break;
      const Vec ds = apply_scaling(k, w, ScaleOp::WT, ds_scaled);
      x += step * dx;
      y += step * dy;
      z += step * dz;
      s += step * ds;
      tau += step * dtau;
      kappa += step * dkappa;
    } catch (const std::runtime_error&) {
      break;
    }
  }

  if (best && best->merit < std::max({pres, dres, gap})) {
    x = best->x;
    y = best->y;
    z = best->z;
    s = best->s;
    tau = best->tau;
    kappa = best->kappa;
    pres = best->pres;
    dres = best->dres;
    gap = best->gap;
  }
  const double loose = settings.tol * settings.inaccurate_factor;
  if (pres <= loose && dres <= loose && gap <= loose) return finish(Status::OptimalInaccurate);
  return finish(Status::IterationLimit);
}

inline ConeSolution solve(const ConeProgram& prog, double tol, int max_iter) {
  SolverSettings st;
  st.tol = tol;
  st.max_iter = max_iter;
  return solve(prog, st);
}

}  // namespace etrs::conic
