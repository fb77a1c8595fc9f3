#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "etrs/linalg.hpp"

namespace etrs {

enum class VariantKind { General, Wedge, Ttrs };

inline const char* to_string(VariantKind k) {
  switch (k) {
    case VariantKind::General: return "general";
    case VariantKind::Wedge: return "wedge";
    case VariantKind::Ttrs: return "ttrs";
  }
  return "unknown";
}

inline VariantKind parse_variant(const std::string& s) {
  if (s == "general") return VariantKind::General;
  if (s == "wedge") return VariantKind::Wedge;
  if (s == "ttrs") return VariantKind::Ttrs;
  throw std::invalid_argument("unknown instance variant '" + s + "'");
}

/// Generation family of an instance. Only Wedge carries a parameter.
struct InstanceVariant {
  VariantKind kind = VariantKind::General;
  double beta = 0.0;
};

/// min x'Hx + 2g'x  s.t.  gamma <= |x| <= nu,  |x - c| <= b'x - alpha.
struct EtrsInstance {
  int n = 0;
  Mat H;
  Vec g;
  double gamma = 0.0;
  double nu = 1.0;
  Vec c;
  Vec b;
  double alpha = 0.0;
  std::optional<Vec> interior_point;

  InstanceVariant variant;
  std::optional<std::uint64_t> seed;

  /// Throws std::invalid_argument when any structural invariant fails.
  void validate(double symmetry_tol = 1e-12) const {
    if (n < 1) throw std::invalid_argument("instance dimension must be positive");
    if (H.rows() != n || H.cols() != n) throw std::invalid_argument("H must be n x n");
    require_size(g.size(), n, "g");
    require_size(c.size(), n, "c");
    require_size(b.size(), n, "b");
    if (!is_symmetric(H, symmetry_tol)) throw std::invalid_argument("H is not symmetric");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
    if (!(nu >= gamma)) throw std::invalid_argument("nu must be at least gamma");
    if (interior_point) {
      const Vec& xh = *interior_point;
      require_size(xh.size(), n, "interior_point");
      if (!(xh.norm() < nu - 1e-9) || !((xh - c).norm() < b.dot(xh) - alpha - 1e-9)) {
        throw std::invalid_argument("interior_point is not strictly feasible");
      }
    }
  }
};

struct LiftedPoint {
  Vec x;
  Mat X;
};

/// The bordered matrix [[1, x'], [x, X]].
inline Mat y_matrix(const Vec& x, const Mat& X) {
  const auto n = x.size();
  require_size(X.rows(), n, "X rows");
  require_size(X.cols(), n, "X cols");
  Mat y(n + 1, n + 1);
  y(0, 0) = 1.0;
  y.block(1, 0, n, 1) = x;
  y.block(0, 1, 1, n) = x.transpose();
  y.bottomRightCorner(n, n) = X;
  return y;
}

inline Mat y_matrix(const LiftedPoint& p) { return y_matrix(p.x, p.X); }

/// Reads (x, X) back out of a bordered matrix, dividing by the corner entry.
inline LiftedPoint from_y_matrix(const Mat& y) {
  const auto n = y.rows() - 1;
  const double y00 = y(0, 0);
  LiftedPoint p;
  p.x = 0.5 * (y.block(1, 0, n, 1) + y.block(0, 1, 1, n).transpose()) / y00;
  p.X = symmetrize(y.bottomRightCorner(n, n)) / y00;
  return p;
}

inline LiftedPoint lift(const Vec& x) { return {x, x * x.transpose()}; }

inline double objective(const EtrsInstance& inst, const Vec& x) {
  require_size(x.size(), inst.n, "x");
  return x.dot(inst.H * x) + 2.0 * inst.g.dot(x);
}

/// Linear objective H.X + 2g'x of the lifted problem.
inline double lifted_objective(const EtrsInstance& inst, const LiftedPoint& p) {
  return inner(inst.H, p.X) + 2.0 * inst.g.dot(p.x);
}

struct FeasibilityReport {
  bool feasible = false;
  double lower_ball = 0.0;  // |x| - gamma
  double upper_ball = 0.0;  // nu - |x|
  double soc = 0.0;         // b'x - alpha - |x - c|
};

inline FeasibilityReport feasibility(const EtrsInstance& inst, const Vec& x, double tol) {
  require_size(x.size(), inst.n, "x");
  FeasibilityReport r;
  const double nx = x.norm();
  r.lower_ball = nx - inst.gamma;
  r.upper_ball = inst.nu - nx;
  r.soc = inst.b.dot(x) - inst.alpha - (x - inst.c).norm();
  r.feasible = r.lower_ball >= -tol && r.upper_ball >= -tol && r.soc >= -tol;
  return r;
}

namespace detail {

inline Vec gaussian_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

inline Vec unit_direction(std::mt19937_64& rng, int n) {
  for (;;) {
    Vec v = gaussian_vec(rng, n);
    const double nv = v.norm();
    if (nv > 1e-12) return v / nv;
  }
}

inline Mat gaussian_symmetric(std::mt19937_64& rng, int n) {
  Mat h(n, n);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) h(i, j) = nd(rng);
  }
  return symmetrize(h);
}

}  // namespace detail

/// Random instance with a known strictly interior point.
///
/// The draw order is fixed so that a seed reproduces the instance bit for bit.
inline EtrsInstance random_instance(int n, VariantKind kind, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("random_instance: n must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  EtrsInstance inst;
  inst.n = n;
  inst.nu = 1.0;
  inst.variant.kind = kind;
  inst.seed = seed;

  inst.gamma = kind == VariantKind::General ? unif(rng) * inst.nu : 0.0;
  auto sample_theta = [&] {
    double t = unif(rng);
    while (t < 1e-9) t = unif(rng);
    return t;
  };

  if (kind == VariantKind::Wedge) {
    const double lo = 1.0 / std::sqrt(static_cast<double>(n));
    const double beta = lo + unif(rng) * 2.0 * n;
    inst.variant.beta = beta;
    inst.b = Vec::Constant(n, beta);
    inst.c = Vec::Zero(n);
    inst.alpha = 0.0;
    // Rejection sampling keeps x-hat uniform on the annulus restricted to the wedge.
    std::optional<Vec> xh;
    for (int attempt = 0; attempt < 10000 && !xh; ++attempt) {
      const double radius = unif(rng) * inst.nu;
      const Vec v = radius * detail::unit_direction(rng, n);
      if (v.norm() < inst.nu - 1e-9 && v.norm() < inst.b.dot(v) - 1e-9) xh = v;
    }
    if (!xh) xh = Vec::Constant(n, 0.5 / std::sqrt(static_cast<double>(n)));
    inst.interior_point = *xh;
  } else {
    double radius = inst.gamma + unif(rng) * (inst.nu - inst.gamma);
    while (radius > inst.nu - 1e-9) radius = inst.gamma + unif(rng) * (inst.nu - inst.gamma);
    const Vec xh = radius * detail::unit_direction(rng, n);
    inst.b = kind == VariantKind::Ttrs ? Vec::Zero(n) : detail::gaussian_vec(rng, n);
    inst.c = detail::gaussian_vec(rng, n);
    inst.alpha = inst.b.dot(xh) - (xh - inst.c).norm() - sample_theta();
    inst.interior_point = xh;
  }
  inst.H = detail::gaussian_symmetric(rng, n);
  inst.g = detail::gaussian_vec(rng, n);
  return inst;
}

inline EtrsInstance random_instance(int n, const InstanceVariant& v, std::uint64_t seed) {
  return random_instance(n, v.kind, seed);
}

/// Draws points of the feasible set by hit-and-run over its convex part
/// {|x| <= nu, |x - c| <= b'x - alpha}, discarding points inside the inner ball. A quarter
/// of the draws are taken at the end of the chord, so boundary points are well represented.
class FeasibleSampler {
 public:
  FeasibleSampler(const EtrsInstance& inst, std::uint64_t seed) : inst_(inst), rng_(seed) {
    if (!inst.interior_point) throw std::invalid_argument("sampler needs an interior point");
    cur_ = *inst.interior_point;
  }

  /// Returns nullopt if no point outside the inner ball turned up in `max_steps` moves.
  std::optional<Vec> next(int max_steps = 10000) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int step = 0; step < max_steps; ++step) {
      const Vec d = detail::unit_direction(rng_, inst_.n);
      const auto [lo, hi] = chord(d);
      if (!(hi > lo)) continue;
      const double u = unif(rng_);
      double t;
      if (u < 0.125) t = lo;
      else if (u < 0.25) t = hi;
      else t = lo + unif(rng_) * (hi - lo);
      const Vec x = cur_ + t * d;
      if (u >= 0.25) cur_ = x;
      if (x.norm() >= inst_.gamma) return x;
    }
    return std::nullopt;
  }

 private:
  // Slack of the convex part's SOC constraint, nonnegative inside.
  double soc_slack(const Vec& x) const {
    return inst_.b.dot(x) - inst_.alpha - (x - inst_.c).norm();
  }

  std::pair<double, double> chord(const Vec& d) const {
    // Ball: |cur + t d|^2 <= nu^2.
    const double p = cur_.dot(d);
    const double disc = p * p - (cur_.squaredNorm() - inst_.nu * inst_.nu);
    if (disc < 0.0) return {0.0, 0.0};
    const double lo = -p - std::sqrt(disc);
    const double hi = -p + std::sqrt(disc);
    // The SOC slack is concave along the line; shrink each end by bisection.
    auto shrink = [&](double inside, double outside) {
      if (soc_slack(cur_ + outside * d) >= 0.0) return outside;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (inside + outside);
        (soc_slack(cur_ + mid * d) >= 0.0 ? inside : outside) = mid;
      }
      return inside;
    };
    return {shrink(0.0, lo), shrink(0.0, hi)};
  }

  EtrsInstance inst_;
  std::mt19937_64 rng_;
  Vec cur_;
};

}  // namespace etrs
