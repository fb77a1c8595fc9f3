#include <gtest/gtest.h>

#include "etrs/cuts.hpp"
#include "test_support.hpp"

using namespace etrs;
using etrs::testing::closed_gap_instance;
using etrs::testing::feasible_samples;
using etrs::testing::ttrs_instance;

namespace {

EtrsInstance with_lower_radius(std::uint64_t seed) {
  for (;; ++seed) {
    EtrsInstance inst = random_instance(2 + static_cast<int>(seed % 2), VariantKind::General, seed);
    if (inst.gamma > 0.05 && inst.c.norm() > 0.05) return inst;
  }
}

Cut random_cut(std::mt19937_64& rng, int n, double rho) {
  Cut cut = Cut::zero(n);
  cut.Hq = detail::gaussian_symmetric(rng, n);
  cut.gq = detail::gaussian_vec(rng, n);
  cut.fq = detail::gaussian_vec(rng, 1)(0);
  cut.gl = detail::gaussian_vec(rng, n);
  cut.fl = detail::gaussian_vec(rng, 1)(0);
  cut.qlow = std::abs(detail::gaussian_vec(rng, 1)(0));
  cut.rho = rho;
  return cut;
}

// The row written out term by term, with gamma dropped for UseZero.
double literal_row(const Cut& k, const EtrsInstance& inst, const LiftedPoint& p) {
  const double g = k.variant == CutVariant::UseGamma ? inst.gamma : 0.0;
  const double nu = inst.nu;
  const Mat& X = p.X;
  const Vec& x = p.x;
  const double qlin = inner(k.Hq, X) + 2.0 * k.gq.dot(x) + k.fq;
  const double lhs =
      (g + nu) * nu * qlin +
      (g + nu) * (2.0 * inner(k.gl * inst.b.transpose(), X) +
                  (k.fl * inst.b - 2.0 * inst.alpha * k.gl).dot(x) - inst.alpha * k.fl);
  const double rhs = k.qlow * X.trace() +
                     g * nu * (inner(k.Hq, X) + 2.0 * (k.gq + k.gl).dot(x) + k.fq + k.fl) -
                     (2.0 * inner(k.gl * inst.c.transpose(), X) + k.fl * inst.c.dot(x)) -
                     k.rho * nu * (2.0 * k.gl.dot(x) + k.fl);
  return lhs - rhs;
}

Cut printed_ttrs_cut() {
  Cut cut = Cut::zero(2);
  cut.gl << 1.8633, -0.8826;
  cut.fl = 4.1236;
  cut.qlow = 1.2604;
  cut.Hq = -4.9035 * Mat::Identity(2, 2);
  cut.gq << -1.8633, 0.8826;
  cut.fq = 2.0403;
  return cut;
}

Cut printed_third_cut() {
  Cut cut = Cut::zero(2);
  cut.Hq << -0.6296, 0.2398, 0.2398, -0.4512;
  cut.gq << -0.7868, -0.7580;
  cut.fq = 1.0;
  cut.gl << 0.3479, 0.3591;
  cut.fl = 1.0;
  cut.qlow = 1.149;
  return cut;
}

}  // namespace

TEST(ComputeRho, ZeroWithoutLowerRadiusOrCenter) {
  EXPECT_EQ(compute_rho(ttrs_instance()), 0.0);
  EtrsInstance inst = with_lower_radius(1);
  inst.c.setZero();
  EXPECT_EQ(compute_rho(inst), 0.0);
}

TEST(ComputeRho, BoundHoldsOnSamples) {
  for (std::uint64_t seed : {3u, 40u, 77u}) {
    const EtrsInstance inst = with_lower_radius(seed);
    const double rho = compute_rho(inst);
    EXPECT_GE(rho, 0.0);
    EXPECT_LE(rho, inst.c.norm());
    for (const Vec& x : feasible_samples(inst, 10000, seed)) {
      EXPECT_LE(inst.gamma * inst.c.dot(x), rho * x.squaredNorm() + 1e-6);
    }
  }
}

TEST(CutToLinear, MatchesTermByTermExpansion) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EtrsInstance inst = random_instance(3, VariantKind::General, seed);
    for (CutVariant v : {CutVariant::UseGamma, CutVariant::UseZero}) {
      Cut cut = random_cut(rng, 3, 0.3 * inst.c.norm());
      cut.variant = v;
      const LinearRow row = cut_to_linear(cut, inst);
      for (int k = 0; k < 5; ++k) {
        const Vec x = detail::gaussian_vec(rng, 3);
        const LiftedPoint p{x, detail::gaussian_symmetric(rng, 3)};
        const double want = literal_row(cut, inst, p);
        EXPECT_NEAR(row.evaluate(p), want, 1e-10 * (1.0 + std::abs(want)));
      }
    }
  }
}

TEST(CutToLinear, ConstantMultiplierGivesTraceBound) {
  EtrsInstance inst = closed_gap_instance();
  inst.nu = 1.3;
  Cut cut = Cut::zero(2);
  cut.fl = 1.0;
  cut.qlow = 1.0;
  const LinearRow row = cut_to_linear(cut, inst);
  EXPECT_TRUE(row.A.isApprox(-Mat::Identity(2, 2)));
  EXPECT_TRUE(row.a.isApprox(inst.nu * inst.b));
  EXPECT_NEAR(row.a0, -inst.nu * inst.alpha, 1e-15);
}

TEST(CutToLinear, ConstantMultiplierWithCenter) {
  const EtrsInstance inst = with_lower_radius(9);
  Cut cut = Cut::zero(inst.n);
  cut.fl = 1.0;
  cut.qlow = 1.0;
  cut.rho = 0.2;
  const LinearRow row = cut_to_linear(cut, inst);
  const double gn = inst.gamma + inst.nu;
  EXPECT_TRUE(row.A.isApprox(-Mat::Identity(inst.n, inst.n)));
  EXPECT_LT((row.a - (gn * inst.b + inst.c)).norm(), 1e-14);
  EXPECT_NEAR(row.a0, -gn * inst.alpha - inst.gamma * inst.nu + cut.rho * inst.nu, 1e-14);
}

TEST(CutToLinear, PrintedTtrsCutClosesTheGap) {
  const EtrsInstance inst = ttrs_instance();
  RelaxationSpec spec = RelaxationSpec::shor_ksoc();
  spec.add_cut(printed_ttrs_cut(), inst);
  const auto r = solve_relaxation(inst, spec);
  EXPECT_NEAR(r.value, -0.8943, 1e-3);
}

TEST(CutToLinear, LastPrintedCutAloneRecoversTheOptimum) {
  const EtrsInstance inst = closed_gap_instance();
  Cut cut = printed_third_cut();
  RelaxationSpec printed = RelaxationSpec::shor_ksoc();
  printed.add_cut(cut, inst);
  const double v_printed = solve_relaxation(inst, printed).value;
  EXPECT_GT(v_printed, -1.1431 + 0.05);
  EXPECT_LT(v_printed, -1.0707);

  // The printed lower bound is three digits; the rounded q and l attain about 1.163 on F.
  double qlow = std::numeric_limits<double>::infinity();
  for (const Vec& x : feasible_samples(inst, 200000, 1)) qlow = std::min(qlow, cut.q(x) + cut.l(x));
  EXPECT_GT(qlow, cut.qlow);
  cut.qlow = qlow;
  RelaxationSpec sharp = RelaxationSpec::shor_ksoc();
  sharp.add_cut(cut, inst);
  const auto r = solve_relaxation(inst, sharp);
  EXPECT_NEAR(r.value, -1.0707, 1e-3);
  EXPECT_TRUE(rank1_check(r.Y));
}

TEST(CutGenerator, EndpointVariantsDominateIntermediateRadii) {
  std::mt19937_64 rng(31);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EtrsInstance inst = with_lower_radius(200 + seed);
    for (int k = 0; k < 20; ++k) {
      Cut cut = random_cut(rng, inst.n, 0.5 * inst.c.norm());
      cut.variant = CutVariant::UseGamma;
      const Mat full = cut_generator(cut, inst);
      cut.variant = CutVariant::UseZero;
      const Mat zero = cut_generator(cut, inst);
      const double t = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
      EtrsInstance mid = inst;
      mid.gamma = t * inst.gamma;
      cut.variant = CutVariant::UseGamma;
      const Mat between = cut_generator(cut, mid);
      EXPECT_LT((between - (t * full + (1.0 - t) * zero)).cwiseAbs().maxCoeff(),
                1e-12 * (1.0 + full.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(DualMembership, GeneratedQuadraticsAreNonnegativeOnTheSet) {
  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const EtrsInstance inst = random_instance(2, VariantKind::General, 60 + seed);
    for (const RelaxationSpec& spec : {RelaxationSpec::shor(), RelaxationSpec::shor_ksoc()}) {
      const DualMembership d = dual_membership_rows(homogenize(spec, inst));
      const auto samples = feasible_samples(inst, 1000, seed);
      for (int k = 0; k < 10; ++k) {
        const Vec lam = conic::project(d.cone, detail::gaussian_vec(rng, d.cone.dim()));
        const Mat q = smat(d.generators * lam);
        for (const Vec& x : samples) {
          EXPECT_GE(inner(q, y_matrix(lift(x))), -1e-9 * (1.0 + q.norm()));
        }
      }
    }
  }
}

TEST(Rank1Check, Examples) {
  const Vec v = (Vec(3) << 1.0, 0.3, -2.0).finished();
  EXPECT_TRUE(rank1_check(v * v.transpose()));
  EXPECT_FALSE(rank1_check(Mat::Identity(3, 3)));
  Mat y(3, 3);
  y << 1, 0.7071, -0.7071, 0.7071, 0.5, -0.5, -0.7071, -0.5, 0.5;
  EXPECT_TRUE(rank1_check(y));
}

TEST(RelaxGeneralHessian, Examples) {
  const Vec z = Vec::Zero(3);
  EXPECT_NEAR(relax_general_hessian(Mat::Identity(3, 3), z, z, -0.4, 2.0), -0.4, 1e-15);
  EXPECT_NEAR(relax_general_hessian(Mat::Zero(3, 3), z, z, -0.4, 1.0), -1.4, 1e-15);
  EXPECT_THROW(relax_general_hessian(Mat::Zero(3, 3), z, z, 0.0, 0.0), std::invalid_argument);
}

TEST(RelaxGeneralHessian, ImpliedConstraintHolds) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3;
    const double R = 1.5;
    const Mat J = Mat::Identity(n, n) + 0.3 * detail::gaussian_symmetric(rng, n);
    const Vec c = 0.2 * detail::gaussian_vec(rng, n);
    const Vec b = detail::gaussian_vec(rng, n);
    const double a = -2.0;
    const double adj = relax_general_hessian(J, c, b, a, R);
    int checked = 0;
    while (checked < 1000) {
      Vec x = detail::unit_direction(rng, n) * R * std::uniform_real_distribution<double>(0, 1)(rng);
      if ((J * x - c).norm() > b.dot(x) - a) continue;
      ++checked;
      EXPECT_LE((x - c).norm(), b.dot(x) - adj + 1e-12);
    }
  }
}

TEST(Separate, FeasibleLiftsAreNotCut) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const EtrsInstance inst = seed % 2 ? with_lower_radius(seed) : random_instance(2, VariantKind::General, seed);
    const double rho = compute_rho(inst);
    for (const Vec& x : feasible_samples(inst, 3, seed)) {
      for (CutVariant v : {CutVariant::UseGamma, CutVariant::UseZero}) {
        const auto out = separate(inst, lift(x), RelaxationSpec::shor_ksoc(), rho, v);
        EXPECT_GE(out.violation, -1e-6);
        EXPECT_FALSE(out.violated);
      }
    }
  }
}

TEST(Separate, PrintedIteratesAreViolated) {
  for (const EtrsInstance& inst : {closed_gap_instance(), ttrs_instance()}) {
    const auto r = solve_relaxation(inst, RelaxationSpec::shor_ksoc());
    const auto out = separate(inst, r.point, RelaxationSpec::shor_ksoc(), 0.0, CutVariant::UseGamma);
    EXPECT_TRUE(out.violated);
    EXPECT_LT(out.violation, -1e-5);
    ASSERT_TRUE(out.cut.has_value());
    EXPECT_GE(out.cut->qlow, 0.0);
    EXPECT_NEAR(inner(cut_generator(*out.cut, inst), r.Y), out.violation, 1e-12);
  }
}

TEST(Separate, NeedsInteriorPoint) {
  EtrsInstance inst = ttrs_instance();
  inst.interior_point.reset();
  EXPECT_THROW(separate(inst, lift(Vec::Zero(2)), RelaxationSpec::shor(), 0.0, CutVariant::UseGamma),
               std::invalid_argument);
}

TEST(CuttingLoop, ClosedGapFromKsoc) {
  const EtrsInstance inst = closed_gap_instance();
  const LoopResult r = cutting_loop(inst, RelaxationSpec::shor_ksoc());
  EXPECT_NEAR(r.v_initial, -1.1431, 1e-3);
  EXPECT_NEAR(r.v_final, -1.0707, 1e-3);
  EXPECT_TRUE(r.final_rank1);
  EXPECT_LE(r.cuts_added(), 10);
  EXPECT_EQ(r.stop, LoopStop::NotSeparated);
  EXPECT_EQ(r.bounds.size(), r.cuts.size() + 1);
  for (std::size_t i = 1; i < r.bounds.size(); ++i) EXPECT_GE(r.bounds[i], r.bounds[i - 1] - 2e-8);
  for (const Cut& cut : r.cuts) {
    const LinearRow row = cut_to_linear(cut, inst);
    for (const Vec& x : feasible_samples(inst, 10000, 1)) EXPECT_GE(row.evaluate(lift(x)), -1e-7);
  }
}

TEST(CuttingLoop, ClosedGapFromShor) {
  const LoopResult r = cutting_loop(closed_gap_instance(), RelaxationSpec::shor());
  EXPECT_NEAR(r.v_final, -1.0707, 1e-3);
  EXPECT_TRUE(r.final_rank1);
  EXPECT_LE(r.cuts_added(), 30);
}

TEST(CuttingLoop, TtrsFromKsoc) {
  const LoopResult r = cutting_loop(ttrs_instance(), RelaxationSpec::shor_ksoc());
  EXPECT_NEAR(r.v_initial, -0.9087, 1e-3);
  EXPECT_NEAR(r.v_final, -0.8943, 1e-3);
  EXPECT_TRUE(r.final_rank1);
}

TEST(CuttingLoop, CutsWithLowerRadiusAreValid) {
  const EtrsInstance inst = with_lower_radius(500);
  LoopSettings settings;
  settings.max_cuts = 5;
  const LoopResult r = cutting_loop(inst, RelaxationSpec::shor(), settings);
  for (std::size_t i = 1; i < r.bounds.size(); ++i) EXPECT_GE(r.bounds[i], r.bounds[i - 1] - 2e-8);
  const auto samples = feasible_samples(inst, 10000, 2);
  for (const Cut& cut : r.cuts) {
    EXPECT_GE(cut.qlow, 0.0);
    EXPECT_LE(cut.rho, inst.c.norm());
    const LinearRow row = cut_to_linear(cut, inst);
    for (const Vec& x : samples) EXPECT_GE(row.evaluate(lift(x)), -1e-7);
  }
}

TEST(CuttingLoop, RankOneStartStopsImmediately) {
  EtrsInstance inst = ttrs_instance();
  inst.H = Mat::Identity(2, 2);
  const LoopResult r = cutting_loop(inst, RelaxationSpec::shor_ksoc());
  EXPECT_EQ(r.stop, LoopStop::RankOne);
  EXPECT_EQ(r.cuts_added(), 0);
  EXPECT_EQ(r.v_initial, r.v_final);
}
