#include <gtest/gtest.h>

#include <unsupported/Eigen/KroneckerProduct>

#include "etrs/cuts.hpp"
#include "etrs/relax.hpp"
#include "etrs/slabs.hpp"
#include "test_support.hpp"

using namespace etrs;
using etrs::testing::bordered;
using etrs::testing::closed_gap_instance;
using etrs::testing::feasible_samples;
using etrs::testing::orthogonal_instance;
using etrs::testing::ttrs_instance;

namespace {

// 1 - x1 - x2 - tr(X)
Mat orthogonal_objective() { return bordered(1.0, Vec::Constant(2, -0.5), -Mat::Identity(2, 2)); }

// Literal arrow matrices of the KSOC product.
Mat arrow_p(const EtrsInstance& inst, const Vec& x) {
  return bordered(inst.nu, x, inst.nu * Mat::Identity(inst.n, inst.n));
}

Mat arrow_q(const EtrsInstance& inst, const Vec& x) {
  const double s = inst.b.dot(x) - inst.alpha;
  return bordered(s, x - inst.c, s * Mat::Identity(inst.n, inst.n));
}

}  // namespace

TEST(Shor, OrthogonalExampleIsWeakerThanKsoc) {
  const auto shor = solve_relaxation(orthogonal_instance(), RelaxationSpec::shor(), orthogonal_objective());
  EXPECT_LE(shor.value, -0.1248 + 1e-3);
}

TEST(Shor, FeasibleLiftsSatisfyAllRows) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EtrsInstance inst = random_instance(3, VariantKind::General, seed);
    const ConeMap shor = build_shor(inst);
    for (const Vec& x : feasible_samples(inst, 200, seed)) {
      EXPECT_TRUE(shor.contains(y_matrix(lift(x)), 1e-9));
    }
  }
}

TEST(Shor, PinchedRadiiFixTheTrace) {
  EtrsInstance inst = orthogonal_instance();
  inst.gamma = 1.0;
  inst.interior_point.reset();
  const Mat trace = bordered(0.0, Vec::Zero(2), Mat::Identity(2, 2));
  const auto lo = solve_relaxation(inst, RelaxationSpec::shor(), trace);
  const auto hi = solve_relaxation(inst, RelaxationSpec::shor(), -trace);
  EXPECT_NEAR(lo.value, 1.0, 1e-6);
  EXPECT_NEAR(-hi.value, 1.0, 1e-6);
}

TEST(Shor, GeneratorsMatchTheirHomogenizedRows) {
  const EtrsInstance inst = random_instance(3, VariantKind::General, 4);
  const auto gens = shor_generators(inst);
  ASSERT_EQ(gens.size(), 4u);
  Mat lower = Mat::Identity(4, 4);
  lower(0, 0) = -inst.gamma * inst.gamma;
  EXPECT_TRUE(gens[0].isApprox(lower));
  EXPECT_TRUE(gens[3].isApprox(bordered(-inst.alpha, 0.5 * inst.b, Mat::Zero(3, 3))));
  // Each generator evaluated at a lift is the constraint slack it encodes.
  const Vec x = *inst.interior_point;
  const Mat y = y_matrix(lift(x));
  EXPECT_NEAR(inner(gens[1], y), 1.0 - x.squaredNorm(), 1e-12);
  const double s = inst.b.dot(x) - inst.alpha;
  EXPECT_NEAR(inner(gens[2], y), s * s - (x - inst.c).squaredNorm(), 1e-10);
}

TEST(Ksoc, OrthogonalExampleValueAndSolution) {
  const auto r = solve_relaxation(orthogonal_instance(), RelaxationSpec::shor_ksoc(), orthogonal_objective());
  EXPECT_NEAR(r.value, -0.1248, 1e-3);
  EXPECT_NEAR(r.Y(0, 1), 0.0624, 1e-3);
  EXPECT_NEAR(r.Y(0, 2), 0.0624, 1e-3);
  EXPECT_NEAR(r.Y(1, 1), 0.5, 1e-3);
  EXPECT_NEAR(r.Y(1, 2), -0.3018, 1e-3);
  EXPECT_NEAR(r.Y(2, 2), 0.5, 1e-3);
}

TEST(Ksoc, LinearizationAgreesWithKroneckerAtLifts) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EtrsInstance inst = random_instance(2 + static_cast<int>(seed % 3), VariantKind::General, seed);
    std::mt19937_64 rng(seed);
    const Vec x = detail::gaussian_vec(rng, inst.n);
    const Mat expected = Eigen::kroneckerProduct(arrow_p(inst, x), arrow_q(inst, x));
    EXPECT_LT((ksoc_matrix(inst, y_matrix(lift(x))) - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Ksoc, ConeMapMatchesMatrixForm) {
  const EtrsInstance inst = random_instance(3, VariantKind::General, 8);
  const ConeMap k = build_ksoc(inst);
  ASSERT_EQ(k.cone.psd_side_lengths, std::vector<int>{16});
  std::mt19937_64 rng(3);
  const Mat y = detail::gaussian_symmetric(rng, 4);
  EXPECT_LT((k.map * svec(y) - svec(ksoc_matrix(inst, y))).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ksoc, FeasibleLiftsArePsd) {
  const EtrsInstance inst = random_instance(3, VariantKind::General, 21);
  const ConeMap k = build_ksoc(inst);
  for (const Vec& x : feasible_samples(inst, 200, 5)) EXPECT_TRUE(k.contains(y_matrix(lift(x)), 1e-9));
}

TEST(Ksoc, SideForOneDimension) {
  EtrsInstance inst;
  inst.n = 1;
  inst.H = Mat::Zero(1, 1);
  inst.g = Vec::Zero(1);
  inst.c = Vec::Zero(1);
  inst.b = Vec::Ones(1);
  inst.alpha = -1.0;
  EXPECT_EQ(build_ksoc(inst).cone.psd_side_lengths, std::vector<int>{4});
}

TEST(Ksoc, WorkedInstanceValues) {
  EXPECT_NEAR(solve_relaxation(closed_gap_instance(), RelaxationSpec::shor_ksoc()).value, -1.1431, 1e-3);
  EXPECT_NEAR(solve_relaxation(ttrs_instance(), RelaxationSpec::shor_ksoc()).value, -0.9087, 1e-3);
}

TEST(Ksoc, ClosedGapIterateMatchesPrintedPoint) {
  const auto r = solve_relaxation(closed_gap_instance(), RelaxationSpec::shor_ksoc());
  EXPECT_NEAR(r.point.x(0), 0.2922, 1e-3);
  EXPECT_NEAR(r.point.x(1), -0.1783, 1e-3);
  EXPECT_NEAR(r.point.X(0, 0), 0.4963, 1e-3);
  EXPECT_NEAR(r.point.X(0, 1), -0.3210, 1e-3);
  EXPECT_NEAR(r.point.X(1, 1), 0.5037, 1e-3);
}

TEST(Socrlt, FeasibleLiftsSatisfyBothForms) {
  const EtrsInstance inst = orthogonal_instance();
  const ConeMap ball = build_socrlt(inst, inst.b, inst.alpha, SocrltKind::Ball);
  const ConeMap soc = build_socrlt(inst, inst.b, inst.alpha, SocrltKind::Soc);
  for (const Vec& x : feasible_samples(inst, 1000, 17)) {
    const Mat y = y_matrix(lift(x));
    EXPECT_TRUE(ball.contains(y, 1e-9));
    EXPECT_TRUE(soc.contains(y, 1e-9));
  }
}

TEST(Socrlt, TrivialDirectionIsTheBall) {
  const EtrsInstance inst = orthogonal_instance();
  const ConeMap ball = build_socrlt(inst, Vec::Zero(2), -1.0, SocrltKind::Ball);
  // |x| <= nu: a point of norm 1.1 fails, a point of norm 0.9 passes.
  const Vec out = (Vec(2) << 1.1, 0.0).finished();
  const Vec in = (Vec(2) << 0.0, 0.9).finished();
  const Mat some_x = Mat::Identity(2, 2);
  EXPECT_FALSE(ball.contains(y_matrix(out, some_x), 1e-12));
  EXPECT_TRUE(ball.contains(y_matrix(in, some_x), 1e-12));
}

TEST(Relaxation, NestedSpecsGiveOrderedBounds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EtrsInstance inst = random_instance(3, VariantKind::General, 100 + seed);
    const double shor = solve_relaxation(inst, RelaxationSpec::shor()).value;
    const double ksoc = solve_relaxation(inst, RelaxationSpec::shor_ksoc()).value;
    EXPECT_LE(shor, ksoc + 2e-8);
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& x : feasible_samples(inst, 2000, seed)) best = std::min(best, objective(inst, x));
    EXPECT_LE(ksoc, best + 1e-7);
  }
}

TEST(Relaxation, ExactnessDetectionIsConsistent) {
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const EtrsInstance inst = random_instance(2 + static_cast<int>(seed % 3), VariantKind::General, 300 + seed);
    const auto r = solve_relaxation(inst, RelaxationSpec::shor_ksoc());
    if (!rank1_check(r.Y)) continue;
    ++exact;
    EXPECT_TRUE(feasibility(inst, r.point.x, 1e-6).feasible);
    EXPECT_NEAR(objective(inst, r.point.x), r.value, 1e-5);
  }
  EXPECT_GT(exact, 10);
}

TEST(Relaxation, KsocDominatesSocrlt) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int n = 2 + static_cast<int>(seed % 2);
    const EtrsInstance inst = random_instance(n, VariantKind::General, 500 + seed);
    std::mt19937_64 rng(seed);
    RelaxationSpec socrlt = RelaxationSpec::shor();
    for (int k = 0; k < 20; ++k) {
      const Vec v = detail::unit_direction(rng, n);
      const double u = linear_range(inst, v).first - 1e-9;
      socrlt.socrlt_directions.push_back({v, u, k % 2 ? SocrltKind::Soc : SocrltKind::Ball});
    }
    const double with_ksoc = solve_relaxation(inst, RelaxationSpec::shor_ksoc()).value;
    const double with_socrlt = solve_relaxation(inst, socrlt).value;
    EXPECT_GE(with_ksoc, with_socrlt - 1e-6) << "seed " << seed;
  }
}

TEST(Homogenize, CountsOfDualGenerators) {
  const EtrsInstance inst = random_instance(3, VariantKind::General, 2);
  RelaxationSpec spec = RelaxationSpec::shor();
  DualMembership d = dual_membership_rows(homogenize(spec, inst));
  EXPECT_EQ(d.num_linear(), 4);
  EXPECT_EQ(d.cone.psd_side_lengths, std::vector<int>{4});
  EXPECT_EQ(d.generators.rows(), svec_size(4));

  Cut cut = Cut::zero(3);
  cut.fq = 1.0;
  spec.add_cut(cut, inst);
  EXPECT_EQ(dual_membership_rows(homogenize(spec, inst)).num_linear(), 5);

  d = dual_membership_rows(homogenize(RelaxationSpec::shor_ksoc(), inst));
  EXPECT_EQ(d.num_linear(), 4);
  EXPECT_EQ(d.cone.psd_side_lengths, (std::vector<int>{4, 16}));
}

TEST(Homogenize, RejectsFreeRows) {
  ConeMap cm;
  cm.cone.zero_dim = 1;
  cm.map = Mat::Zero(1, 3);
  EXPECT_THROW(dual_membership_rows(cm), std::invalid_argument);
}

TEST(Homogenize, CutGeneratorRecoversCutAtLifts) {
  const EtrsInstance inst = random_instance(3, VariantKind::General, 12);
  std::mt19937_64 rng(12);
  Cut cut = Cut::zero(3);
  cut.Hq = detail::gaussian_symmetric(rng, 3);
  cut.gq = detail::gaussian_vec(rng, 3);
  cut.fq = 0.7;
  cut.gl = detail::gaussian_vec(rng, 3);
  cut.fl = 0.4;
  cut.qlow = 0.3;
  RelaxationSpec spec = RelaxationSpec::shor();
  spec.add_cut(cut, inst);
  const ConeMap cm = homogenize(spec, inst);
  const LinearRow row = cut_to_linear(cut, inst);
  for (int k = 0; k < 20; ++k) {
    const Vec x = detail::gaussian_vec(rng, 3);
    const Mat y = y_matrix(lift(x));
    const Vec vals = cm.map * svec(y);
    EXPECT_NEAR(vals(4), row.evaluate(lift(x)), 1e-10 * (1.0 + std::abs(vals(4))));
  }
}

TEST(RelaxationSpec, DeduplicatesScaledCuts) {
  const EtrsInstance inst = orthogonal_instance();
  Cut cut = Cut::zero(2);
  cut.gl << 0.3, 0.2;
  cut.fl = 1.0;
  cut.fq = 0.5;
  cut.qlow = 0.2;
  RelaxationSpec spec;
  EXPECT_TRUE(spec.add_cut(cut, inst));
  Cut scaled = cut;
  scaled.fq *= 2.0;
  scaled.qlow *= 2.0;
  scaled.gl *= 2.0;
  scaled.fl *= 2.0;
  scaled.gq *= 2.0;
  // The generator is linear in (q, l, qlow), so doubling all of them doubles it.
  EXPECT_FALSE(spec.add_cut(scaled, inst));
  Cut other = cut;
  other.gl(0) += 0.1;
  EXPECT_TRUE(spec.add_cut(other, inst));
  EXPECT_EQ(spec.cut_pool.size(), 2u);
}
