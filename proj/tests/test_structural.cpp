#include "habitlens/error.hpp"
#include "habitlens/structural.hpp"
#include "habitlens/synth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace habitlens;
using namespace habitlens::testing;

namespace {

// Slice with an explicit B~ and rho+ (one characteristic row per column of B~).
ActiveSlice slice_of(const Matrix& augmented, const Vector& prices, Index contemporaneous_cols) {
  ActiveSlice s;
  s.augmented = augmented;
  s.prices = prices;
  s.contemporaneous = augmented.leftCols(contemporaneous_cols).transpose();
  s.habit = augmented.rightCols(augmented.cols() - contemporaneous_cols).transpose();
  for (Index i = 0; i < augmented.rows(); ++i) s.goods.push_back(i);
  return s;
}

// Normal equations (B'B) theta = B' rho for a full-column-rank B.
double normal_equations_distance(const Matrix& b, const Vector& rho) {
  const Vector theta = (b.transpose() * b).ldlt().solve(b.transpose() * rho);
  return (rho - b * theta).norm() / rho.norm();
}

}  // namespace

TEST(RankCondition, CollinearAndNot) {
  EXPECT_TRUE(rank_condition(slice_of(mat({{1}, {2}}), vec({3, 6}), 1)));
  EXPECT_FALSE(rank_condition(slice_of(mat({{1}, {2}}), vec({3, 5}), 1)));
}

TEST(Distance, HandComputedValues) {
  EXPECT_NEAR(distance_to_manifold(slice_of(mat({{1}, {2}}), vec({3, 6}), 1)), 0.0, 1e-15);
  const double d = distance_to_manifold(slice_of(mat({{1}, {2}}), vec({3, 5}), 1));
  EXPECT_NEAR(d, std::sqrt(0.2) / std::sqrt(34.0), 1e-14);
  EXPECT_NEAR(d, 0.0767, 1e-4);
  EXPECT_NEAR(distance_to_manifold(slice_of(mat({{1}, {0}}), vec({0, 1}), 1)), 1.0, 1e-15);
}

TEST(Distance, ZeroPricesAreDegenerate) {
  try {
    distance_to_manifold(slice_of(mat({{1}, {2}}), vec({0, 0}), 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_prices);
  }
}

TEST(Distance, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const Index kp = 2 + trial % 6;
    const Index j = 1 + trial % kp;
    Matrix b(kp, j);
    for (Index r = 0; r < kp; ++r)
      for (Index c = 0; c < j; ++c) b(r, c) = n(rng);
    Vector rho(kp);
    for (Index r = 0; r < kp; ++r) rho(r) = std::abs(n(rng)) + 0.1;
    ActiveSlice s = slice_of(b, rho, j);
    EXPECT_NEAR(distance_to_manifold(s), j == kp ? 0.0 : normal_equations_distance(b, rho), 1e-9);
    // Scale invariance.
    s.prices *= 37.5;
    EXPECT_NEAR(distance_to_manifold(s), j == kp ? 0.0 : normal_equations_distance(b, rho), 1e-9);
  }
}

TEST(Distance, HabitColumnsDoNotChangeTheDistance) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index j = 3, k = 7;
    Matrix a(j, k);
    for (Index r = 0; r < j; ++r)
      for (Index c = 0; c < k; ++c) a(r, c) = u(rng);
    Vector x = Vector::Zero(k), p = Vector::Constant(k, NA);
    for (Index g = 0; g < k; ++g) {
      if (rng() % 2) {
        x(g) = 1.0;
        p(g) = u(rng);
      }
    }
    x(0) = 1.0;
    p(0) = 0.5;
    const ActiveSlice plain = active_slice(Technology(a, {}), x, p);
    const ActiveSlice habits = active_slice(Technology(a, {0, 2}, 2), x, p);
    EXPECT_EQ(distance_to_manifold(plain), distance_to_manifold(habits));
  }
}

TEST(ShadowPrices, MinimumNormAgainstPseudoinverse) {
  EXPECT_LE((solve_shadow_prices(slice_of(mat({{1, 1}}), vec({2}), 1)) - vec({1, 1})).norm(), 1e-12);
  const Vector rho = vec({0.3, -2.0, 4.5});
  EXPECT_LE((solve_shadow_prices(slice_of(Matrix::Identity(3, 3), rho, 3)) - rho).norm(), 1e-12);

  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index kp = 1 + trial % 4, d = kp + trial % 3;
    Matrix b(kp, d);
    for (Index r = 0; r < kp; ++r)
      for (Index c = 0; c < d; ++c) b(r, c) = n(rng);
    Vector theta0(d);
    for (Index c = 0; c < d; ++c) theta0(c) = n(rng);
    const Vector rho = b * theta0;
    const ActiveSlice s = slice_of(b, rho, std::min<Index>(d, 1));
    const Vector theta = solve_shadow_prices(s);
    const Vector oracle = b.completeOrthogonalDecomposition().pseudoInverse() * rho;
    EXPECT_LE((theta - oracle).norm(), 1e-8 * (1.0 + oracle.norm()));
    EXPECT_LE((b * theta - rho).norm(), 1e-8 * rho.norm());

    // Every null-space direction keeps the equality.
    const Matrix ns = shadow_price_null_space(s);
    EXPECT_EQ(ns.cols(), d - numerical_rank(b));
    for (Index c = 0; c < ns.cols(); ++c) {
      EXPECT_LE((b * (theta + 3.0 * ns.col(c)) - rho).norm(), 1e-8 * (1.0 + rho.norm()));
    }
  }
}

TEST(ShadowPrices, NoExactSolutionOffTheManifold) {
  try {
    solve_shadow_prices(slice_of(mat({{1}, {2}}), vec({3, 5}), 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_exact_solution);
  }
}

TEST(Dates, InteriorConventionGeneralisesToLags) {
  EXPECT_EQ(equality_dates(6, 1), (std::vector<Index>{1, 2, 3, 4}));
  EXPECT_EQ(retained_dates(6, 1), (std::vector<Index>{1, 2, 3, 4, 5}));
  EXPECT_EQ(equality_dates(7, 2), (std::vector<Index>{2, 3, 4}));
  EXPECT_EQ(retained_dates(7, 2), (std::vector<Index>{2, 3, 4, 5, 6}));
  EXPECT_TRUE(equality_dates(2, 1).empty());
}

TEST(EvaluateStructure, IdentityTechnologyIsAlwaysOnTheManifold) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    GeneratorConfig cfg = random_config(seed);
    const HouseholdPanel panel = generate_rationalisable(cfg).panel;
    const StructuralVerdict v = evaluate_structure(panel, Technology::identity(cfg.goods, true));
    EXPECT_TRUE(v.nc_all_pass());
    EXPECT_LE(v.household_distance, 1e-12);
  }
}

TEST(EvaluateStructure, NcPassImpliesExactShadowPrices) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const GeneratedPanel g = generate_rationalisable(random_config(seed));
    const StructuralVerdict v = evaluate_structure(g.panel, g.technology);
    ASSERT_TRUE(v.nc_all_pass());
    for (const auto& d : v.dates) {
      const Period& p = g.panel.periods[static_cast<std::size_t>(d.period)];
      const ActiveSlice s = active_slice(g.technology, p.quantities, p.prices);
      const Vector theta = solve_shadow_prices(s);
      EXPECT_LE((s.augmented * theta - s.prices).norm(), 1e-8 * s.prices.norm());
    }
  }
}

TEST(EvaluateStructure, MeanOverEvaluatedDates) {
  // One characteristic equal to good 0 + good 1; prices (3, 5) off the span
  // at the interior date, (1, 1) on it elsewhere.
  const Technology tech(mat({{1, 1}}), {});
  const HouseholdPanel panel =
      panel_of({vec({1, 1}), vec({1, 1}), vec({1, 1}), vec({1, 1})}, {vec({1, 1}), vec({3, 5}), vec({2, 2}), vec({4, 4})});
  const StructuralVerdict v = evaluate_structure(panel, tech);
  ASSERT_EQ(v.dates.size(), 2u);
  EXPECT_FALSE(v.dates[0].nc_pass);
  EXPECT_TRUE(v.dates[1].nc_pass);
  const double d = std::sqrt(2.0) / std::sqrt(34.0);
  EXPECT_NEAR(v.dates[0].distance, d, 1e-12);
  EXPECT_NEAR(v.household_distance, d / 2.0, 1e-12);
}
