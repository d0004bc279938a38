#include "habitlens/error.hpp"
#include "habitlens/hedonic.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace habitlens;
using namespace habitlens::testing;

namespace {

Matrix random_loadings(std::mt19937_64& rng, Index j, Index k) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix a(j, k);
  for (Index r = 0; r < j; ++r)
    for (Index c = 0; c < k; ++c) a(r, c) = u(rng);
  return a;
}

}  // namespace

TEST(Technology, AugmentedMatrixBlockLayout) {
  const Technology tech(Matrix::Identity(2, 2), {1}, 1);
  const Matrix expected = mat({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}});
  EXPECT_EQ(build_augmented_matrix(tech), expected);
}

TEST(Technology, NoHabitsGivesZeroLagBlock) {
  const Matrix a = mat({{1, 2, 3}, {4, 5, 6}});
  const Technology tech(a, {}, 1);
  const Matrix aug = build_augmented_matrix(tech);
  ASSERT_EQ(aug.rows(), 2);
  ASSERT_EQ(aug.cols(), 6);
  EXPECT_EQ(Matrix(aug.leftCols(3)), a);
  EXPECT_TRUE(aug.rightCols(3).isZero(0.0));
}

TEST(Technology, CharacteristicsOfBundles) {
  EXPECT_EQ(characteristics(Technology::identity(2, false), vec({2, 3})), vec({2, 3}));
  EXPECT_EQ(characteristics(Technology(mat({{1, 1}}), {}), vec({2, 3})), vec({5}));
  EXPECT_EQ(characteristics(Technology(mat({{1, 1}}), {}), vec({0, 0})), vec({0}));
  EXPECT_THROW(characteristics(Technology(mat({{1, 1}}), {}), vec({1})), Error);
}

TEST(Technology, AugmentedBundleStacksHabitLag) {
  const Technology tech(Matrix::Identity(2, 2), {1}, 1);
  const std::vector<Vector> xs{vec({1, 2}), vec({3, 4})};
  EXPECT_EQ(augmented_bundle(tech, xs), vec({1, 2, 4}));
}

TEST(Technology, AugmentedBundleMatchesBlockMatrixProduct) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int lags = 1; lags <= 3; ++lags) {
    for (int trial = 0; trial < 50; ++trial) {
      const Index j = 3, k = 5;
      const Technology tech(random_loadings(rng, j, k), {0, 2}, lags);
      std::vector<Vector> xs;
      Vector stacked((lags + 1) * k);
      for (int l = 0; l <= lags; ++l) {
        Vector x(k);
        for (Index g = 0; g < k; ++g) x(g) = u(rng);
        stacked.segment(l * k, k) = x;
        xs.push_back(x);
      }
      const Vector direct = augmented_bundle(tech, xs);
      const Vector via_matrix = build_augmented_matrix(tech) * stacked;
      EXPECT_LE((direct - via_matrix).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Technology, OneLagLayoutEqualsExplicitConstruction) {
  std::mt19937_64 rng(2);
  const Matrix a = random_loadings(rng, 4, 6);
  const Technology tech(a, {1, 3}, 1);
  Matrix expected = Matrix::Zero(6, 12);
  expected.topLeftCorner(4, 6) = a;
  expected.block(4, 6, 1, 6) = a.row(1);
  expected.block(5, 6, 1, 6) = a.row(3);
  EXPECT_EQ(build_augmented_matrix(tech), expected);
}

TEST(ActiveSlice, SelectsPurchasedColumns) {
  const Technology tech(mat({{1, 2}, {3, 4}}), {1}, 1);
  const ActiveSlice s = active_slice(tech, vec({0, 5}), vec({NA, 7}));
  EXPECT_EQ(s.goods, (std::vector<Index>{1}));
  EXPECT_EQ(s.contemporaneous, mat({{2}, {4}}));
  EXPECT_EQ(s.habit, mat({{4}}));
  EXPECT_EQ(s.augmented, mat({{2, 4, 4}}));
  EXPECT_EQ(s.prices, vec({7}));
}

TEST(ActiveSlice, IdentityAllActiveIsIdentity) {
  const ActiveSlice s = active_slice(Technology::identity(4, false), vec({1, 1, 2, 3}), vec({1, 2, 3, 4}));
  EXPECT_EQ(s.augmented, Matrix(Matrix::Identity(4, 4)));
}

TEST(ActiveSlice, MissingActivePriceAndEmptyBundle) {
  const Technology tech = Technology::identity(2, false);
  try {
    active_slice(tech, vec({1, 0}), vec({NA, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_active_price);
  }
  EXPECT_THROW(active_slice(tech, vec({0, 0}), vec({1, 1})), Error);
}

TEST(ActiveSlice, HabitAugmentationKeepsColumnSpaceAndRank) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Index j = 1 + trial % 5, k = 2 + trial % 7;
    const Matrix a = random_loadings(rng, j, k);
    std::vector<Index> habit;
    for (Index r = 0; r < j; r += 2) habit.push_back(r);
    const Technology tech(a, habit, 1 + trial % 3);
    Vector x = Vector::Zero(k);
    for (Index g = 0; g < k; ++g) x(g) = (rng() % 2) ? 1.0 : 0.0;
    x(static_cast<Index>(rng() % static_cast<unsigned long>(k))) = 2.0;
    const ActiveSlice s = active_slice(tech, x, Vector::Ones(k));
    const Matrix bt = s.contemporaneous.transpose();
    const Index rank_b = numerical_rank(bt);
    EXPECT_EQ(numerical_rank(s.augmented), rank_b);
    // Same column space: stacking both does not raise the rank.
    Matrix both(bt.rows(), bt.cols() + s.augmented.cols());
    both << bt, s.augmented;
    EXPECT_EQ(numerical_rank(both), rank_b);
  }
}

TEST(CompactTechnology, DropsZeroRowsAndRemapsHabits) {
  const Technology tech(mat({{1, 0, 0}, {0, 0, 2}, {0, 3, 0}}), {1, 2}, 1);
  const std::vector<Index> goods{0, 2};
  const CompactTechnology c = compact_technology(tech, goods);
  EXPECT_EQ(c.rows, (std::vector<Index>{0, 1}));
  EXPECT_EQ(c.technology.loadings(), mat({{1, 0}, {0, 2}}));
  EXPECT_EQ(c.technology.habit_rows(), (std::vector<Index>{1}));
}

TEST(NumericalRank, RelativeCutoff) {
  EXPECT_EQ(numerical_rank(mat({{1, 0}, {0, 1e-9}})), 1);
  EXPECT_EQ(numerical_rank(mat({{1, 0}, {0, 1e-7}})), 2);
  EXPECT_EQ(numerical_rank(Matrix::Zero(2, 2)), 0);
}
