#pragma once

// Goods-to-characteristics technology, habit partition and the augmented
// objects used by the dynamic tests.

#include "habitlens/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace habitlens {

/// Linear technology z = A x with an ordered subset of habit-forming rows.
/// The habit rows of A (in the stored order) form A^a; every augmented object
/// uses that order for the lagged coordinates.
class Technology {
 public:
  Technology() = default;
  Technology(Matrix loadings, std::vector<Index> habit_rows, int lags = 1);

  /// A = I_K, with either no habit rows or every row habit-forming.
  static Technology identity(Index goods, bool all_habit, int lags = 1);

  Index characteristic_count() const { return loadings_.rows(); }
  Index goods_count() const { return loadings_.cols(); }
  Index habit_count() const { return static_cast<Index>(habit_rows_.size()); }
  int lags() const { return lags_; }

  /// J + L * J2, the length of an augmented bundle.
  Index augmented_size() const { return characteristic_count() + lags_ * habit_count(); }

  const Matrix& loadings() const { return loadings_; }
  const std::vector<Index>& habit_rows() const { return habit_rows_; }
  Matrix habit_loadings() const;

  /// Copy with a different lag length.
  Technology with_lags(int lags) const { return Technology(loadings_, habit_rows_, lags); }

 private:
  Matrix loadings_;
  std::vector<Index> habit_rows_;
  int lags_ = 1;
};

/// Technology restricted to a subset of goods with all-zero characteristic
/// rows dropped. Used to shrink a household problem to the goods it actually
/// buys; `goods` and `rows` map back to the original indices.
struct CompactTechnology {
  Technology technology;
  std::vector<Index> goods;
  std::vector<Index> rows;
};

CompactTechnology compact_technology(const Technology& tech, std::span<const Index> goods);

/// Block matrix of shape (J + L J2) x ((L+1) K): A in the top-left block and
/// A^a on the block diagonal for each lag.
Matrix build_augmented_matrix(const Technology& tech);

/// z = A x.
Vector characteristics(const Technology& tech, const Vector& x);

/// (A x_t, A^a x_{t-1}, ..., A^a x_{t-L}) built directly from the bundles.
/// `current_and_lags` holds x_t, x_{t-1}, ..., x_{t-L}.
Vector augmented_bundle(const Technology& tech, std::span<const Vector> current_and_lags);

/// Columns of A for the goods purchased in one period.
struct ActiveSlice {
  std::vector<Index> goods;  // ascending good indices with x > 0
  Matrix contemporaneous;    // B_t:  J  x K+
  Matrix habit;              // B_t^a: J2 x K+
  Matrix augmented;          // B~_t: K+ x (J + L J2) = [B_t' | B_t^a' | ...]
  Vector prices;             // rho_t^+

  Index active_count() const { return static_cast<Index>(goods.size()); }
};

/// Throws MissingActivePrice when a purchased good has no observed price and
/// InvalidArgument when nothing is purchased.
ActiveSlice active_slice(const Technology& tech, const Vector& quantities, const Vector& prices);

/// Numerical rank: count of singular values above rel_tol * sigma_max.
Index numerical_rank(const Matrix& m, double rel_tol = kDefaultRankTolerance);

}  // namespace habitlens
