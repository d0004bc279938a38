#include "habitlens/hedonic.hpp"

#include "habitlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace habitlens {

Technology::Technology(Matrix loadings, std::vector<Index> habit_rows, int lags)
    : loadings_(std::move(loadings)), habit_rows_(std::move(habit_rows)), lags_(lags) {
  if (loadings_.rows() < 1 || loadings_.cols() < 1) {
    throw Error(ErrorCode::invalid_argument, "technology needs J >= 1 and K >= 1");
  }
  if (lags_ < 1) throw Error(ErrorCode::invalid_argument, "technology needs at least one lag");
  if (!loadings_.allFinite()) throw Error(ErrorCode::invalid_argument, "technology entries must be finite");
  std::set<Index> seen;
  for (Index r : habit_rows_) {
    if (r < 0 || r >= loadings_.rows()) {
      throw Error(ErrorCode::invalid_argument, "habit row out of range");
    }
    if (!seen.insert(r).second) throw Error(ErrorCode::invalid_argument, "habit rows must be distinct");
  }
}

Technology Technology::identity(Index goods, bool all_habit, int lags) {
  std::vector<Index> habit;
  if (all_habit) {
    habit.resize(static_cast<std::size_t>(goods));
    for (Index k = 0; k < goods; ++k) habit[static_cast<std::size_t>(k)] = k;
  }
  return Technology(Matrix::Identity(goods, goods), std::move(habit), lags);
}

Matrix Technology::habit_loadings() const {
  Matrix ha(habit_count(), goods_count());
  for (Index i = 0; i < habit_count(); ++i) ha.row(i) = loadings_.row(habit_rows_[static_cast<std::size_t>(i)]);
  return ha;
}

CompactTechnology compact_technology(const Technology& tech, std::span<const Index> goods) {
  CompactTechnology out;
  out.goods.assign(goods.begin(), goods.end());
  std::vector<Index> new_row(static_cast<std::size_t>(tech.characteristic_count()), -1);
  for (Index j = 0; j < tech.characteristic_count(); ++j) {
    bool nonzero = false;
    for (Index k : goods) nonzero = nonzero || tech.loadings()(j, k) != 0.0;
    if (nonzero) {
      new_row[static_cast<std::size_t>(j)] = static_cast<Index>(out.rows.size());
      out.rows.push_back(j);
    }
  }
  // An all-zero selection still needs one row to be a valid technology.
  if (out.rows.empty()) {
    out.rows.push_back(0);
    new_row[0] = 0;
  }
  Matrix a(static_cast<Index>(out.rows.size()), static_cast<Index>(goods.size()));
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index c = 0; c < a.cols(); ++c) {
      a(i, c) = tech.loadings()(out.rows[static_cast<std::size_t>(i)], goods[static_cast<std::size_t>(c)]);
    }
  }
  std::vector<Index> habit;
  for (Index r : tech.habit_rows()) {
    const Index nr = new_row[static_cast<std::size_t>(r)];
    if (nr >= 0) habit.push_back(nr);
  }
  out.technology = Technology(std::move(a), std::move(habit), tech.lags());
  return out;
}

Matrix build_augmented_matrix(const Technology& tech) {
  const Index j = tech.characteristic_count();
  const Index k = tech.goods_count();
  const Index j2 = tech.habit_count();
  const int lags = tech.lags();
  Matrix out = Matrix::Zero(j + lags * j2, (lags + 1) * k);
  out.topLeftCorner(j, k) = tech.loadings();
  if (j2 > 0) {
    const Matrix ha = tech.habit_loadings();
    for (int l = 1; l <= lags; ++l) out.block(j + (l - 1) * j2, l * k, j2, k) = ha;
  }
  return out;
}

Vector characteristics(const Technology& tech, const Vector& x) {
  if (x.size() != tech.goods_count()) {
    throw Error(ErrorCode::dimension_mismatch, "bundle length does not match technology goods count");
  }
  return tech.loadings() * x;
}

Vector augmented_bundle(const Technology& tech, std::span<const Vector> current_and_lags) {
  if (static_cast<int>(current_and_lags.size()) != tech.lags() + 1) {
    throw Error(ErrorCode::dimension_mismatch, "augmented bundle needs L + 1 bundles");
  }
  const Index j = tech.characteristic_count();
  const Index j2 = tech.habit_count();
  Vector out(tech.augmented_size());
  out.head(j) = characteristics(tech, current_and_lags[0]);
  for (int l = 1; l <= tech.lags(); ++l) {
    const Vector z = characteristics(tech, current_and_lags[static_cast<std::size_t>(l)]);
    for (Index h = 0; h < j2; ++h) out(j + (l - 1) * j2 + h) = z(tech.habit_rows()[static_cast<std::size_t>(h)]);
  }
  return out;
}

ActiveSlice active_slice(const Technology& tech, const Vector& quantities, const Vector& prices) {
  const Index k = tech.goods_count();
  if (quantities.size() != k || prices.size() != k) {
    throw Error(ErrorCode::dimension_mismatch, "active_slice: bundle or price length mismatch");
  }
  ActiveSlice s;
  for (Index g = 0; g < k; ++g) {
    if (quantities(g) > 0.0) {
      if (!std::isfinite(prices(g))) {
        throw Error(ErrorCode::missing_active_price,
                    "price missing for purchased good index " + std::to_string(g));
      }
      s.goods.push_back(g);
    }
  }
  if (s.goods.empty()) throw Error(ErrorCode::invalid_argument, "active_slice: no purchased goods");

  const Index kp = s.active_count();
  const Index j = tech.characteristic_count();
  const Index j2 = tech.habit_count();
  s.contemporaneous.resize(j, kp);
  s.habit.resize(j2, kp);
  s.prices.resize(kp);
  for (Index c = 0; c < kp; ++c) {
    const Index g = s.goods[static_cast<std::size_t>(c)];
    s.contemporaneous.col(c) = tech.loadings().col(g);
    for (Index h = 0; h < j2; ++h) s.habit(h, c) = tech.loadings()(tech.habit_rows()[static_cast<std::size_t>(h)], g);
    s.prices(c) = prices(g);
  }
  s.augmented.resize(kp, tech.augmented_size());
  s.augmented.leftCols(j) = s.contemporaneous.transpose();
  for (int l = 1; l <= tech.lags(); ++l) s.augmented.middleCols(j + (l - 1) * j2, j2) = s.habit.transpose();
  return s;
}

Index numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) r += sv(i) > rel_tol * sv(0) ? 1 : 0;
  return r;
}

}  // namespace habitlens
