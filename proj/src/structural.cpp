#include "habitlens/structural.hpp"

#include "habitlens/error.hpp"

#include <algorithm>
#include <cmath>

namespace habitlens {

namespace {

Index rank_from(const Vector& sv, double tol) {
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) r += sv(i) > tol * sv(0) ? 1 : 0;
  return r;
}

}  // namespace

bool rank_condition(const ActiveSlice& slice, double tol) {
  Matrix joined(slice.augmented.rows(), slice.augmented.cols() + 1);
  joined << slice.augmented, slice.prices;
  return numerical_rank(joined, tol) == numerical_rank(slice.augmented, tol);
}

double distance_to_manifold(const ActiveSlice& slice, double tol) {
  const double norm = slice.prices.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::degenerate_prices, "distance_to_manifold: zero price vector");
  // col(B~) = col(B'), and B' does not depend on the habit partition, so
  // every model sharing A reports bit-identical distances.
  Eigen::JacobiSVD<Matrix> svd(slice.contemporaneous.transpose(), Eigen::ComputeThinU);
  const Index r = rank_from(svd.singularValues(), tol);
  const auto basis = svd.matrixU().leftCols(r);
  const Vector residual = slice.prices - basis * (basis.transpose() * slice.prices);
  return std::clamp(residual.norm() / norm, 0.0, 1.0);
}

Vector solve_shadow_prices(const ActiveSlice& slice, double tol) {
  if (!rank_condition(slice, tol)) {
    throw Error(ErrorCode::no_exact_solution, "prices are not in the span of the augmented technology");
  }
  Eigen::JacobiSVD<Matrix> svd(slice.augmented, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Index r = rank_from(sv, tol);
  const Vector coeffs = (svd.matrixU().leftCols(r).transpose() * slice.prices).cwiseQuotient(sv.head(r));
  return svd.matrixV().leftCols(r) * coeffs;
}

Matrix shadow_price_null_space(const ActiveSlice& slice, double tol) {
  Eigen::JacobiSVD<Matrix> svd(slice.augmented, Eigen::ComputeFullV);
  const Index r = rank_from(svd.singularValues(), tol);
  const Index d = slice.augmented.cols();
  return svd.matrixV().rightCols(d - r);
}

bool StructuralVerdict::nc_all_pass() const {
  return std::all_of(dates.begin(), dates.end(), [](const DateDistance& d) { return d.nc_pass; });
}

std::vector<Index> equality_dates(Index periods, int lags) {
  std::vector<Index> out;
  for (Index t = lags; t <= periods - 1 - lags; ++t) out.push_back(t);
  return out;
}

std::vector<Index> retained_dates(Index periods, int lags) {
  std::vector<Index> out;
  for (Index t = lags; t < periods; ++t) out.push_back(t);
  return out;
}

StructuralVerdict evaluate_structure(const HouseholdPanel& panel, const Technology& tech, double tol) {
  StructuralVerdict verdict;
  double sum = 0.0;
  for (Index t : equality_dates(panel.period_count(), tech.lags())) {
    const Period& p = panel.periods[static_cast<std::size_t>(t)];
    const ActiveSlice slice = active_slice(tech, p.quantities, p.prices);
    const double d = distance_to_manifold(slice, tol);
    verdict.dates.push_back({t, d, d <= tol});
    sum += d;
  }
  if (!verdict.dates.empty()) verdict.household_distance = sum / static_cast<double>(verdict.dates.size());
  return verdict;
}

}  // namespace habitlens
