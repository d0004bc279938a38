#pragma once

// Structural margin: price spanning (rank condition), distance to the hedonic
// price manifold, and shadow-price solves of the pricing equalities.

#include "habitlens/hedonic.hpp"
#include "habitlens/panel.hpp"

#include <vector>

namespace habitlens {

/// rank([B~ | rho+]) == rank(B~), ranks counted with singular values above
/// tol * sigma_max of the respective matrix.
bool rank_condition(const ActiveSlice& slice, double tol = kDefaultRankTolerance);

/// ||rho+ - P rho+|| / ||rho+|| with P the orthogonal projector onto col(B~).
/// Throws DegeneratePrices when rho+ = 0.
double distance_to_manifold(const ActiveSlice& slice, double tol = kDefaultRankTolerance);

/// Minimum-norm theta with B~ theta = rho+ (first J entries: pi_t^0, then one
/// J2 block per lag). Throws NoExactSolution when the rank condition fails.
Vector solve_shadow_prices(const ActiveSlice& slice, double tol = kDefaultRankTolerance);

/// Orthonormal basis of the null space of B~ (columns).
Matrix shadow_price_null_space(const ActiveSlice& slice, double tol = kDefaultRankTolerance);

struct DateDistance {
  Index period = 0;  // zero-based period index
  double distance = 0.0;
  bool nc_pass = true;
};

struct StructuralVerdict {
  std::vector<DateDistance> dates;
  double household_distance = 0.0;  // equal-weight mean over evaluated dates

  bool nc_all_pass() const;
};

/// Zero-based indices of the dates carrying pricing equalities: L, ..., T-1-L
/// (t = L+1, ..., T-L one-based). For one lag: t = 2, ..., T-1.
std::vector<Index> equality_dates(Index periods, int lags);

/// Zero-based indices of the dates entering the Afriat inequalities:
/// L, ..., T-1 (t = L+1, ..., T one-based).
std::vector<Index> retained_dates(Index periods, int lags);

StructuralVerdict evaluate_structure(const HouseholdPanel& panel, const Technology& tech,
                                     double tol = kDefaultRankTolerance);

}  // namespace habitlens
