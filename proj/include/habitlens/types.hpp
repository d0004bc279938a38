#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

namespace habitlens {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kMissingPrice = std::numeric_limits<double>::quiet_NaN();

/// Default rank cut-off: singular values below rel_tol * sigma_max are zero.
inline constexpr double kDefaultRankTolerance = 1e-8;

/// Default absolute LP feasibility tolerance (prices are rescaled first).
inline constexpr double kDefaultFeasibilityTolerance = 1e-7;

/// {0.950, 0.951, ..., 1.000}
std::vector<double> default_beta_grid();

/// Inclusive grid lo, lo+step, ..., hi; values are rounded to 1e-12 so that
/// repeated construction is bit-identical.
std::vector<double> make_beta_grid(double lo, double hi, double step);

}  // namespace habitlens
