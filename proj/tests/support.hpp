#pragma once

#include "habitlens/panel.hpp"
#include "habitlens/synth.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace habitlens::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r == 0 ? 0 : static_cast<Index>(rows.begin()->size());
  Matrix out(r, c);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double x : row) out(i, j++) = x;
    ++i;
  }
  return out;
}

inline constexpr double NA = kMissingPrice;

// Panel from per-period bundles and prices; NaN marks an unobserved price.
inline HouseholdPanel panel_of(const std::vector<Vector>& quantities, const std::vector<Vector>& prices,
                               std::string id = "h") {
  HouseholdPanel p;
  p.household_id = std::move(id);
  for (std::size_t t = 0; t < quantities.size(); ++t) {
    Period period;
    period.quantities = quantities[t];
    period.prices = prices[t];
    for (Index k = 0; k < period.quantities.size(); ++k) {
      if (period.quantities(k) > 0.0) period.expenditure += period.quantities(k) * period.prices(k);
    }
    period.first_day = period.last_day = Day{std::chrono::days{static_cast<int>(7 * t)}};
    p.periods.push_back(std::move(period));
  }
  return p;
}

// Random generator dimensions inside K <= 10, J <= 6, J2 in {0, 1, 2},
// T in {4, ..., 8}.
inline GeneratorConfig random_config(std::uint64_t seed, int lags = 1) {
  std::mt19937_64 rng(seed * 7919 + 17);
  auto pick = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
  GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.characteristics = pick(2, 6);
  cfg.goods = pick(cfg.characteristics, 10);
  cfg.habit_count = std::min<Index>(pick(0, 2), cfg.characteristics);
  cfg.lags = lags;
  cfg.periods = pick(std::max<Index>(4, 2 * lags + 2), 8);
  cfg.max_active = pick(1, std::min<Index>(4, cfg.goods));
  cfg.beta = std::uniform_real_distribution<double>(0.95, 1.0)(rng);
  return cfg;
}

}  // namespace habitlens::testing
