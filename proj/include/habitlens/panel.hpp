#pragma once

// Household purchase panels: period construction, unit-value aggregation and
// present-value conversion.

#include "habitlens/types.hpp"

#include <chrono>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace habitlens {

using Day = std::chrono::sys_days;

struct PurchaseEvent {
  std::string household_id;
  Day date;
  Index good = 0;  // column of the technology matrix
  double units = 0.0;
  double expenditure = 0.0;
};

/// One aggregated period. Prices are NaN for goods without an observed unit
/// value (the missing-price regime); a good is active iff its quantity is
/// positive.
struct Period {
  Vector quantities;
  Vector prices;
  double expenditure = 0.0;
  Day first_day{};
  Day last_day{};

  bool active(Index k) const { return quantities(k) > 0.0; }
  bool has_price(Index k) const;
  std::vector<Index> active_set() const;
  Day midpoint() const;
};

struct HouseholdPanel {
  std::string household_id;
  std::vector<Period> periods;

  Index period_count() const { return static_cast<Index>(periods.size()); }
  Index goods_count() const { return periods.empty() ? 0 : periods.front().quantities.size(); }
  /// Goods purchased in at least one period, ascending.
  std::vector<Index> purchased_goods() const;
  /// Mean observed price over all active goods and periods.
  double mean_active_price() const;
};

struct Excluded {
  std::string household_id;
  std::string reason;
  Index periods = 0;
};

using PeriodResult = std::variant<HouseholdPanel, Excluded>;

inline constexpr Index kDefaultMinPeriods = 3;

/// Splits one household's purchase history into T = floor(S / G) equal bins,
/// where S is the span from first to last purchase and G the longest gap
/// between consecutive purchase dates. Bins are left-closed and right-open
/// except the last, which is closed. Event order does not matter.
PeriodResult build_periods(std::span<const PurchaseEvent> events, Index goods_count,
                           Index min_periods = kDefaultMinPeriods);

/// Pools the events of one bin: quantities summed per good, unit value =
/// total expenditure / total units, missing prices for unpurchased goods.
Period aggregate_period(std::span<const PurchaseEvent> events, Index goods_count);

/// Monthly interest rates keyed by "YYYY-MM".
struct DiscountSeries {
  std::map<std::string, double> monthly_rate;
};

std::string month_key(Day day);

/// Scales every period's prices and expenditure by prod_{m < t} (1 + r_m)^-1
/// over the calendar months from the month of the first period's start to the
/// month before the period midpoint.
HouseholdPanel to_present_value(const HouseholdPanel& panel, const DiscountSeries& series);

/// Checks the panel invariants (non-empty periods, nonnegative quantities,
/// prices on active goods, expenditure identity). Throws on violation.
void validate_panel(const HouseholdPanel& panel, double rel_tol = 1e-9);

/// Groups events by household, in ascending household id order.
std::vector<std::vector<PurchaseEvent>> group_by_household(std::span<const PurchaseEvent> events);

}  // namespace habitlens
