#include "habitlens/panel.hpp"

#include "habitlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace habitlens {

bool Period::has_price(Index k) const { return std::isfinite(prices(k)); }

std::vector<Index> Period::active_set() const {
  std::vector<Index> out;
  for (Index k = 0; k < quantities.size(); ++k) {
    if (quantities(k) > 0.0) out.push_back(k);
  }
  return out;
}

Day Period::midpoint() const {
  const auto span = (last_day - first_day).count();
  return first_day + std::chrono::days{span / 2};
}

std::vector<Index> HouseholdPanel::purchased_goods() const {
  std::vector<Index> out;
  for (Index k = 0; k < goods_count(); ++k) {
    for (const auto& p : periods) {
      if (p.active(k)) {
        out.push_back(k);
        break;
      }
    }
  }
  return out;
}

double HouseholdPanel::mean_active_price() const {
  double sum = 0.0;
  Index n = 0;
  for (const auto& p : periods) {
    for (Index k = 0; k < p.quantities.size(); ++k) {
      if (p.active(k) && p.has_price(k)) {
        sum += p.prices(k);
        ++n;
      }
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

Period aggregate_period(std::span<const PurchaseEvent> events, Index goods_count) {
  if (events.empty()) throw Error(ErrorCode::invalid_argument, "aggregate_period: empty bin");
  Vector units = Vector::Zero(goods_count);
  Vector spend = Vector::Zero(goods_count);
  Period p;
  p.first_day = events.front().date;
  p.last_day = events.front().date;
  for (const auto& e : events) {
    if (e.good < 0 || e.good >= goods_count) {
      throw Error(ErrorCode::invalid_argument, "aggregate_period: good index out of range");
    }
    if (e.units < 0.0 || e.expenditure < 0.0) {
      throw Error(ErrorCode::inconsistent_record,
                  "negative units or expenditure for household " + e.household_id);
    }
    units(e.good) += e.units;
    spend(e.good) += e.expenditure;
    p.first_day = std::min(p.first_day, e.date);
    p.last_day = std::max(p.last_day, e.date);
  }
  p.quantities = units;
  p.prices = Vector::Constant(goods_count, kMissingPrice);
  for (Index k = 0; k < goods_count; ++k) {
    if (units(k) > 0.0) {
      p.prices(k) = spend(k) / units(k);
    } else if (spend(k) > 0.0) {
      throw Error(ErrorCode::inconsistent_record,
                  "positive expenditure with zero units for good index " + std::to_string(k));
    }
  }
  p.expenditure = spend.sum();
  return p;
}

PeriodResult build_periods(std::span<const PurchaseEvent> events, Index goods_count, Index min_periods) {
  if (events.empty()) throw Error(ErrorCode::empty_household, "household has no purchase events");
  const std::string& id = events.front().household_id;

  std::set<Day> dates;
  for (const auto& e : events) dates.insert(e.date);
  if (dates.size() < 2) return Excluded{id, "single purchase date", 0};

  const Day first = *dates.begin();
  const Day last = *dates.rbegin();
  const long span = (last - first).count();
  long gap = 0;
  for (auto it = std::next(dates.begin()); it != dates.end(); ++it) {
    gap = std::max(gap, static_cast<long>((*it - *std::prev(it)).count()));
  }
  const long t_count = span / gap;
  if (t_count < min_periods) {
    return Excluded{id, "fewer than " + std::to_string(min_periods) + " periods", static_cast<Index>(t_count)};
  }

  std::vector<std::vector<PurchaseEvent>> bins(static_cast<std::size_t>(t_count));
  for (const auto& e : events) {
    const long offset = (e.date - first).count();
    const long idx = std::min(t_count - 1, offset * t_count / span);
    bins[static_cast<std::size_t>(idx)].push_back(e);
  }

  HouseholdPanel panel;
  panel.household_id = id;
  panel.periods.reserve(bins.size());
  for (long i = 0; i < t_count; ++i) {
    auto& bin = bins[static_cast<std::size_t>(i)];
    if (bin.empty()) {
      throw Error(ErrorCode::inconsistent_record, "empty period bin for household " + id);
    }
    // Canonical order so that floating-point sums do not depend on input order.
    std::sort(bin.begin(), bin.end(), [](const PurchaseEvent& a, const PurchaseEvent& b) {
      if (a.date != b.date) return a.date < b.date;
      if (a.good != b.good) return a.good < b.good;
      if (a.units != b.units) return a.units < b.units;
      return a.expenditure < b.expenditure;
    });
    Period p = aggregate_period(bin, goods_count);
    p.first_day = first + std::chrono::days{i * span / t_count};
    p.last_day = first + std::chrono::days{(i + 1) * span / t_count};
    panel.periods.push_back(std::move(p));
  }
  return panel;
}

std::string month_key(Day day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()));
  return buf;
}

HouseholdPanel to_present_value(const HouseholdPanel& panel, const DiscountSeries& series) {
  using std::chrono::months;
  using std::chrono::year_month;
  using std::chrono::year_month_day;
  if (panel.periods.empty()) return panel;

  const year_month_day start_ymd{panel.periods.front().first_day};
  const year_month start{start_ymd.year(), start_ymd.month()};

  HouseholdPanel out = panel;
  for (auto& p : out.periods) {
    const year_month_day mid{p.midpoint()};
    const year_month target{mid.year(), mid.month()};
    double scale = 1.0;
    for (year_month m = start; m < target; m += months{1}) {
      const std::chrono::sys_days first_of_month{m / std::chrono::day{1}};
      const std::string key = month_key(first_of_month);
      const auto it = series.monthly_rate.find(key);
      if (it == series.monthly_rate.end()) {
        throw Error(ErrorCode::missing_rate, "no interest rate for month " + key);
      }
      if (!(it->second > -1.0)) throw Error(ErrorCode::invalid_argument, "interest rate must exceed -1 for " + key);
      scale /= 1.0 + it->second;
    }
    for (Index k = 0; k < p.prices.size(); ++k) {
      if (std::isfinite(p.prices(k))) p.prices(k) *= scale;
    }
    p.expenditure *= scale;
  }
  return out;
}

void validate_panel(const HouseholdPanel& panel, double rel_tol) {
  const Index k = panel.goods_count();
  for (std::size_t t = 0; t < panel.periods.size(); ++t) {
    const auto& p = panel.periods[t];
    const std::string where = panel.household_id + " period " + std::to_string(t + 1);
    if (p.quantities.size() != k || p.prices.size() != k) {
      throw Error(ErrorCode::dimension_mismatch, "inconsistent goods count in " + where);
    }
    if ((p.quantities.array() < 0.0).any()) throw Error(ErrorCode::inconsistent_record, "negative quantity in " + where);
    if (p.active_set().empty()) throw Error(ErrorCode::inconsistent_record, "no purchases in " + where);
    double spend = 0.0;
    for (Index g = 0; g < k; ++g) {
      if (p.active(g)) {
        if (!p.has_price(g)) throw Error(ErrorCode::missing_active_price, "missing price for active good in " + where);
        spend += p.prices(g) * p.quantities(g);
      }
    }
    if (std::abs(spend - p.expenditure) > rel_tol * std::max(1.0, std::abs(p.expenditure))) {
      throw Error(ErrorCode::inconsistent_record, "expenditure identity fails in " + where);
    }
  }
}

std::vector<std::vector<PurchaseEvent>> group_by_household(std::span<const PurchaseEvent> events) {
  std::map<std::string, std::vector<PurchaseEvent>> by_id;
  for (const auto& e : events) by_id[e.household_id].push_back(e);
  std::vector<std::vector<PurchaseEvent>> out;
  out.reserve(by_id.size());
  for (auto& [id, list] : by_id) out.push_back(std::move(list));
  return out;
}

}  // namespace habitlens
