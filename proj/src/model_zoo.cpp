#include "habitlens/model_zoo.hpp"

#include "habitlens/error.hpp"
#include "habitlens/lp.hpp"
#include "habitlens/structural.hpp"

#include <algorithm>
#include <cmath>

namespace habitlens {

Index AttributeTable::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorCode::invalid_argument, "unknown attribute '" + name + "'");
  return static_cast<Index>(it - names.begin());
}

std::vector<ModelSpec> builtin_models() {
  auto chars = [](std::string name, HabitSelection habits, std::vector<std::string> names) {
    ModelSpec m;
    m.name = std::move(name);
    m.representation = Representation::characteristics;
    m.habits = habits;
    m.habit_attributes = std::move(names);
    return m;
  };
  auto goods = [](std::string name, HabitSelection habits) {
    ModelSpec m;
    m.name = std::move(name);
    m.representation = Representation::goods;
    m.habits = habits;
    return m;
  };
  std::vector<ModelSpec> out;
  out.push_back(chars("habits_chars", HabitSelection::named, {"sugar", "sodium"}));
  out.push_back(chars("habits_sugar", HabitSelection::named, {"sugar"}));
  out.push_back(chars("habits_sodium", HabitSelection::named, {"sodium"}));
  out.push_back(chars("habits_all_chars", HabitSelection::all, {}));
  out.push_back(chars("static_chars", HabitSelection::none, {}));
  out.push_back(goods("habits_all_goods", HabitSelection::all));
  out.push_back(goods("static_goods", HabitSelection::none));
  ModelSpec garp = goods("garp_goods", HabitSelection::none);
  garp.lifecycle = false;
  out.push_back(garp);
  // Without habits the discount factor drops out of the system.
  for (auto& m : out) {
    if (m.habits == HabitSelection::none) m.beta_grid = {1.0};
  }
  return out;
}

const ModelSpec& find_model(std::span<const ModelSpec> models, const std::string& name) {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw Error(ErrorCode::invalid_argument, "unknown model '" + name + "'");
}

void validate_model(const ModelSpec& spec, const AttributeTable& attributes) {
  if (spec.name.empty()) throw Error(ErrorCode::invalid_argument, "model without a name");
  if (spec.lags < 1) throw Error(ErrorCode::invalid_argument, "model " + spec.name + ": lags must be >= 1");
  if (spec.beta_grid.empty()) throw Error(ErrorCode::invalid_argument, "model " + spec.name + ": empty beta grid");
  for (double b : spec.beta_grid) {
    if (!(b > 0.0) || b > 1.0) throw Error(ErrorCode::invalid_argument, "model " + spec.name + ": beta outside (0, 1]");
  }
  if (spec.habits == HabitSelection::named) {
    if (spec.representation == Representation::goods) {
      throw Error(ErrorCode::invalid_argument, "model " + spec.name + ": named habits need the characteristics representation");
    }
    for (const auto& n : spec.habit_attributes) attributes.index_of(n);
  }
  if (!spec.lifecycle && (spec.representation != Representation::goods || spec.habits != HabitSelection::none)) {
    throw Error(ErrorCode::invalid_argument, "model " + spec.name + ": GARP is defined on goods without habits");
  }
}

Technology resolve_technology(const ModelSpec& spec, const AttributeTable& attributes) {
  validate_model(spec, attributes);
  if (spec.representation == Representation::goods) {
    return Technology::identity(attributes.loadings.cols(), spec.habits == HabitSelection::all, spec.lags);
  }
  std::vector<Index> rows;
  if (spec.habits == HabitSelection::all) {
    for (Index j = 0; j < attributes.loadings.rows(); ++j) rows.push_back(j);
  } else if (spec.habits == HabitSelection::named) {
    for (const auto& n : spec.habit_attributes) rows.push_back(attributes.index_of(n));
  }
  return Technology(attributes.loadings, rows, spec.lags);
}

// ---------------------------------------------------------------------------

namespace {

void require_three(const HouseholdPanel& panel) {
  if (panel.period_count() < 3) {
    throw Error(ErrorCode::too_few_periods, "need at least 3 periods, have " + std::to_string(panel.period_count()));
  }
}

double scale_of(const HouseholdPanel& panel) {
  const double m = panel.mean_active_price();
  return m > 0.0 ? 1.0 / m : 1.0;
}

// Affine expression: constant + sum coef * var.
struct Affine {
  double constant = 0.0;
  Index var = -1;
};

}  // namespace

TestOutcome test_goods_corollary(const HouseholdPanel& panel, std::span<const Index> habit_goods,
                                 std::span<const double> grid, const EngineOptions& options) {
  require_three(panel);
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "beta grid is empty");
  const Index periods = panel.period_count();
  const Index k_count = panel.goods_count();
  std::vector<bool> is_habit(static_cast<std::size_t>(k_count), false);
  for (Index k : habit_goods) {
    if (k < 0 || k >= k_count) throw Error(ErrorCode::invalid_argument, "habit good out of range");
    is_habit[static_cast<std::size_t>(k)] = true;
  }
  std::vector<Index> habit_list(habit_goods.begin(), habit_goods.end());
  std::sort(habit_list.begin(), habit_list.end());
  const Index h_count = static_cast<Index>(habit_list.size());
  const double scale = scale_of(panel);
  const bool free = !options.nonnegative_shadow_prices;

  auto is_equality = [&](Index t) { return t >= 1 && t <= periods - 2; };

  TestOutcome out;
  out.household_id = panel.household_id;
  out.model_id = "goods_corollary";
  out.structural = evaluate_structure(panel, Technology::identity(k_count, false), options.rank_tol);

  for (double beta : grid) {
    lp::Problem prob;
    // price[t][k]: the current-period shadow price of good k; lag[t][h]: rho^{a,1}_t.
    std::vector<std::vector<Affine>> price(static_cast<std::size_t>(periods), std::vector<Affine>(static_cast<std::size_t>(k_count)));
    std::vector<std::vector<Index>> lag(static_cast<std::size_t>(periods), std::vector<Index>(static_cast<std::size_t>(h_count), -1));
    std::vector<Index> value(static_cast<std::size_t>(periods), -1);

    for (Index t = 1; t < periods; ++t) {
      const Period& p = panel.periods[static_cast<std::size_t>(t)];
      value[static_cast<std::size_t>(t)] = prob.add_variable(true);
      for (Index k = 0; k < k_count; ++k) {
        Affine& a = price[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
        if (!is_habit[static_cast<std::size_t>(k)] && is_equality(t) && p.active(k)) {
          if (!p.has_price(k)) throw Error(ErrorCode::missing_active_price, "price missing for an active good");
          a.constant = p.prices(k) * scale;
        } else {
          a.var = prob.add_variable(free);
        }
      }
      for (Index h = 0; h < h_count; ++h) lag[static_cast<std::size_t>(t)][static_cast<std::size_t>(h)] = prob.add_variable(free);
    }

    for (Index t = 1; t <= periods - 2; ++t) {
      const Period& p = panel.periods[static_cast<std::size_t>(t)];
      for (Index k = 0; k < k_count; ++k) {
        const bool active = p.active(k);
        const bool habit = is_habit[static_cast<std::size_t>(k)];
        if (active && !habit) continue;  // substituted above
        if (!active && options.mode == PriceMode::missing_prices) continue;
        if (!p.has_price(k)) {
          throw Error(active ? ErrorCode::missing_active_price : ErrorCode::missing_price, "price missing");
        }
        const Index r = prob.add_constraint(active ? lp::Sense::equal : lp::Sense::less_equal, p.prices(k) * scale);
        prob.add_coefficient(r, price[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)].var, 1.0);
        if (habit) {
          const auto h = static_cast<std::size_t>(std::lower_bound(habit_list.begin(), habit_list.end(), k) - habit_list.begin());
          prob.add_coefficient(r, lag[static_cast<std::size_t>(t + 1)][h], 1.0);
        }
      }
    }

    // x_bar_t = (x_t, x_{t-1}^a).
    auto bar = [&](Index t) {
      Vector v(k_count + h_count);
      v.head(k_count) = panel.periods[static_cast<std::size_t>(t)].quantities;
      for (Index h = 0; h < h_count; ++h) {
        v(k_count + h) = panel.periods[static_cast<std::size_t>(t - 1)].quantities(habit_list[static_cast<std::size_t>(h)]);
      }
      return v;
    };
    for (Index t = 1; t < periods; ++t) {
      const double f = std::pow(beta, -static_cast<double>(t));
      const Vector bt = bar(t);
      for (Index s = 1; s < periods; ++s) {
        if (s == t) continue;
        const Vector dx = bar(s) - bt;
        double rhs = 0.0;
        for (Index k = 0; k < k_count; ++k) rhs += f * price[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)].constant * dx(k);
        const Index r = prob.add_constraint(lp::Sense::less_equal, rhs);
        prob.add_coefficient(r, value[static_cast<std::size_t>(s)], 1.0);
        prob.add_coefficient(r, value[static_cast<std::size_t>(t)], -1.0);
        for (Index k = 0; k < k_count; ++k) {
          const Index v = price[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)].var;
          if (v >= 0 && dx(k) != 0.0) prob.add_coefficient(r, v, -f * dx(k));
        }
        for (Index h = 0; h < h_count; ++h) {
          if (dx(k_count + h) != 0.0) prob.add_coefficient(r, lag[static_cast<std::size_t>(t)][static_cast<std::size_t>(h)], -f * dx(k_count + h));
        }
      }
    }

    lp::Options lo;
    lo.feasibility_tol = options.feasibility_tol;
    const lp::Result res = lp::solve(prob, lo);
    if (!res.feasible()) continue;
    out.admissible_betas.push_back(beta);
    if (out.certificate) continue;

    Certificate cert;
    cert.beta = beta;
    cert.contemporaneous.assign(static_cast<std::size_t>(periods), Vector::Zero(k_count));
    cert.habit.assign(1, std::vector<Vector>(static_cast<std::size_t>(periods + 1), Vector::Zero(h_count)));
    for (Index t = 1; t < periods; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      cert.dates.push_back(t);
      cert.values.push_back(res.x(value[ut]) / scale);
      cert.bundles.push_back(bar(t));
      for (Index k = 0; k < k_count; ++k) {
        const Affine& a = price[ut][static_cast<std::size_t>(k)];
        cert.contemporaneous[ut](k) = (a.var >= 0 ? res.x(a.var) : a.constant) / scale;
      }
      for (Index h = 0; h < h_count; ++h) cert.habit[0][ut](h) = res.x(lag[ut][static_cast<std::size_t>(h)]) / scale;
    }
    out.certificate = std::move(cert);
  }
  out.pass = !out.admissible_betas.empty();
  if (out.pass) out.ccei = 1.0;
  return out;
}

TestOutcome test_static_characteristics(const HouseholdPanel& panel, const Matrix& loadings,
                                        const EngineOptions& options) {
  require_three(panel);
  const Index periods = panel.period_count();
  const Index j = loadings.rows();
  if (loadings.cols() != panel.goods_count()) {
    throw Error(ErrorCode::dimension_mismatch, "loadings do not match the panel's goods");
  }
  const double scale = scale_of(panel);
  const bool free = !options.nonnegative_shadow_prices;

  TestOutcome out;
  out.household_id = panel.household_id;
  out.model_id = "static_characteristics";
  out.structural = evaluate_structure(panel, Technology(loadings, {}, 1), options.rank_tol);

  lp::Problem prob;
  std::vector<Index> value(static_cast<std::size_t>(periods), -1);
  std::vector<Index> pi(static_cast<std::size_t>(periods), -1);
  for (Index t = 1; t < periods; ++t) {
    value[static_cast<std::size_t>(t)] = prob.add_variable(true);
    pi[static_cast<std::size_t>(t)] = prob.variable_count();
    for (Index i = 0; i < j; ++i) prob.add_variable(free);
  }
  for (Index t = 1; t <= periods - 2; ++t) {
    const Period& p = panel.periods[static_cast<std::size_t>(t)];
    for (Index k = 0; k < panel.goods_count(); ++k) {
      const bool active = p.active(k);
      if (!active && options.mode == PriceMode::missing_prices) continue;
      if (!p.has_price(k)) {
        throw Error(active ? ErrorCode::missing_active_price : ErrorCode::missing_price, "price missing");
      }
      const Index r = prob.add_constraint(active ? lp::Sense::equal : lp::Sense::less_equal, p.prices(k) * scale);
      for (Index i = 0; i < j; ++i) {
        if (loadings(i, k) != 0.0) prob.add_coefficient(r, pi[static_cast<std::size_t>(t)] + i, loadings(i, k));
      }
    }
  }
  std::vector<Vector> z(static_cast<std::size_t>(periods));
  for (Index t = 0; t < periods; ++t) z[static_cast<std::size_t>(t)] = loadings * panel.periods[static_cast<std::size_t>(t)].quantities;
  for (Index t = 1; t < periods; ++t) {
    for (Index s = 1; s < periods; ++s) {
      if (s == t) continue;
      const Vector dz = z[static_cast<std::size_t>(s)] - z[static_cast<std::size_t>(t)];
      const Index r = prob.add_constraint(lp::Sense::less_equal, 0.0);
      prob.add_coefficient(r, value[static_cast<std::size_t>(s)], 1.0);
      prob.add_coefficient(r, value[static_cast<std::size_t>(t)], -1.0);
      for (Index i = 0; i < j; ++i) {
        if (dz(i) != 0.0) prob.add_coefficient(r, pi[static_cast<std::size_t>(t)] + i, -dz(i));
      }
    }
  }
  lp::Options lo;
  lo.feasibility_tol = options.feasibility_tol;
  const lp::Result res = lp::solve(prob, lo);
  out.pass = res.feasible();
  if (!out.pass) return out;

  out.admissible_betas = {1.0};
  out.ccei = 1.0;
  Certificate cert;
  cert.beta = 1.0;
  cert.contemporaneous.assign(static_cast<std::size_t>(periods), Vector::Zero(j));
  cert.habit.assign(1, std::vector<Vector>(static_cast<std::size_t>(periods + 1), Vector::Zero(0)));
  for (Index t = 1; t < periods; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    cert.dates.push_back(t);
    cert.values.push_back(res.x(value[ut]) / scale);
    cert.bundles.push_back(z[ut]);
    cert.contemporaneous[ut] = res.x.segment(pi[ut], j) / scale;
  }
  out.certificate = std::move(cert);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// cost[t][s] = rho_t' x_s, NaN when some good in x_s has no price at t.
std::vector<std::vector<double>> cost_table(const HouseholdPanel& panel) {
  const std::size_t n = panel.periods.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, std::nan("")));
  for (std::size_t t = 0; t < n; ++t) {
    const Period& pt = panel.periods[t];
    for (std::size_t s = 0; s < n; ++s) {
      const Period& ps = panel.periods[s];
      double c = 0.0;
      bool ok = true;
      for (Index k = 0; k < ps.quantities.size() && ok; ++k) {
        if (!ps.active(k)) continue;
        if (!pt.has_price(k)) {
          ok = false;
        } else {
          c += pt.prices(k) * ps.quantities(k);
        }
      }
      if (ok) cost[t][s] = c;
    }
  }
  return cost;
}

bool garp_at(const std::vector<std::vector<double>>& cost, double e) {
  const std::size_t n = cost.size();
  constexpr double kEps = 1e-12;
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      const double own = cost[t][t];
      if (std::isnan(cost[t][s])) continue;
      reach[t][s] = e * own >= cost[t][s] - kEps * std::max(1.0, own) ? 1 : 0;
    }
  }
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t a = 0; a < n; ++a) {
      if (!reach[a][m]) continue;
      for (std::size_t b = 0; b < n; ++b) reach[a][b] = reach[a][b] || reach[m][b];
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      if (!reach[t][s] || std::isnan(cost[s][t])) continue;
      const double own = cost[s][s];
      if (e * own > cost[s][t] + kEps * std::max(1.0, own)) return false;
    }
  }
  return true;
}

}  // namespace

bool test_garp_goods(const HouseholdPanel& panel) { return garp_at(cost_table(panel), 1.0); }

double garp_efficiency(const HouseholdPanel& panel, double tol) {
  const auto cost = cost_table(panel);
  if (garp_at(cost, 1.0)) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (garp_at(cost, mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

TestOutcome run_model(const HouseholdPanel& panel, const ModelSpec& spec, const AttributeTable& attributes,
                      const EngineOptions& base, bool with_ccei) {
  EngineOptions options = base;
  options.mode = spec.mode;
  if (!spec.lifecycle) {
    validate_model(spec, attributes);
    TestOutcome out;
    out.household_id = panel.household_id;
    out.model_id = spec.name;
    out.structural = evaluate_structure(panel, Technology::identity(panel.goods_count(), false), options.rank_tol);
    out.pass = test_garp_goods(panel);
    if (out.pass) {
      out.admissible_betas = {1.0};
      out.ccei = 1.0;
    } else if (with_ccei) {
      out.ccei = garp_efficiency(panel, options.ccei_tol);
    }
    return out;
  }
  const Technology tech = resolve_technology(spec, attributes);
  TestOutcome out = run_dynamic_test(panel, tech, spec.beta_grid, options, with_ccei);
  out.model_id = spec.name;
  return out;
}

}  // namespace habitlens
