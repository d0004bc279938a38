#include "habitlens/synth.hpp"

#include "habitlens/error.hpp"
#include "habitlens/structural.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace habitlens {

namespace {

using Rng = std::mt19937_64;

constexpr double kMinPrice = 1e-3;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

Vector draw_bundle(Rng& rng, Index goods, Index active, int max_units) {
  std::vector<Index> order(static_cast<std::size_t>(goods));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Vector x = Vector::Zero(goods);
  for (Index i = 0; i < active; ++i) {
    x(order[static_cast<std::size_t>(i)]) = static_cast<double>(uniform_index(rng, 1, max_units));
  }
  return x;
}

// Lag block l (0 = contemporaneous) of a stacked vector.
Vector block(const Vector& stacked, Index j, Index j2, int l) {
  return l == 0 ? Vector(stacked.head(j)) : Vector(stacked.segment(j + (l - 1) * j2, j2));
}

struct Draw {
  std::vector<Vector> bundles;  // index i = observed t + L
  std::vector<Vector> gradient; // pi~ at index i (undefined for i < L)
  std::vector<Vector> z;
};

Period make_period(const Vector& x, const Vector& prices, Index t) {
  Period p;
  p.quantities = x;
  p.prices = prices;
  p.expenditure = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    if (x(k) > 0.0) p.expenditure += prices(k) * x(k);
  }
  p.first_day = Day{std::chrono::days{7 * t}};
  p.last_day = p.first_day;
  return p;
}

// Core generator: `forced_active[t] > 0` fixes the active-set size at
// observed date t; `swap_pair` exchanges the gradients at observed dates 1, 2.
std::optional<GeneratedPanel> attempt(const GeneratorConfig& cfg, const Technology& tech, const Matrix& q,
                                      const Vector& b, Rng& rng, const std::vector<Index>& forced_active,
                                      bool swap_pair) {
  const int lags = tech.lags();
  const Index periods = cfg.periods;
  const Index k = tech.goods_count();
  const Index j = tech.characteristic_count();
  const Index j2 = tech.habit_count();
  const Index n = periods + 2 * lags;

  Draw d;
  for (Index i = 0; i < n; ++i) {
    const Index t = i - lags;
    Index active = uniform_index(rng, std::min(cfg.min_active, k), std::min(cfg.max_active, k));
    if (t >= 0 && t < periods && forced_active[static_cast<std::size_t>(t)] > 0) {
      active = forced_active[static_cast<std::size_t>(t)];
    }
    Vector x = draw_bundle(rng, k, active, cfg.max_units);
    if (t == periods - 1 && x.maxCoeff() < 2.0) {
      // The last period must be splittable across two purchase days.
      for (Index g = 0; g < k; ++g) {
        if (x(g) > 0.0) {
          x(g) = 2.0;
          break;
        }
      }
    }
    d.bundles.push_back(std::move(x));
  }
  d.z.resize(static_cast<std::size_t>(n));
  d.gradient.resize(static_cast<std::size_t>(n));
  for (Index i = lags; i < n; ++i) {
    std::vector<Vector> window;
    for (int l = 0; l <= lags; ++l) window.push_back(d.bundles[static_cast<std::size_t>(i - l)]);
    d.z[static_cast<std::size_t>(i)] = augmented_bundle(tech, window);
    d.gradient[static_cast<std::size_t>(i)] = b - q * d.z[static_cast<std::size_t>(i)];
  }
  if (swap_pair) std::swap(d.gradient[static_cast<std::size_t>(lags + 1)], d.gradient[static_cast<std::size_t>(lags + 2)]);

  const Matrix& a = tech.loadings();
  const Matrix aa = tech.habit_loadings();
  auto disc = [&](Index t) { return std::pow(cfg.beta, static_cast<double>(t)); };

  GeneratedPanel out;
  out.technology = tech;
  out.panel.household_id = "synthetic";
  for (Index t = 0; t < periods; ++t) {
    const Index i = t + lags;
    Vector implied = a.transpose() * (disc(t) * block(d.gradient[static_cast<std::size_t>(i)], j, j2, 0));
    for (int l = 1; l <= lags; ++l) {
      implied += aa.transpose() * (disc(t + l) * block(d.gradient[static_cast<std::size_t>(i + l)], j, j2, l));
    }
    const Vector& x = d.bundles[static_cast<std::size_t>(i)];
    Vector prices = Vector::Constant(k, kMissingPrice);
    for (Index g = 0; g < k; ++g) {
      if (x(g) > 0.0) {
        if (!(implied(g) > kMinPrice)) return std::nullopt;
        prices(g) = implied(g);
      } else if (cfg.mode == PriceMode::full_prices) {
        prices(g) = std::max(implied(g), kMinPrice) + uniform(rng, 0.05, 0.5);
      }
    }
    out.panel.periods.push_back(make_period(x, prices, t));
  }

  if (!swap_pair) {
    Certificate cert;
    cert.beta = cfg.beta;
    cert.contemporaneous.assign(static_cast<std::size_t>(periods), Vector::Zero(j));
    cert.habit.assign(static_cast<std::size_t>(lags),
                      std::vector<Vector>(static_cast<std::size_t>(periods + lags), Vector::Zero(j2)));
    for (Index t = 0; t < periods; ++t) {
      const Vector& g = d.gradient[static_cast<std::size_t>(t + lags)];
      cert.contemporaneous[static_cast<std::size_t>(t)] = disc(t) * block(g, j, j2, 0);
      for (int l = 1; l <= lags; ++l) cert.habit[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(t)] = disc(t) * block(g, j, j2, l);
    }
    for (Index t : retained_dates(periods, lags)) {
      const Vector& z = d.z[static_cast<std::size_t>(t + lags)];
      cert.dates.push_back(t);
      cert.bundles.push_back(z);
      cert.values.push_back(b.dot(z) - 0.5 * z.dot(q * z));
    }
    out.certificate = std::move(cert);
  }
  return out;
}

struct Potential {
  Matrix q;
  Vector b;
};

Potential make_potential(const GeneratorConfig& cfg, const Technology& tech, Rng& rng) {
  const Index d = tech.augmented_size();
  const Index j = tech.characteristic_count();
  Potential p;
  if (cfg.q) {
    if (cfg.q->rows() != d || cfg.q->cols() != d) throw Error(ErrorCode::dimension_mismatch, "Q has the wrong size");
    p.q = *cfg.q;
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(d, d);
    for (Index r = 0; r < d; ++r) {
      for (Index c = 0; c < d; ++c) m(r, c) = normal(rng);
    }
    p.q = cfg.curvature * (m * m.transpose() / static_cast<double>(d) + 0.1 * Matrix::Identity(d, d));
  }
  if (cfg.b) {
    if (cfg.b->size() != d) throw Error(ErrorCode::dimension_mismatch, "b has the wrong size");
    p.b = *cfg.b;
  } else {
    p.b.resize(d);
    for (Index r = 0; r < d; ++r) p.b(r) = r < j ? uniform(rng, 1.0, 2.0) : uniform(rng, -0.2, 0.2);
  }
  return p;
}

Rng seeded(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x68616269u};
  return Rng(seq);
}

Technology check_tech(const GeneratorConfig& cfg, const Technology& tech) {
  if (tech.goods_count() != cfg.goods) throw Error(ErrorCode::dimension_mismatch, "technology goods count differs from cfg.goods");
  return tech;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (goods < 1 || characteristics < 1) throw Error(ErrorCode::invalid_argument, "need K >= 1 and J >= 1");
  if (habit_count < 0 || habit_count > characteristics) throw Error(ErrorCode::invalid_argument, "need 0 <= J2 <= J");
  if (lags < 1) throw Error(ErrorCode::invalid_argument, "need L >= 1");
  if (lags >= 1 && periods < 2 * lags + 1) throw Error(ErrorCode::too_few_periods, "need T >= 2L + 1");
  if (!(beta > 0.0) || beta > 1.0) throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1]");
  if (min_active < 1 || max_active < min_active) throw Error(ErrorCode::invalid_argument, "bad active-set range");
  if (max_units < 1) throw Error(ErrorCode::invalid_argument, "max_units must be >= 1");
  if (curvature < 0.0) throw Error(ErrorCode::invalid_argument, "curvature must be nonnegative");
}

Technology random_technology(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng = seeded(cfg.seed ^ 0x7465636868ull);
  Matrix a(cfg.characteristics, cfg.goods);
  for (Index c = 0; c < cfg.goods; ++c) {
    for (Index r = 0; r < cfg.characteristics; ++r) a(r, c) = uniform(rng, 0.0, 1.0) < 0.2 ? 0.0 : uniform(rng, 0.1, 1.0);
    if (a.col(c).maxCoeff() == 0.0) a(uniform_index(rng, 0, cfg.characteristics - 1), c) = uniform(rng, 0.1, 1.0);
  }
  std::vector<Index> rows(static_cast<std::size_t>(cfg.characteristics));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(static_cast<std::size_t>(cfg.habit_count));
  std::sort(rows.begin(), rows.end());
  return Technology(a, rows, cfg.lags);
}

GeneratedPanel generate_rationalisable(const GeneratorConfig& cfg) {
  return generate_rationalisable(cfg, random_technology(cfg));
}

GeneratedPanel generate_rationalisable(const GeneratorConfig& cfg, const Technology& tech) {
  cfg.validate();
  check_tech(cfg, tech);
  Rng rng = seeded(cfg.seed);
  const Potential pot = make_potential(cfg, tech, rng);
  const std::vector<Index> forced(static_cast<std::size_t>(cfg.periods), 0);
  for (int a = 0; a < cfg.max_attempts; ++a) {
    if (auto out = attempt(cfg, tech, pot.q, pot.b, rng, forced, false)) return std::move(*out);
  }
  throw Error(ErrorCode::generator_stuck, "no draw with positive active prices; reduce the curvature");
}

GeneratedPanel generate_structural_violation(const GeneratorConfig& cfg, double delta, std::vector<Index> dates) {
  return generate_structural_violation(cfg, random_technology(cfg), delta, std::move(dates));
}

GeneratedPanel generate_structural_violation(const GeneratorConfig& cfg, const Technology& tech, double delta,
                                             std::vector<Index> dates) {
  cfg.validate();
  check_tech(cfg, tech);
  if (delta < 0.0) throw Error(ErrorCode::invalid_argument, "delta must be nonnegative");
  if (dates.empty()) dates.push_back(1);
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
  const auto eq = equality_dates(cfg.periods, tech.lags());
  for (Index t : dates) {
    if (!std::binary_search(eq.begin(), eq.end(), t)) {
      throw Error(ErrorCode::invalid_argument, "injected date " + std::to_string(t + 1) + " carries no pricing equality");
    }
  }
  const Index wanted = tech.characteristic_count() + 1;
  if (wanted > tech.goods_count()) {
    throw Error(ErrorCode::cannot_violate, "the hedonic span is full: at most J goods can be active");
  }

  Rng rng = seeded(cfg.seed);
  const Potential pot = make_potential(cfg, tech, rng);
  std::vector<Index> forced(static_cast<std::size_t>(cfg.periods), 0);
  for (Index t : dates) forced[static_cast<std::size_t>(t)] = wanted;
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int a = 0; a < cfg.max_attempts; ++a) {
    auto out = attempt(cfg, tech, pot.q, pot.b, rng, forced, false);
    if (!out) continue;
    bool ok = true;
    for (Index t : dates) {
      Period& p = out->panel.periods[static_cast<std::size_t>(t)];
      const ActiveSlice slice = active_slice(tech, p.quantities, p.prices);
      Eigen::JacobiSVD<Matrix> svd(slice.contemporaneous.transpose(), Eigen::ComputeFullU);
      const Index r = numerical_rank(slice.contemporaneous.transpose());
      const Index kp = slice.active_count();
      if (r >= kp) throw Error(ErrorCode::cannot_violate, "the hedonic span is full at the injected date");
      const Matrix complement = svd.matrixU().rightCols(kp - r);
      Vector w(kp - r);
      for (Index i = 0; i < w.size(); ++i) w(i) = normal(rng);
      const Vector dir = complement * w.normalized();
      const Vector shifted = slice.prices + delta * slice.prices.norm() * dir;
      if (shifted.minCoeff() <= kMinPrice) {
        ok = false;
        break;
      }
      for (std::size_t i = 0; i < slice.goods.size(); ++i) p.prices(slice.goods[i]) = shifted(static_cast<Index>(i));
      p = make_period(p.quantities, p.prices, t);
    }
    if (!ok) continue;
    if (delta > 0.0) out->certificate.reset();
    out->injected_dates = dates;
    return std::move(*out);
  }
  throw Error(ErrorCode::generator_stuck, "no admissible structural violation found");
}

GeneratedPanel generate_behavioural_violation(const GeneratorConfig& cfg_in, std::span<const double> grid) {
  GeneratorConfig cfg = cfg_in;
  cfg.habit_count = 0;
  cfg.validate();
  return generate_behavioural_violation(cfg, random_technology(cfg), grid);
}

GeneratedPanel generate_behavioural_violation(const GeneratorConfig& cfg_in, const Technology& tech,
                                              std::span<const double> grid) {
  GeneratorConfig cfg = cfg_in;
  cfg.habit_count = 0;
  cfg.validate();
  if (tech.habit_count() != 0) throw Error(ErrorCode::invalid_argument, "a behavioural violation needs J2 = 0");
  if (tech.goods_count() != cfg.goods || tech.characteristic_count() != cfg.characteristics) {
    throw Error(ErrorCode::dimension_mismatch, "technology does not match the generator dimensions");
  }
  if (cfg.periods < 4) throw Error(ErrorCode::too_few_periods, "a behavioural violation needs T >= 4");
  if (cfg.goods < cfg.characteristics) throw Error(ErrorCode::cannot_violate, "need K >= J to pin down shadow prices");
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "beta grid is empty");

  Rng rng = seeded(cfg.seed);
  const Index j = tech.characteristic_count();
  std::vector<Index> forced(static_cast<std::size_t>(cfg.periods), 0);
  forced[1] = forced[2] = j;

  for (int a = 0; a < cfg.max_attempts; ++a) {
    // A stronger curvature makes the swapped cycle clearly negative.
    GeneratorConfig strong = cfg;
    if (!strong.q) strong.curvature = cfg.curvature * 10.0;
    const Potential pot = make_potential(strong, tech, rng);
    auto out = attempt(cfg, tech, pot.q, pot.b, rng, forced, true);
    if (!out) continue;
    bool full_rank = true;
    for (Index t : {Index{1}, Index{2}}) {
      const Period& p = out->panel.periods[static_cast<std::size_t>(t)];
      const ActiveSlice slice = active_slice(tech, p.quantities, p.prices);
      full_rank = full_rank && numerical_rank(slice.contemporaneous) == j;
    }
    if (!full_rank) continue;
    const TestOutcome res = run_dynamic_test(out->panel, tech, grid, {}, false);
    if (res.pass || !res.structural.nc_all_pass()) continue;
    out->certificate.reset();
    out->injected_dates = {1, 2};
    return std::move(*out);
  }
  throw Error(ErrorCode::generator_stuck, "no behavioural violation found");
}

HouseholdPanel generate_garp_violation(std::uint64_t seed, Index goods) {
  if (goods < 2) throw Error(ErrorCode::invalid_argument, "a GARP violation needs at least two goods");
  Rng rng = seeded(seed);
  const double s1 = uniform(rng, 0.5, 2.0);
  const double s2 = uniform(rng, 0.5, 2.0);
  // rho_1 = (2,1), x_1 = (2,1); rho_2 = (1,2), x_2 = (1,2): x_1 R x_2 and x_2 P x_1.
  auto vec = [&](double a, double b) {
    Vector v = Vector::Zero(goods);
    v(0) = a;
    v(1) = b;
    return v;
  };
  auto prices = [&](double a, double b) {
    Vector v = Vector::Constant(goods, kMissingPrice);
    v(0) = a;
    v(1) = b;
    return v;
  };
  HouseholdPanel panel;
  panel.household_id = "garp_violation";
  panel.periods.push_back(make_period(vec(2, 1), prices(2 * s1, s1), 0));
  panel.periods.push_back(make_period(vec(1, 2), prices(s2, 2 * s2), 1));
  panel.periods.push_back(make_period(vec(2, 1), prices(2 * s1, s1), 2));
  return panel;
}

std::vector<std::string> default_attribute_names(Index count) {
  static const char* base[] = {"sugar", "sodium", "fat", "fibre", "protein"};
  std::vector<std::string> out;
  for (Index i = 0; i < count; ++i) out.push_back(i < 5 ? std::string(base[i]) : "attr" + std::to_string(i + 1));
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string iso(Day d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string good_id(Index k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%03ld", static_cast<long>(k + 1));
  return buf;
}

std::ofstream open(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_error, "cannot write " + p.string());
  return f;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, std::span<const HouseholdPanel> panels, const Technology& tech,
                   const std::vector<std::string>& attribute_names, int gap_days) {
  if (static_cast<Index>(attribute_names.size()) != tech.characteristic_count()) {
    throw Error(ErrorCode::dimension_mismatch, "one attribute name per characteristic is required");
  }
  if (gap_days < 1) throw Error(ErrorCode::invalid_argument, "gap must be at least one day");
  std::filesystem::create_directories(dir);
  const Day start{std::chrono::year{2020} / 1 / 6};
  Day last = start;

  {
    auto f = open(dir / "purchases.csv");
    f << "household_id,date,good_id,units,expenditure\n";
    for (const auto& panel : panels) {
      const Index periods = panel.period_count();
      auto emit = [&](Index day_index, Index k, double units, double price) {
        const Day d = start + std::chrono::days{day_index * gap_days};
        last = std::max(last, d);
        f << panel.household_id << ',' << iso(d) << ',' << good_id(k) << ',' << static_cast<long>(units) << ','
          << fmt(units * price) << '\n';
      };
      for (Index t = 0; t < periods; ++t) {
        const Period& p = panel.periods[static_cast<std::size_t>(t)];
        if (t + 1 < periods) {
          for (Index k : p.active_set()) emit(t, k, p.quantities(k), p.prices(k));
          continue;
        }
        // Split the last period so that the final purchase day is T * gap.
        const auto active = p.active_set();
        Index split = -1;
        for (Index k : active) {
          if (p.quantities(k) >= 2.0) {
            split = k;
            break;
          }
        }
        if (split >= 0) {
          for (Index k : active) emit(t, k, k == split ? p.quantities(k) - 1.0 : p.quantities(k), p.prices(k));
          emit(t + 1, split, 1.0, p.prices(split));
        } else if (active.size() >= 2) {
          for (std::size_t i = 0; i + 1 < active.size(); ++i) emit(t, active[i], p.quantities(active[i]), p.prices(active[i]));
          emit(t + 1, active.back(), p.quantities(active.back()), p.prices(active.back()));
        } else {
          throw Error(ErrorCode::invalid_argument, "last period of " + panel.household_id + " cannot be split");
        }
      }
    }
  }
  {
    auto f = open(dir / "characteristics.csv");
    f << "good_id";
    for (const auto& n : attribute_names) f << ',' << n;
    f << '\n';
    for (Index k = 0; k < tech.goods_count(); ++k) {
      f << good_id(k);
      for (Index j = 0; j < tech.characteristic_count(); ++j) f << ',' << fmt(tech.loadings()(j, k));
      f << '\n';
    }
  }
  {
    nlohmann::json j;
    j["attributes"] = attribute_names;
    std::vector<std::string> habits;
    for (Index r : tech.habit_rows()) habits.push_back(attribute_names[static_cast<std::size_t>(r)]);
    j["habit_attributes"] = habits;
    j["lags"] = tech.lags();
    j["matrix_source"] = "characteristics.csv";
    auto f = open(dir / "technology.json");
    f << j.dump(2) << '\n';
  }
  {
    auto f = open(dir / "rates.csv");
    f << "month,rate\n";
    using std::chrono::months;
    const std::chrono::year_month_day a{start};
    const std::chrono::year_month_day b{last};
    for (auto m = a.year() / a.month(); m <= b.year() / b.month(); m += months{1}) {
      f << month_key(std::chrono::sys_days{m / std::chrono::day{1}}) << ",0\n";
    }
  }
}

}  // namespace habitlens
