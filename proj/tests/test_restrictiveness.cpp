#include "habitlens/error.hpp"
#include "habitlens/restrictiveness.hpp"
#include "habitlens/synth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace habitlens;
using namespace habitlens::testing;

namespace {

struct Fixture {
  Technology tech;
  std::vector<HouseholdPanel> panels;
  AttributeTable attrs;
};

Fixture make_fixture(Index households, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.goods = 8;
  cfg.characteristics = 3;
  cfg.habit_count = 2;
  cfg.periods = 6;
  cfg.seed = seed;
  Fixture f;
  f.tech = random_technology(cfg);
  for (Index h = 0; h < households; ++h) {
    cfg.seed = seed * 1000 + static_cast<std::uint64_t>(h);
    HouseholdPanel p = generate_rationalisable(cfg, f.tech).panel;
    p.household_id = "hh" + std::to_string(h);
    f.panels.push_back(std::move(p));
  }
  f.attrs = AttributeTable{default_attribute_names(3), f.tech.loadings()};
  return f;
}

}  // namespace

TEST(Perturb, KeepsZeroPatternAndMatchesExpenditurePerPeriod) {
  const Fixture f = make_fixture(3, 1);
  PerturbConfig cfg;
  cfg.seed = 7;
  for (const auto& panel : f.panels) {
    for (Index m = 0; m < 20; ++m) {
      const HouseholdPanel sim = perturb(panel, cfg, m);
      ASSERT_EQ(sim.period_count(), panel.period_count());
      for (std::size_t t = 0; t < panel.periods.size(); ++t) {
        const Period& a = panel.periods[t];
        const Period& b = sim.periods[t];
        double spend = 0.0;
        for (Index k = 0; k < a.quantities.size(); ++k) {
          EXPECT_EQ(a.active(k), b.active(k));
          if (b.active(k)) {
            EXPECT_GT(b.quantities(k), 0.0);
            spend += b.prices(k) * b.quantities(k);
          }
        }
        EXPECT_NEAR(spend, a.expenditure, 1e-9 * a.expenditure);
        EXPECT_NEAR(b.expenditure, a.expenditure, 1e-9 * a.expenditure);
      }
    }
  }
}

TEST(Perturb, PricesStayInThePooledBand) {
  const Fixture f = make_fixture(1, 2);
  const HouseholdPanel& panel = f.panels[0];
  PerturbConfig cfg;
  const Index k_count = panel.goods_count();
  Vector lo = Vector::Constant(k_count, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const auto& p : panel.periods) {
    for (Index k = 0; k < k_count; ++k) {
      if (p.active(k)) {
        lo(k) = std::min(lo(k), p.prices(k));
        hi(k) = std::max(hi(k), p.prices(k));
      }
    }
  }
  // Sample mean of each price against the midpoint of its band.
  Vector sum = Vector::Zero(k_count);
  Vector count = Vector::Zero(k_count);
  for (Index m = 0; m < 2000; ++m) {
    const HouseholdPanel sim = perturb(panel, cfg, m);
    for (const auto& p : sim.periods) {
      for (Index k = 0; k < k_count; ++k) {
        if (!p.active(k)) continue;
        EXPECT_GE(p.prices(k), 0.8 * lo(k));
        EXPECT_LE(p.prices(k), 1.2 * hi(k));
        sum(k) += p.prices(k);
        count(k) += 1.0;
      }
    }
  }
  for (Index k = 0; k < k_count; ++k) {
    if (count(k) < 2000) continue;
    const double width = 1.2 * hi(k) - 0.8 * lo(k);
    // Five standard errors of a uniform mean.
    EXPECT_NEAR(sum(k) / count(k), 0.5 * (0.8 * lo(k) + 1.2 * hi(k)), 5.0 * width / std::sqrt(12.0 * count(k)));
  }
}

TEST(Perturb, TotalMatchKeepsOnlyTheSum) {
  const Fixture f = make_fixture(2, 3);
  PerturbConfig cfg;
  cfg.match = ExpenditureMatch::total;
  for (const auto& panel : f.panels) {
    double obs = 0.0;
    for (const auto& p : panel.periods) obs += p.expenditure;
    bool some_period_moved = false;
    for (Index m = 0; m < 10; ++m) {
      const HouseholdPanel sim = perturb(panel, cfg, m);
      double total = 0.0;
      for (std::size_t t = 0; t < sim.periods.size(); ++t) {
        const Period& p = sim.periods[t];
        double spend = 0.0;
        for (Index k = 0; k < p.quantities.size(); ++k) {
          EXPECT_EQ(p.active(k), panel.periods[t].active(k));
          if (p.active(k)) spend += p.prices(k) * p.quantities(k);
        }
        EXPECT_NEAR(spend, p.expenditure, 1e-9 * spend);
        total += spend;
        some_period_moved = some_period_moved || std::abs(spend - panel.periods[t].expenditure) > 1e-6;
      }
      EXPECT_NEAR(total, obs, 1e-9 * obs);
    }
    EXPECT_TRUE(some_period_moved);
  }
}

TEST(Perturb, DeterministicPerHouseholdDrawAndSeed) {
  const Fixture f = make_fixture(2, 4);
  PerturbConfig cfg;
  cfg.seed = 99;
  const HouseholdPanel a = perturb(f.panels[0], cfg, 5);
  const HouseholdPanel b = perturb(f.panels[0], cfg, 5);
  const HouseholdPanel c = perturb(f.panels[0], cfg, 6);
  cfg.seed = 100;
  const HouseholdPanel d = perturb(f.panels[0], cfg, 5);
  for (std::size_t t = 0; t < a.periods.size(); ++t) {
    EXPECT_EQ(a.periods[t].quantities, b.periods[t].quantities);
    EXPECT_NE(a.periods[t].quantities, c.periods[t].quantities);
    EXPECT_NE(a.periods[t].quantities, d.periods[t].quantities);
  }
}

TEST(Perturb, RejectsBadConfig) {
  const Fixture f = make_fixture(1, 5);
  PerturbConfig cfg;
  cfg.price_lo = 1.3;
  EXPECT_THROW(perturb(f.panels[0], cfg, 0), Error);
  cfg = PerturbConfig{};
  cfg.dirichlet_alpha = 0.0;
  EXPECT_THROW(perturb(f.panels[0], cfg, 0), Error);
  cfg = PerturbConfig{};
  cfg.draws = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Quantiles, HandCounts) {
  const std::vector<double> d{0.05, 0.1, 0.2, 0.3};
  EXPECT_EQ(quantile_dist(0.1, d), 0.5);
  EXPECT_EQ(quantile_dist(0.0, d), 0.0);
  EXPECT_EQ(quantile_dist(1.0, d), 1.0);
  const std::vector<double> c{0.85, 0.9, 0.95};
  EXPECT_DOUBLE_EQ(quantile_ccei(0.9, c), 2.0 / 3.0);
  const std::vector<double> ties{0.9, 0.9, 0.9};
  EXPECT_EQ(quantile_ccei(0.9, ties), 1.0);
  EXPECT_EQ(quantile_dist(0.9, ties), 1.0);
  const std::vector<double> below{0.5, 0.7, 0.99};
  EXPECT_EQ(quantile_ccei(1.0, below), 0.0);
  const std::vector<double> one{0.4};
  EXPECT_EQ(quantile_dist(0.4, one), 1.0);
  EXPECT_EQ(quantile_dist(0.3, one), 0.0);
  EXPECT_THROW(quantile_dist(0.1, std::vector<double>{}), Error);
}

TEST(Quantiles, Monotone) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> sims(200);
  for (double& s : sims) s = u(rng);
  double prev_d = -1.0, prev_c = 2.0;
  for (double x = 0.0; x <= 1.0; x += 0.01) {
    const double qd = quantile_dist(x, sims);
    const double qc = quantile_ccei(x, sims);
    EXPECT_GE(qd, prev_d);
    EXPECT_LE(qc, prev_c);
    prev_d = qd;
    prev_c = qc;
  }
}

TEST(Report, SharedDistancesAcrossCharacteristicsModels) {
  const Fixture f = make_fixture(3, 6);
  const auto all = builtin_models();
  const std::vector<ModelSpec> models{find_model(all, "habits_chars"), find_model(all, "static_chars"),
                                      find_model(all, "habits_all_chars"), find_model(all, "habits_all_goods"),
                                      find_model(all, "static_goods")};
  PerturbConfig cfg;
  cfg.draws = 15;
  cfg.seed = 3;
  const RestrictivenessReport r = restrictiveness_report(f.panels, models, f.attrs, cfg, {}, 1);
  ASSERT_EQ(r.rows.size(), f.panels.size() * models.size());
  ASSERT_EQ(r.summary.size(), models.size());
  for (std::size_t h = 0; h < f.panels.size(); ++h) {
    const RestrictivenessRow& base = r.rows[h * models.size()];
    EXPECT_EQ(base.household_id, f.panels[h].household_id);
    for (std::size_t m = 1; m < 3; ++m) {
      const RestrictivenessRow& row = r.rows[h * models.size() + m];
      EXPECT_EQ(row.d_obs, base.d_obs);
      EXPECT_EQ(row.d_sim_mean, base.d_sim_mean);
      EXPECT_EQ(row.q_dist, base.q_dist);
    }
    for (std::size_t m = 3; m < 5; ++m) {
      const RestrictivenessRow& row = r.rows[h * models.size() + m];
      EXPECT_LE(row.d_obs, 1e-12);
      EXPECT_EQ(row.q_dist, 1.0);
    }
    // Observed rationalisable data.
    EXPECT_LE(base.d_obs, 1e-12);
    ASSERT_TRUE(base.ccei_obs.has_value());
    EXPECT_EQ(*base.ccei_obs, 1.0);
  }
}

TEST(Report, IdenticalAcrossRerunsAndThreadCounts) {
  const Fixture f = make_fixture(4, 7);
  const auto all = builtin_models();
  const std::vector<ModelSpec> models{find_model(all, "habits_chars"), find_model(all, "static_goods")};
  PerturbConfig cfg;
  cfg.draws = 10;
  cfg.seed = 11;
  const RestrictivenessReport a = restrictiveness_report(f.panels, models, f.attrs, cfg, {}, 1);
  const RestrictivenessReport b = restrictiveness_report(f.panels, models, f.attrs, cfg, {}, 3);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].household_id, b.rows[i].household_id);
    EXPECT_EQ(a.rows[i].model_id, b.rows[i].model_id);
    EXPECT_EQ(a.rows[i].d_sim_mean, b.rows[i].d_sim_mean);
    EXPECT_EQ(a.rows[i].q_dist, b.rows[i].q_dist);
    EXPECT_EQ(a.rows[i].q_ccei, b.rows[i].q_ccei);
    EXPECT_EQ(a.rows[i].ccei_sim_mean, b.rows[i].ccei_sim_mean);
  }
  // A household's draws do not depend on which other households are present.
  const std::vector<HouseholdPanel> alone{f.panels[2]};
  const RestrictivenessReport c = restrictiveness_report(alone, models, f.attrs, cfg, {}, 1);
  EXPECT_EQ(c.rows[0].d_sim_mean, a.rows[2 * models.size()].d_sim_mean);
  EXPECT_EQ(c.rows[0].q_ccei, a.rows[2 * models.size()].q_ccei);
}

TEST(Measure, AgreesWithDirectCalls) {
  const Fixture f = make_fixture(2, 8);
  const ModelSpec spec = find_model(builtin_models(), "habits_chars");
  const Technology tech = resolve_technology(spec, f.attrs);
  PerturbConfig cfg;
  for (Index m = 0; m < 5; ++m) {
    const HouseholdPanel sim = perturb(f.panels[0], cfg, m);
    const Discrepancy d = measure(sim, spec, f.attrs);
    EXPECT_EQ(d.distance, evaluate_structure(sim, tech).household_distance);
    const auto c = ccei(sim, tech, spec.beta_grid);
    EXPECT_EQ(d.ccei.has_value(), c.has_value());
    if (c) {
      EXPECT_NEAR(*d.ccei, *c, 1e-12);
    }
  }
}
