#include "habitlens/error.hpp"
#include "habitlens/stats_report.hpp"
#include "habitlens/synth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace habitlens;
using namespace habitlens::testing;

namespace {

// Two-sided exact binomial p-value with the pmf built by the multiplicative
// recurrence in long double.
long double mcnemar_oracle(long n01, long n10) {
  const long n = n01 + n10;
  if (n == 0) return 1.0L;
  const long k = std::min(n01, n10);
  long double pmf = std::pow(0.5L, static_cast<long double>(n));
  long double cdf = pmf;
  for (long i = 1; i <= k; ++i) {
    pmf *= static_cast<long double>(n - i + 1) / static_cast<long double>(i);
    cdf += pmf;
  }
  return std::min(1.0L, 2.0L * cdf);
}

TestOutcome outcome(const std::string& hh, const std::string& model, bool pass) {
  TestOutcome o;
  o.household_id = hh;
  o.model_id = model;
  o.pass = pass;
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("habitlens_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(McNemar, HandValues) {
  const double p53 = mcnemar_exact(53, 0);
  EXPECT_GE(p53, 2.2e-16);
  EXPECT_LE(p53, 2.3e-16);
  EXPECT_DOUBLE_EQ(mcnemar_exact(2, 0), 0.5);
  EXPECT_EQ(mcnemar_exact(0, 0), 1.0);
  EXPECT_EQ(mcnemar_exact(1, 1), 1.0);
  // 2 * (1 + 5) / 32.
  EXPECT_NEAR(mcnemar_exact(4, 1), 0.375, 1e-15);
  EXPECT_THROW(mcnemar_exact(-1, 2), Error);
}

TEST(McNemar, AgreesWithLongDoubleOracle) {
  for (long a = 0; a <= 60; ++a) {
    for (long b = 0; b <= 60; b += 3) {
      const double p = mcnemar_exact(a, b);
      const long double o = mcnemar_oracle(a, b);
      EXPECT_NEAR(p, static_cast<double>(o), 1e-12 * static_cast<double>(o) + 1e-300) << a << "," << b;
      EXPECT_EQ(p, mcnemar_exact(b, a));
    }
  }
  for (long a : {500L, 900L, 1248L}) {
    const long double o = mcnemar_oracle(a, 1000);
    EXPECT_NEAR(mcnemar_exact(a, 1000) / static_cast<double>(o), 1.0, 1e-9);
  }
}

TEST(McNemar, MonotoneInImbalance) {
  // Fixed n: p falls as the split becomes more lopsided.
  for (long n = 1; n <= 80; ++n) {
    double prev = 2.0;
    for (long k = n / 2; k >= 0; --k) {
      const double p = mcnemar_exact(k, n - k);
      EXPECT_LE(p, prev);
      EXPECT_GT(p, 0.0);
      prev = p;
    }
  }
}

TEST(Percentages, ExactHalfEvenRounding) {
  EXPECT_EQ(format_percentage(1248, 2282), "54.69");
  EXPECT_EQ(format_percentage(0, 17), "0.00");
  EXPECT_EQ(format_percentage(17, 17), "100.00");
  EXPECT_EQ(format_percentage(1, 800), "0.12");
  EXPECT_EQ(format_percentage(3, 800), "0.38");
  EXPECT_EQ(format_percentage(1, 32), "3.12");
  EXPECT_EQ(format_percentage(3, 32), "9.38");
  EXPECT_EQ(format_percentage(1, 3), "33.33");
  EXPECT_EQ(format_percentage(2, 3), "66.67");
  EXPECT_THROW(format_percentage(1, 0), Error);
}

TEST(PassRates, TableAndOrder) {
  std::vector<TestOutcome> outs;
  for (int h = 0; h < 4; ++h) {
    outs.push_back(outcome("h" + std::to_string(h), "b", h < 3));
    outs.push_back(outcome("h" + std::to_string(h), "a", h < 1));
  }
  const std::vector<std::string> order{"b"};
  const auto rows = pass_rate_table(outs, order);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].model_id, "b");
  EXPECT_EQ(rows[0].passed, 3);
  EXPECT_EQ(rows[0].percentage, "75.00");
  EXPECT_EQ(rows[1].model_id, "a");
  EXPECT_DOUBLE_EQ(rows[1].rate, 0.25);
  try {
    pass_rate_table(std::vector<TestOutcome>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_data);
  }
}

TEST(Compare, CountsSwitchersOverSharedHouseholds) {
  std::vector<TestOutcome> outs;
  // h0: F->P, h1: F->P, h2: P->F, h3: P->P, h4 only under m0.
  const bool m0[] = {false, false, true, true};
  const bool m1[] = {true, true, false, true};
  for (int h = 0; h < 4; ++h) {
    outs.push_back(outcome("h" + std::to_string(h), "m0", m0[h]));
    outs.push_back(outcome("h" + std::to_string(h), "m1", m1[h]));
  }
  outs.push_back(outcome("h4", "m0", true));
  const PairedComparison c = compare(outs, "m0", "m1");
  EXPECT_EQ(c.households, 4);
  EXPECT_EQ(c.pass0, 2);
  EXPECT_EQ(c.pass1, 3);
  EXPECT_EQ(c.n_01, 2);
  EXPECT_EQ(c.n_10, 1);
  EXPECT_EQ(c.switchers, 3);
  EXPECT_DOUBLE_EQ(c.p_value, mcnemar_exact(2, 1));
  EXPECT_THROW(compare(outs, "m0", "zz"), Error);
}

TEST(Json, OutcomeRoundTrip) {
  GeneratorConfig cfg;
  cfg.habit_count = 1;
  cfg.periods = 6;
  const GeneratedPanel g = generate_rationalisable(cfg);
  TestOutcome o = run_dynamic_test(g.panel, g.technology, default_beta_grid());
  o.household_id = "hh \"quoted\", with comma";
  o.model_id = "habits_chars";
  ASSERT_TRUE(o.certificate.has_value());
  const TestOutcome back = outcome_from_json(outcome_to_json(o));
  EXPECT_EQ(back.household_id, o.household_id);
  EXPECT_EQ(back.pass, o.pass);
  EXPECT_EQ(back.admissible_betas, o.admissible_betas);
  EXPECT_EQ(back.ccei, o.ccei);
  ASSERT_EQ(back.structural.dates.size(), o.structural.dates.size());
  for (std::size_t i = 0; i < o.structural.dates.size(); ++i) {
    EXPECT_EQ(back.structural.dates[i].period, o.structural.dates[i].period);
    EXPECT_EQ(back.structural.dates[i].distance, o.structural.dates[i].distance);
  }
  ASSERT_TRUE(back.certificate.has_value());
  EXPECT_EQ(back.certificate->dates, o.certificate->dates);
  EXPECT_EQ(back.certificate->values, o.certificate->values);
  // The parsed certificate still certifies the panel.
  EXPECT_LE(certificate_violation(g.panel, g.technology, *back.certificate), 1e-7);
  EXPECT_FALSE(outcome_from_json(outcome_to_json(o, false)).certificate.has_value());

  TestOutcome failed = outcome("x", "m", false);
  const TestOutcome fb = outcome_from_json(outcome_to_json(failed));
  EXPECT_FALSE(fb.ccei.has_value());
  EXPECT_THROW(outcome_from_json("{not json"), Error);
  EXPECT_THROW(outcome_from_json("{\"household_id\": \"x\"}"), Error);
}

TEST(Emit, HeaderOnlyFilesForEmptyInputs) {
  const auto dir = fresh_dir("emit_empty");
  emit_reports(dir, std::vector<TestOutcome>{}, std::vector<PairedComparison>{}, nullptr);
  EXPECT_EQ(slurp(dir / "pass_rates.csv"), "model_id,passed,households,pass_rate_pct\n");
  EXPECT_EQ(slurp(dir / "mcnemar.csv"),
            "model0,model1,households,pass0_pct,pass1_pct,delta_pp,n_01,n_10,switchers,p_value\n");
  EXPECT_EQ(slurp(dir / "outcomes.jsonl"), "");
  EXPECT_TRUE(std::filesystem::exists(dir / "restrictiveness.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "restrictiveness_households.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Emit, ByteIdenticalAndReadable) {
  std::vector<TestOutcome> outs;
  for (int h = 0; h < 6; ++h) {
    outs.push_back(outcome("h" + std::to_string(h), "m0", h % 2 == 0));
    outs.push_back(outcome("h" + std::to_string(h), "m1", h % 3 != 0));
  }
  const std::vector<PairedComparison> cmp{compare(outs, "m0", "m1")};
  const auto a = fresh_dir("emit_a");
  const auto b = fresh_dir("emit_b");
  emit_reports(a, outs, cmp, nullptr);
  emit_reports(b, outs, cmp, nullptr);
  for (const char* name : {"pass_rates.csv", "mcnemar.csv", "outcomes.jsonl", "restrictiveness.csv"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_EQ(slurp(a / "pass_rates.csv"),
            "model_id,passed,households,pass_rate_pct\nm0,3,6,50.00\nm1,4,6,66.67\n");
  const auto back = read_outcomes(a / "outcomes.jsonl");
  ASSERT_EQ(back.size(), outs.size());
  for (std::size_t i = 0; i < outs.size(); ++i) {
    EXPECT_EQ(back[i].household_id, outs[i].household_id);
    EXPECT_EQ(back[i].pass, outs[i].pass);
  }
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}
