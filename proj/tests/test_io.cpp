#include "habitlens/error.hpp"
#include "habitlens/io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>

using namespace habitlens;
using namespace habitlens::testing;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("habitlens_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  std::filesystem::path dir_;
};

std::string message_of(const std::function<void()>& f, ErrorCode* code = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (code) *code = e.code();
    return e.what();
  }
  return "";
}

const char* kChars = "good_id,sugar,sodium,fat\ng1,1,0,0.5\n\"g,2\",0,2,1\ng3,1,1,1\n";

}  // namespace

TEST(Dates, ParseAndFormat) {
  EXPECT_EQ(format_date(parse_date("2020-02-29")), "2020-02-29");
  EXPECT_THROW(parse_date("2021-02-29"), Error);
  EXPECT_THROW(parse_date("2021-2-01"), Error);
  EXPECT_THROW(parse_date("2021-01-01x"), Error);
  const DateWindow w = parse_window("2021-01-05:");
  EXPECT_TRUE(w.contains(parse_date("2021-01-05")));
  EXPECT_FALSE(w.contains(parse_date("2021-01-04")));
  const DateWindow closed = parse_window(":2021-03-01");
  EXPECT_TRUE(closed.contains(parse_date("2021-03-01")));
  EXPECT_FALSE(closed.contains(parse_date("2021-03-02")));
  EXPECT_THROW(parse_window("2021-01-01"), Error);
  EXPECT_THROW(parse_window("2021-02-01:2021-01-01"), Error);
}

TEST_F(IoTest, CharacteristicsWithQuotingBomAndCrlf) {
  const auto f = write("c.csv", "\xEF\xBB\xBFgood_id,sugar,sodium\r\ng1,1,2\r\n\"g \"\"x\"\"\",3,4\r\n");
  const GoodsCatalogue c = read_characteristics(f);
  EXPECT_EQ(c.good_ids, (std::vector<std::string>{"g1", "g \"x\""}));
  EXPECT_EQ(c.attributes.names, (std::vector<std::string>{"sugar", "sodium"}));
  EXPECT_EQ(c.attributes.loadings, mat({{1, 3}, {2, 4}}));
  EXPECT_EQ(c.index.at("g \"x\""), 1);
}

TEST_F(IoTest, CharacteristicsErrors) {
  ErrorCode code{};
  EXPECT_NE(message_of([&] { read_characteristics(write("a.csv", "id,sugar\ng1,1\n")); }, &code).find("good_id"),
            std::string::npos);
  EXPECT_EQ(code, ErrorCode::parse_error);
  const std::string dup = message_of([&] { read_characteristics(write("b.csv", "good_id,s\ng1,1\ng1,2\n")); });
  EXPECT_NE(dup.find(":3:"), std::string::npos);
  const std::string bad = message_of([&] { read_characteristics(write("c.csv", "good_id,s\ng1,abc\n")); });
  EXPECT_NE(bad.find(":2:"), std::string::npos);
  const std::string ragged = message_of([&] { read_characteristics(write("d.csv", "good_id,s,t\ng1,1\n")); });
  EXPECT_NE(ragged.find("expected 3 fields"), std::string::npos);
  EXPECT_THROW(read_characteristics(dir_ / "missing.csv"), Error);
}

TEST_F(IoTest, PurchasesMapToCatalogueAndWindow) {
  const GoodsCatalogue c = read_characteristics(write("c.csv", kChars));
  const auto p = write("p.csv",
                       "household_id,date,good_id,units,expenditure\n"
                       "h1,2021-01-01,g1,2,3.5\n"
                       "h1,2021-01-09,\"g,2\",1,1.25\n"
                       "h2,2021-02-01,g3,1,2\n");
  const auto all = read_purchases(p, c);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[1].good, 1);
  EXPECT_EQ(all[0].units, 2.0);
  EXPECT_EQ(all[0].expenditure, 3.5);
  const auto some = read_purchases(p, c, parse_window("2021-01-05:2021-01-31"));
  ASSERT_EQ(some.size(), 1u);
  EXPECT_EQ(some[0].household_id, "h1");
}

TEST_F(IoTest, PurchasesErrorsNameTheLine) {
  const GoodsCatalogue c = read_characteristics(write("c.csv", kChars));
  ErrorCode code{};
  std::string m = message_of(
      [&] {
        read_purchases(write("p.csv", "household_id,date,good_id,units,expenditure\nh1,2021-01-01,g9,1,1\n"), c);
      },
      &code);
  EXPECT_EQ(code, ErrorCode::invalid_argument);
  EXPECT_NE(m.find("g9"), std::string::npos);
  EXPECT_NE(m.find("p.csv:2:"), std::string::npos);
  m = message_of([&] {
    read_purchases(write("q.csv", "household_id,date,good_id,units,expenditure\nh1,2021-01-01,g1,1.5,1\n"), c);
  });
  EXPECT_NE(m.find(":2:"), std::string::npos);
  m = message_of([&] {
    read_purchases(write("r.csv", "household_id,date,good_id,units,expenditure\nh1,2021-01-01,g1,1,1\nh1,2021-13-01,g1,1,1\n"),
                   c);
  });
  EXPECT_NE(m.find(":3:"), std::string::npos);
  m = message_of([&] { read_purchases(write("s.csv", "household_id,date,units,expenditure\n"), c); });
  EXPECT_NE(m.find("good_id"), std::string::npos);
  EXPECT_THROW(
      read_purchases(write("t.csv", "household_id,date,good_id,units,expenditure\nh1,2021-01-01,g1,-1,1\n"), c), Error);
}

TEST_F(IoTest, Rates) {
  const DiscountSeries r = read_rates(write("r.csv", "month,rate\n2021-01,0.01\n2021-02,0\n"));
  EXPECT_EQ(r.monthly_rate.at("2021-01"), 0.01);
  EXPECT_EQ(r.monthly_rate.size(), 2u);
  EXPECT_THROW(read_rates(write("a.csv", "month,rate\n2021-01,0.01\n2021-01,0.02\n")), Error);
  EXPECT_THROW(read_rates(write("b.csv", "month,rate\n2021-13,0.01\n")), Error);
  EXPECT_THROW(read_rates(write("c.csv", "month,rate\n2021-01,-1\n")), Error);
}

TEST_F(IoTest, TechnologyConfig) {
  const GoodsCatalogue c = read_characteristics(write("c.csv", kChars));
  const TechnologyConfig t = read_technology_config(
      write("t.json", R"({"attributes": ["fat", "sugar"], "habit_attributes": ["sugar"], "lags": 2})"));
  EXPECT_EQ(t.lags, 2);
  const AttributeTable a = select_attributes(c, t);
  EXPECT_EQ(a.names, (std::vector<std::string>{"fat", "sugar"}));
  EXPECT_EQ(a.loadings, mat({{0.5, 1, 1}, {1, 0, 1}}));
  const ModelSpec m = technology_model(t);
  EXPECT_EQ(m.name, "technology");
  EXPECT_EQ(m.lags, 2);
  EXPECT_EQ(m.habit_attributes, (std::vector<std::string>{"sugar"}));
  const Technology tech = resolve_technology(m, a);
  EXPECT_EQ(tech.habit_rows(), (std::vector<Index>{1}));

  EXPECT_THROW(read_technology_config(write("u.json", R"({"attributes": []})")), Error);
  EXPECT_THROW(read_technology_config(write("v.json", R"({"attributes": ["a"], "habit_attributes": ["b"]})")), Error);
  EXPECT_THROW(read_technology_config(write("w.json", R"({"attributes": ["a"], "lags": 0})")), Error);
  EXPECT_THROW(read_technology_config(write("x.json", "{")), Error);
  EXPECT_THROW(select_attributes(c, read_technology_config(write("y.json", R"({"attributes": ["salt"]})"))), Error);
}

TEST(Models, JsonGrammar) {
  const auto models = parse_models(R"({"models": [
    {"name": "a", "habits": ["sugar"], "beta_grid": {"lo": 0.9, "hi": 1.0, "step": 0.05}},
    {"name": "b", "representation": "goods", "habits": "all", "lags": 2, "mode": "full_prices"},
    {"name": "c"},
    {"name": "d", "representation": "goods", "lifecycle": false, "beta_grid": [1.0]}
  ]})");
  ASSERT_EQ(models.size(), 4u);
  EXPECT_EQ(models[0].habits, HabitSelection::named);
  ASSERT_EQ(models[0].beta_grid.size(), 3u);
  EXPECT_NEAR(models[0].beta_grid[1], 0.95, 1e-12);
  EXPECT_EQ(models[1].representation, Representation::goods);
  EXPECT_EQ(models[1].habits, HabitSelection::all);
  EXPECT_EQ(models[1].lags, 2);
  EXPECT_EQ(models[1].mode, PriceMode::full_prices);
  EXPECT_EQ(models[1].beta_grid.size(), 51u);
  EXPECT_EQ(models[2].habits, HabitSelection::none);
  EXPECT_EQ(models[2].beta_grid, (std::vector<double>{1.0}));
  EXPECT_FALSE(models[3].lifecycle);

  EXPECT_THROW(parse_models(R"({"models": [{"representation": "goods"}]})"), Error);
  EXPECT_THROW(parse_models(R"({"models": [{"name": "x", "representation": "atoms"}]})"), Error);
  EXPECT_THROW(parse_models(R"({"models": [{"name": "x", "habits": "some"}]})"), Error);
  EXPECT_THROW(parse_models(R"({"models": [{"name": "x", "mode": "half"}]})"), Error);
  EXPECT_THROW(parse_models("[1, 2"), Error);
}

TEST_F(IoTest, IngestGroupsExcludesAndDiscounts) {
  const GoodsCatalogue c = read_characteristics(write("c.csv", kChars));
  const auto p = write("p.csv",
                       "household_id,date,good_id,units,expenditure\n"
                       "b,2021-01-01,g1,1,2\n"
                       "b,2021-01-08,g1,1,2\n"
                       "b,2021-01-15,g1,1,2\n"
                       "b,2021-01-22,g1,1,2\n"
                       "a,2021-01-01,g1,1,2\n"
                       "a,2021-01-11,g3,1,3\n"
                       "a,2021-01-21,g1,1,2\n"
                       "a,2021-01-31,g1,1,2\n"
                       "z,2021-01-01,g1,1,2\n");
  const auto events = read_purchases(p, c);
  const IngestResult r = ingest(events, 3, 3, nullptr);
  ASSERT_EQ(r.panels.size(), 2u);
  EXPECT_EQ(r.panels[0].household_id, "a");
  EXPECT_EQ(r.panels[0].period_count(), 3);
  EXPECT_EQ(r.panels[1].household_id, "b");
  ASSERT_EQ(r.excluded.size(), 1u);
  EXPECT_EQ(r.excluded[0].household_id, "z");

  DiscountSeries rates;
  rates.monthly_rate["2021-01"] = 0.0;
  const IngestResult pv = ingest(events, 3, 3, &rates);
  EXPECT_EQ(pv.panels[0].periods[2].prices(0), r.panels[0].periods[2].prices(0));
  DiscountSeries none;
  EXPECT_NO_THROW(ingest(events, 3, 3, &none));
  none.monthly_rate["2020-12"] = 0.0;
  EXPECT_NO_THROW(ingest(events, 3, 3, &none));
}
