#pragma once

// File formats: purchases.csv, characteristics.csv, rates.csv,
// technology.json and models.json.

#include "habitlens/model_zoo.hpp"
#include "habitlens/panel.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace habitlens {

/// YYYY-MM-DD; throws ParseError.
Day parse_date(const std::string& text);
std::string format_date(Day day);

/// Inclusive date window "FROM:TO"; either side may be empty.
struct DateWindow {
  std::optional<Day> from;
  std::optional<Day> to;

  bool contains(Day d) const { return (!from || d >= *from) && (!to || d <= *to); }
};
DateWindow parse_window(const std::string& text);

/// Goods in file order with their attribute loadings.
struct GoodsCatalogue {
  std::vector<std::string> good_ids;
  std::map<std::string, Index> index;
  AttributeTable attributes;  // J x K, every attribute column of the file
};

GoodsCatalogue read_characteristics(const std::filesystem::path& file);

/// Events mapped to catalogue columns. Rows outside `window` are dropped. A
/// good without characteristics is an InvalidArgument error naming the good.
std::vector<PurchaseEvent> read_purchases(const std::filesystem::path& file, const GoodsCatalogue& goods,
                                          const DateWindow& window = {});

DiscountSeries read_rates(const std::filesystem::path& file);

struct TechnologyConfig {
  std::vector<std::string> attributes;
  std::vector<std::string> habit_attributes;
  int lags = 1;
  std::string matrix_source = "characteristics.csv";
};
TechnologyConfig read_technology_config(const std::filesystem::path& file);

/// Attribute table restricted to (and ordered as) config.attributes.
AttributeTable select_attributes(const GoodsCatalogue& goods, const TechnologyConfig& config);
/// Model that uses the configured habit attributes and lag length.
ModelSpec technology_model(const TechnologyConfig& config, std::string name = "technology");

/// {"models": [{"name", "representation", "habits", "lags", "lifecycle",
/// "beta_grid", "mode"}, ...]}; see the README for the field grammar.
std::vector<ModelSpec> read_models(const std::filesystem::path& file);
std::vector<ModelSpec> parse_models(const std::string& json_text);

struct IngestResult {
  std::vector<HouseholdPanel> panels;  // ascending household id
  std::vector<Excluded> excluded;
};

/// Groups events by household, builds periods, applies the present-value
/// conversion when `rates` is set and validates every panel.
IngestResult ingest(const std::vector<PurchaseEvent>& events, Index goods_count, Index min_periods,
                    const DiscountSeries* rates);

}  // namespace habitlens
