#include "habitlens/io.hpp"

#include "habitlens/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace habitlens {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& file) : file_(file), in_(file, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::io_error, "cannot open " + file.string());
    std::vector<std::string> header;
    if (!next(header)) throw Error(ErrorCode::parse_error, where() + "missing header row");
    header_ = header;
  }

  const std::vector<std::string>& header() const { return header_; }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header_.begin(), header_.end(), name);
    if (it == header_.end()) throw Error(ErrorCode::parse_error, file_.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header_.begin());
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (trim(line).empty()) continue;
      fields = split_csv(line);
      if (!header_.empty() && fields.size() != header_.size()) {
        throw Error(ErrorCode::parse_error, where() + "expected " + std::to_string(header_.size()) + " fields, found " +
                                                std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  std::string where() const { return file_.string() + ":" + std::to_string(line_) + ": "; }

  double number(const std::string& text, const std::string& what) const {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (!text.empty() && *b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != e || !std::isfinite(v)) {
      throw Error(ErrorCode::parse_error, where() + "invalid " + what + " '" + text + "'");
    }
    return v;
  }

 private:
  std::filesystem::path file_;
  std::ifstream in_;
  std::vector<std::string> header_;
  long line_ = 0;
};

}  // namespace

Day parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || text[4] != '-' ||
      text[7] != '-') {
    throw Error(ErrorCode::parse_error, "invalid date '" + text + "' (expected YYYY-MM-DD)");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::parse_error, "invalid calendar date '" + text + "'");
  return Day{ymd};
}

std::string format_date(Day day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

DateWindow parse_window(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::parse_error, "window must be FROM:TO, got '" + text + "'");
  DateWindow w;
  const std::string a = trim(text.substr(0, colon));
  const std::string b = trim(text.substr(colon + 1));
  if (!a.empty()) w.from = parse_date(a);
  if (!b.empty()) w.to = parse_date(b);
  if (w.from && w.to && *w.to < *w.from) throw Error(ErrorCode::parse_error, "window ends before it starts");
  return w;
}

GoodsCatalogue read_characteristics(const std::filesystem::path& file) {
  CsvReader csv(file);
  const auto& header = csv.header();
  if (header.empty() || header.front() != "good_id") {
    throw Error(ErrorCode::parse_error, file.string() + ": first column must be good_id");
  }
  if (header.size() < 2) throw Error(ErrorCode::parse_error, file.string() + ": no attribute columns");
  GoodsCatalogue out;
  out.attributes.names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> columns;
  std::vector<std::string> row;
  while (csv.next(row)) {
    const std::string& id = row[0];
    if (id.empty()) throw Error(ErrorCode::parse_error, csv.where() + "empty good_id");
    if (out.index.count(id)) throw Error(ErrorCode::parse_error, csv.where() + "duplicate good_id '" + id + "'");
    std::vector<double> values;
    for (std::size_t c = 1; c < row.size(); ++c) values.push_back(csv.number(row[c], header[c]));
    out.index[id] = static_cast<Index>(out.good_ids.size());
    out.good_ids.push_back(id);
    columns.push_back(std::move(values));
  }
  if (out.good_ids.empty()) throw Error(ErrorCode::parse_error, file.string() + ": no goods");
  const Index j = static_cast<Index>(out.attributes.names.size());
  const Index k = static_cast<Index>(out.good_ids.size());
  out.attributes.loadings.resize(j, k);
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < j; ++r) out.attributes.loadings(r, c) = columns[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
  }
  return out;
}

std::vector<PurchaseEvent> read_purchases(const std::filesystem::path& file, const GoodsCatalogue& goods,
                                          const DateWindow& window) {
  CsvReader csv(file);
  const std::size_t c_id = csv.column("household_id");
  const std::size_t c_date = csv.column("date");
  const std::size_t c_good = csv.column("good_id");
  const std::size_t c_units = csv.column("units");
  const std::size_t c_exp = csv.column("expenditure");
  std::vector<PurchaseEvent> out;
  std::vector<std::string> row;
  while (csv.next(row)) {
    PurchaseEvent e;
    e.household_id = row[c_id];
    if (e.household_id.empty()) throw Error(ErrorCode::parse_error, csv.where() + "empty household_id");
    try {
      e.date = parse_date(row[c_date]);
    } catch (const Error& err) {
      throw Error(ErrorCode::parse_error, csv.where() + err.what());
    }
    e.units = csv.number(row[c_units], "units");
    e.expenditure = csv.number(row[c_exp], "expenditure");
    if (e.units < 0.0 || e.expenditure < 0.0) {
      throw Error(ErrorCode::parse_error, csv.where() + "units and expenditure must be nonnegative");
    }
    if (e.units != std::floor(e.units)) throw Error(ErrorCode::parse_error, csv.where() + "units must be an integer");
    if (!window.contains(e.date)) continue;
    const auto it = goods.index.find(row[c_good]);
    if (it == goods.index.end()) {
      throw Error(ErrorCode::invalid_argument,
                  csv.where() + "no characteristics for purchased good_id '" + row[c_good] + "'");
    }
    e.good = it->second;
    out.push_back(std::move(e));
  }
  return out;
}

DiscountSeries read_rates(const std::filesystem::path& file) {
  CsvReader csv(file);
  const std::size_t c_month = csv.column("month");
  const std::size_t c_rate = csv.column("rate");
  DiscountSeries out;
  std::vector<std::string> row;
  while (csv.next(row)) {
    const std::string& m = row[c_month];
    try {
      parse_date(m + "-01");
    } catch (const Error&) {
      throw Error(ErrorCode::parse_error, csv.where() + "invalid month '" + m + "' (expected YYYY-MM)");
    }
    const double r = csv.number(row[c_rate], "rate");
    if (!(r > -1.0)) throw Error(ErrorCode::parse_error, csv.where() + "rate must exceed -1");
    if (!out.monthly_rate.emplace(m, r).second) throw Error(ErrorCode::parse_error, csv.where() + "duplicate month " + m);
  }
  return out;
}

namespace {

json load_json(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, file.string() + ": " + e.what());
  }
}

}  // namespace

TechnologyConfig read_technology_config(const std::filesystem::path& file) {
  const json j = load_json(file);
  try {
    TechnologyConfig c;
    c.attributes = j.at("attributes").get<std::vector<std::string>>();
    if (j.contains("habit_attributes")) c.habit_attributes = j.at("habit_attributes").get<std::vector<std::string>>();
    if (j.contains("lags")) c.lags = j.at("lags").get<int>();
    if (j.contains("matrix_source")) c.matrix_source = j.at("matrix_source").get<std::string>();
    if (c.attributes.empty()) throw Error(ErrorCode::parse_error, file.string() + ": no attributes");
    if (c.lags < 1) throw Error(ErrorCode::parse_error, file.string() + ": lags must be >= 1");
    for (const auto& h : c.habit_attributes) {
      if (std::find(c.attributes.begin(), c.attributes.end(), h) == c.attributes.end()) {
        throw Error(ErrorCode::parse_error, file.string() + ": habit attribute '" + h + "' is not an attribute");
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, file.string() + ": " + e.what());
  }
}

AttributeTable select_attributes(const GoodsCatalogue& goods, const TechnologyConfig& config) {
  AttributeTable out;
  out.names = config.attributes;
  out.loadings.resize(static_cast<Index>(config.attributes.size()), goods.attributes.loadings.cols());
  for (std::size_t i = 0; i < config.attributes.size(); ++i) {
    out.loadings.row(static_cast<Index>(i)) = goods.attributes.loadings.row(goods.attributes.index_of(config.attributes[i]));
  }
  return out;
}

ModelSpec technology_model(const TechnologyConfig& config, std::string name) {
  ModelSpec m;
  m.name = std::move(name);
  m.representation = Representation::characteristics;
  m.habits = config.habit_attributes.empty() ? HabitSelection::none : HabitSelection::named;
  m.habit_attributes = config.habit_attributes;
  m.lags = config.lags;
  if (m.habits == HabitSelection::none) m.beta_grid = {1.0};
  return m;
}

std::vector<ModelSpec> parse_models(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("models: ") + e.what());
  }
  std::vector<ModelSpec> out;
  try {
    for (const auto& m : j.at("models")) {
      ModelSpec s;
      s.name = m.at("name").get<std::string>();
      const std::string rep = m.value("representation", std::string("characteristics"));
      if (rep == "characteristics") {
        s.representation = Representation::characteristics;
      } else if (rep == "goods") {
        s.representation = Representation::goods;
      } else {
        throw Error(ErrorCode::parse_error, "model " + s.name + ": unknown representation '" + rep + "'");
      }
      const json h = m.value("habits", json("none"));
      if (h.is_array()) {
        s.habits = HabitSelection::named;
        s.habit_attributes = h.get<std::vector<std::string>>();
        if (s.habit_attributes.empty()) s.habits = HabitSelection::none;
      } else if (h == "none") {
        s.habits = HabitSelection::none;
      } else if (h == "all") {
        s.habits = HabitSelection::all;
      } else {
        throw Error(ErrorCode::parse_error, "model " + s.name + ": habits must be \"none\", \"all\" or a list");
      }
      s.lags = m.value("lags", 1);
      s.lifecycle = m.value("lifecycle", true);
      if (m.contains("beta_grid")) {
        const json& g = m.at("beta_grid");
        if (g.is_array()) {
          s.beta_grid = g.get<std::vector<double>>();
        } else {
          s.beta_grid = make_beta_grid(g.at("lo").get<double>(), g.at("hi").get<double>(), g.at("step").get<double>());
        }
      } else if (s.habits == HabitSelection::none) {
        s.beta_grid = {1.0};
      }
      const std::string mode = m.value("mode", std::string("missing_prices"));
      if (mode == "missing_prices") {
        s.mode = PriceMode::missing_prices;
      } else if (mode == "full_prices") {
        s.mode = PriceMode::full_prices;
      } else {
        throw Error(ErrorCode::parse_error, "model " + s.name + ": unknown mode '" + mode + "'");
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("models: ") + e.what());
  }
  return out;
}

std::vector<ModelSpec> read_models(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_models(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), file.string() + ": " + e.what());
  }
}

IngestResult ingest(const std::vector<PurchaseEvent>& events, Index goods_count, Index min_periods,
                    const DiscountSeries* rates) {
  IngestResult out;
  for (const auto& group : group_by_household(events)) {
    PeriodResult r = build_periods(group, goods_count, min_periods);
    if (auto* ex = std::get_if<Excluded>(&r)) {
      out.excluded.push_back(std::move(*ex));
      continue;
    }
    HouseholdPanel panel = std::get<HouseholdPanel>(std::move(r));
    if (rates) panel = to_present_value(panel, *rates);
    validate_panel(panel);
    out.panels.push_back(std::move(panel));
  }
  return out;
}

}  // namespace habitlens
