#include "habitlens/stats_report.hpp"

#include "habitlens/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace habitlens {

using nlohmann::json;

double mcnemar_exact(long n01, long n10) {
  if (n01 < 0 || n10 < 0) throw Error(ErrorCode::invalid_argument, "McNemar counts must be nonnegative");
  const long n = n01 + n10;
  if (n == 0) return 1.0;
  const long k = std::min(n01, n10);
  // log P[X = i] for X ~ Bin(n, 1/2), summed with log-sum-exp.
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  const double lg_n = std::lgamma(static_cast<double>(n) + 1.0);
  std::vector<double> terms;
  for (long i = 0; i <= k; ++i) {
    terms.push_back(lg_n - std::lgamma(static_cast<double>(i) + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) +
                    log_half_n);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return std::min(1.0, 2.0 * std::exp(top + std::log(sum)));
}

PairedComparison compare(std::span<const TestOutcome> outcomes, const std::string& model0, const std::string& model1) {
  std::map<std::string, bool> first;
  std::map<std::string, bool> second;
  for (const auto& o : outcomes) {
    if (o.model_id == model0) first[o.household_id] = o.pass;
    if (o.model_id == model1) second[o.household_id] = o.pass;
  }
  PairedComparison c;
  c.model0 = model0;
  c.model1 = model1;
  for (const auto& [id, p0] : first) {
    const auto it = second.find(id);
    if (it == second.end()) continue;
    const bool p1 = it->second;
    ++c.households;
    c.pass0 += p0 ? 1 : 0;
    c.pass1 += p1 ? 1 : 0;
    if (!p0 && p1) ++c.n_01;
    if (p0 && !p1) ++c.n_10;
  }
  if (c.households == 0) {
    throw Error(ErrorCode::no_data, "no households with outcomes for both " + model0 + " and " + model1);
  }
  c.pass0_rate = static_cast<double>(c.pass0) / static_cast<double>(c.households);
  c.pass1_rate = static_cast<double>(c.pass1) / static_cast<double>(c.households);
  c.switchers = c.n_01 + c.n_10;
  c.p_value = mcnemar_exact(c.n_01, c.n_10);
  return c;
}

std::string format_percentage(long passed, long total) {
  if (total <= 0) throw Error(ErrorCode::no_data, "percentage of an empty set");
  // Hundredths of a percent: passed * 10000 / total, rounded half to even.
  const long long num = static_cast<long long>(passed) * 10000;
  long long q = num / total;
  const long long r = num % total;
  if (2 * r > total || (2 * r == total && q % 2 == 1)) ++q;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", q / 100, q % 100);
  return buf;
}

std::vector<PassRateRow> pass_rate_table(std::span<const TestOutcome> outcomes, std::span<const std::string> model_order) {
  if (outcomes.empty()) throw Error(ErrorCode::no_data, "no outcomes to tabulate");
  std::map<std::string, std::pair<long, long>> counts;
  for (const auto& o : outcomes) {
    auto& c = counts[o.model_id];
    c.first += o.pass ? 1 : 0;
    c.second += 1;
  }
  std::vector<std::string> order;
  for (const auto& m : model_order) {
    if (counts.count(m) && std::find(order.begin(), order.end(), m) == order.end()) order.push_back(m);
  }
  for (const auto& [m, c] : counts) {
    if (std::find(order.begin(), order.end(), m) == order.end()) order.push_back(m);
  }
  std::vector<PassRateRow> rows;
  for (const auto& m : order) {
    const auto [passed, total] = counts[m];
    rows.push_back({m, passed, total, static_cast<double>(passed) / static_cast<double>(total),
                    format_percentage(passed, total)});
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

json vec_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector json_vec(const json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].get<double>();
  return v;
}

json certificate_json(const Certificate& c) {
  json j;
  j["beta"] = c.beta;
  json dates = json::array();
  for (Index t : c.dates) dates.push_back(t + 1);
  j["dates"] = dates;
  j["values"] = c.values;
  json bundles = json::array();
  for (const auto& b : c.bundles) bundles.push_back(vec_json(b));
  j["bundles"] = bundles;
  json pi0 = json::array();
  for (const auto& p : c.contemporaneous) pi0.push_back(vec_json(p));
  j["pi0"] = pi0;
  json habit = json::array();
  for (const auto& lag : c.habit) {
    json per = json::array();
    for (const auto& p : lag) per.push_back(vec_json(p));
    habit.push_back(per);
  }
  j["habit"] = habit;
  return j;
}

Certificate certificate_from(const json& j) {
  Certificate c;
  c.beta = j.at("beta").get<double>();
  for (const auto& t : j.at("dates")) c.dates.push_back(t.get<Index>() - 1);
  c.values = j.at("values").get<std::vector<double>>();
  for (const auto& b : j.at("bundles")) c.bundles.push_back(json_vec(b));
  for (const auto& p : j.at("pi0")) c.contemporaneous.push_back(json_vec(p));
  for (const auto& lag : j.at("habit")) {
    std::vector<Vector> per;
    for (const auto& p : lag) per.push_back(json_vec(p));
    c.habit.push_back(std::move(per));
  }
  return c;
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream f(file, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::io_error, "cannot write " + file.string());
  return f;
}

void close_checked(std::ofstream& f, const std::filesystem::path& file) {
  f.close();
  if (!f) throw Error(ErrorCode::io_error, "failed writing " + file.string());
}

}  // namespace

std::string outcome_to_json(const TestOutcome& o, bool with_certificate) {
  json j;
  j["household_id"] = o.household_id;
  j["model_id"] = o.model_id;
  j["pass"] = o.pass;
  j["admissible_betas"] = o.admissible_betas;
  j["mean_distance"] = o.structural.household_distance;
  j["nc_all_pass"] = o.structural.nc_all_pass();
  j["ccei"] = o.ccei ? json(*o.ccei) : json(nullptr);
  json dates = json::array();
  for (const auto& d : o.structural.dates) {
    dates.push_back({{"period", d.period + 1}, {"distance", d.distance}, {"nc_pass", d.nc_pass}});
  }
  j["distances"] = dates;
  if (with_certificate && o.certificate) j["certificate"] = certificate_json(*o.certificate);
  return j.dump();
}

TestOutcome outcome_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("invalid outcome record: ") + e.what());
  }
  try {
    TestOutcome o;
    o.household_id = j.at("household_id").get<std::string>();
    o.model_id = j.at("model_id").get<std::string>();
    o.pass = j.at("pass").get<bool>();
    o.admissible_betas = j.at("admissible_betas").get<std::vector<double>>();
    o.structural.household_distance = j.at("mean_distance").get<double>();
    if (!j.at("ccei").is_null()) o.ccei = j.at("ccei").get<double>();
    for (const auto& d : j.at("distances")) {
      o.structural.dates.push_back({d.at("period").get<Index>() - 1, d.at("distance").get<double>(), d.at("nc_pass").get<bool>()});
    }
    if (j.contains("certificate")) o.certificate = certificate_from(j.at("certificate"));
    return o;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed outcome record: ") + e.what());
  }
}

void write_pass_rates(const std::filesystem::path& file, std::span<const PassRateRow> rows) {
  auto f = open_out(file);
  f << "model_id,passed,households,pass_rate_pct\n";
  for (const auto& r : rows) f << r.model_id << ',' << r.passed << ',' << r.households << ',' << r.percentage << '\n';
  close_checked(f, file);
}

void write_comparisons(const std::filesystem::path& file, std::span<const PairedComparison> rows) {
  auto f = open_out(file);
  f << "model0,model1,households,pass0_pct,pass1_pct,delta_pp,n_01,n_10,switchers,p_value\n";
  for (const auto& c : rows) {
    char d[32];
    std::snprintf(d, sizeof d, "%.2f", 100.0 * (c.pass1_rate - c.pass0_rate));
    f << c.model0 << ',' << c.model1 << ',' << c.households << ',' << format_percentage(c.pass0, c.households) << ','
      << format_percentage(c.pass1, c.households) << ',' << d << ',' << c.n_01 << ',' << c.n_10 << ',' << c.switchers << ','
      << num(c.p_value) << '\n';
  }
  close_checked(f, file);
}

void write_restrictiveness(const std::filesystem::path& summary_file, const std::filesystem::path& rows_file,
                           const RestrictivenessReport& report) {
  {
    auto f = open_out(summary_file);
    f << "model_id,households,dist_real,dist_sim,ccei_real,ccei_sim,mean_q_dist,pr_q_dist_lt_0.05,mean_q_ccei,"
         "pr_q_ccei_lt_0.05\n";
    for (const auto& s : report.summary) {
      f << s.model_id << ',' << s.households << ',' << num(s.d_obs_mean) << ',' << num(s.d_sim_mean) << ','
        << opt(s.ccei_obs_mean) << ',' << opt(s.ccei_sim_mean) << ',' << num(s.mean_q_dist) << ','
        << num(s.share_q_dist_below) << ',' << opt(s.mean_q_ccei) << ',' << opt(s.share_q_ccei_below) << '\n';
    }
    close_checked(f, summary_file);
  }
  auto f = open_out(rows_file);
  f << "household_id,model_id,d_obs,d_sim_mean,ccei_obs,ccei_sim_mean,q_dist,q_ccei,q_ccei_conditional,draws,"
       "structural_draws\n";
  for (const auto& r : report.rows) {
    f << r.household_id << ',' << r.model_id << ',' << num(r.d_obs) << ',' << num(r.d_sim_mean) << ','
      << opt(r.ccei_obs) << ',' << opt(r.ccei_sim_mean) << ',' << num(r.q_dist) << ',' << opt(r.q_ccei) << ','
      << opt(r.q_ccei_conditional) << ',' << r.draws << ',' << r.structural_draws << '\n';
  }
  close_checked(f, rows_file);
}

void write_outcomes(const std::filesystem::path& file, std::span<const TestOutcome> outcomes) {
  auto f = open_out(file);
  for (const auto& o : outcomes) f << outcome_to_json(o) << '\n';
  close_checked(f, file);
}

std::vector<TestOutcome> read_outcomes(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_error, "cannot read " + file.string());
  std::vector<TestOutcome> out;
  std::string line;
  long number = 0;
  while (std::getline(f, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(outcome_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), file.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void emit_reports(const std::filesystem::path& dir, std::span<const TestOutcome> outcomes,
                  std::span<const PairedComparison> comparisons, const RestrictivenessReport* restrictiveness,
                  std::span<const std::string> model_order) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  const std::vector<PassRateRow> rows = outcomes.empty() ? std::vector<PassRateRow>{} : pass_rate_table(outcomes, model_order);
  write_pass_rates(dir / "pass_rates.csv", rows);
  write_comparisons(dir / "mcnemar.csv", comparisons);
  const RestrictivenessReport empty;
  write_restrictiveness(dir / "restrictiveness.csv", dir / "restrictiveness_households.csv",
                        restrictiveness ? *restrictiveness : empty);
  write_outcomes(dir / "outcomes.jsonl", outcomes);
}

}  // namespace habitlens
