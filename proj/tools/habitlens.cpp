#include "habitlens/error.hpp"
#include "habitlens/io.hpp"
#include "habitlens/model_zoo.hpp"
#include "habitlens/parallel.hpp"
#include "habitlens/restrictiveness.hpp"
#include "habitlens/stats_report.hpp"
#include "habitlens/synth.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace habitlens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;

struct InputOptions {
  std::string data_dir = ".";
  std::string purchases;
  std::string characteristics;
  std::string technology;
  std::string rates;
  long min_periods = kDefaultMinPeriods;
  std::string window;
  bool nominal = false;
};

struct ModelOptions {
  std::vector<std::string> models;
  std::string beta_grid;  // "lo:hi:step"
  std::string mode = "missing";
  bool nonnegative = false;
  double ccei_tol = 1e-4;
  unsigned threads = 0;
};

struct Inputs {
  GoodsCatalogue goods;
  AttributeTable attributes;
  std::optional<TechnologyConfig> technology;
  IngestResult ingest;
};

fs::path resolve(const InputOptions& in, const std::string& override_path, const char* name) {
  return override_path.empty() ? fs::path(in.data_dir) / name : fs::path(override_path);
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw Error(ErrorCode::io_error, "cannot open " + p.string());
}

Inputs load_inputs(const InputOptions& in) {
  if (in.min_periods < 1) throw Error(ErrorCode::invalid_argument, "--min-periods must be >= 1");
  Inputs out;
  const fs::path chars = resolve(in, in.characteristics, "characteristics.csv");
  const fs::path purchases = resolve(in, in.purchases, "purchases.csv");
  const fs::path tech = resolve(in, in.technology, "technology.json");
  require_file(chars);
  require_file(purchases);
  out.goods = read_characteristics(chars);
  out.attributes = out.goods.attributes;
  if (fs::is_regular_file(tech)) {
    out.technology = read_technology_config(tech);
    out.attributes = select_attributes(out.goods, *out.technology);
  } else if (!in.technology.empty()) {
    require_file(tech);
  }

  const DateWindow window = in.window.empty() ? DateWindow{} : parse_window(in.window);
  const auto events = read_purchases(purchases, out.goods, window);
  std::optional<DiscountSeries> rates;
  if (!in.nominal) {
    const fs::path rates_file = resolve(in, in.rates, "rates.csv");
    require_file(rates_file);
    rates = read_rates(rates_file);
  }
  out.ingest = ingest(events, static_cast<Index>(out.goods.good_ids.size()), static_cast<Index>(in.min_periods),
                      rates ? &*rates : nullptr);
  spdlog::info("{} households kept, {} excluded", out.ingest.panels.size(), out.ingest.excluded.size());
  for (const auto& e : out.ingest.excluded) {
    spdlog::debug("excluded {}: {} ({} periods)", e.household_id, e.reason, e.periods);
  }
  return out;
}

PriceMode parse_mode(const std::string& text) {
  if (text == "missing") return PriceMode::missing_prices;
  if (text == "full") return PriceMode::full_prices;
  throw Error(ErrorCode::invalid_argument, "price mode must be 'missing' or 'full', got '" + text + "'");
}

std::vector<double> parse_grid(const std::string& text) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream is(text);
  if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !is.eof()) {
    throw Error(ErrorCode::invalid_argument, "beta grid must be LO:HI:STEP, got '" + text + "'");
  }
  return make_beta_grid(lo, hi, step);
}

std::vector<ModelSpec> resolve_models(const ModelOptions& opts, const Inputs& inputs) {
  std::vector<std::string> names = opts.models;
  if (names.empty()) names.push_back(inputs.technology ? "technology" : "habits_chars");
  const auto builtins = builtin_models();
  std::vector<ModelSpec> out;
  for (const auto& name : names) {
    if (name == "technology") {
      if (!inputs.technology) throw Error(ErrorCode::invalid_argument, "model 'technology' needs technology.json");
      out.push_back(technology_model(*inputs.technology));
    } else if (fs::path(name).extension() == ".json") {
      for (auto& m : read_models(name)) out.push_back(std::move(m));
    } else {
      out.push_back(find_model(builtins, name));
    }
  }
  const PriceMode mode = parse_mode(opts.mode);
  std::optional<std::vector<double>> grid;
  if (!opts.beta_grid.empty()) grid = parse_grid(opts.beta_grid);
  for (auto& m : out) {
    m.mode = mode;
    // Models without habits are tested at beta = 1 only.
    if (grid && m.lifecycle && m.habits != HabitSelection::none) m.beta_grid = *grid;
    validate_model(m, inputs.attributes);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (out[i].name == out[j].name) throw Error(ErrorCode::invalid_argument, "duplicate model '" + out[i].name + "'");
    }
  }
  return out;
}

EngineOptions engine_options(const ModelOptions& opts) {
  EngineOptions e;
  e.mode = parse_mode(opts.mode);
  e.nonnegative_shadow_prices = opts.nonnegative;
  e.ccei_tol = opts.ccei_tol;
  return e;
}

std::vector<std::string> model_names(const std::vector<ModelSpec>& models) {
  std::vector<std::string> names;
  for (const auto& m : models) names.push_back(m.name);
  return names;
}

void write_excluded(const fs::path& file, const std::vector<Excluded>& excluded) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_error, "cannot write " + file.string());
  f << "household_id,periods,reason\n";
  for (const auto& e : excluded) f << e.household_id << ',' << e.periods << ",\"" << e.reason << "\"\n";
}

void print_comparison(const PairedComparison& c) {
  const double delta = 100.0 * (c.pass0_rate - c.pass1_rate);
  std::printf("%s vs %s & %s & %s & %.2f & %ld & %.3g \\\\\n", c.model0.c_str(), c.model1.c_str(),
              format_percentage(c.pass0, c.households).c_str(), format_percentage(c.pass1, c.households).c_str(),
              delta, c.switchers, c.p_value);
}

int cmd_test(const InputOptions& in, const ModelOptions& mo, const std::string& out_dir, bool with_ccei) {
  const Inputs inputs = load_inputs(in);
  const auto models = resolve_models(mo, inputs);
  const EngineOptions options = engine_options(mo);
  const auto& panels = inputs.ingest.panels;
  if (panels.empty()) throw Error(ErrorCode::no_data, "no household survives ingestion");

  std::vector<TestOutcome> outcomes(panels.size() * models.size());
  parallel_for(outcomes.size(), mo.threads, [&](std::size_t task) {
    const HouseholdPanel& panel = panels[task / models.size()];
    const ModelSpec& spec = models[task % models.size()];
    outcomes[task] = run_model(panel, spec, inputs.attributes, options, with_ccei);
    const TestOutcome& o = outcomes[task];
    spdlog::debug("{} / {}: {}{}", o.household_id, o.model_id, o.pass ? "pass" : "fail",
                  o.structural.nc_all_pass() ? "" : " (pricing equalities fail)");
  });

  fs::create_directories(out_dir);
  const auto order = model_names(models);
  write_outcomes(fs::path(out_dir) / "outcomes.jsonl", outcomes);
  const auto rows = pass_rate_table(outcomes, order);
  write_pass_rates(fs::path(out_dir) / "pass_rates.csv", rows);
  write_excluded(fs::path(out_dir) / "excluded.csv", inputs.ingest.excluded);
  for (const auto& r : rows) {
    std::printf("%-20s %ld/%ld  %s%%\n", r.model_id.c_str(), r.passed, r.households, r.percentage.c_str());
  }
  return kExitOk;
}

int cmd_restrict(const InputOptions& in, const ModelOptions& mo, const std::string& out_dir, PerturbConfig cfg,
                 const std::string& price_band, const std::string& match) {
  if (!price_band.empty()) {
    char colon = 0;
    std::istringstream is(price_band);
    if (!(is >> cfg.price_lo >> colon >> cfg.price_hi) || colon != ':' || !is.eof()) {
      throw Error(ErrorCode::invalid_argument, "price band must be LO:HI, got '" + price_band + "'");
    }
  }
  if (match == "period") {
    cfg.match = ExpenditureMatch::per_period;
  } else if (match == "total") {
    cfg.match = ExpenditureMatch::total;
  } else {
    throw Error(ErrorCode::invalid_argument, "--match must be 'period' or 'total'");
  }
  cfg.validate();
  const Inputs inputs = load_inputs(in);
  const auto models = resolve_models(mo, inputs);
  if (inputs.ingest.panels.empty()) throw Error(ErrorCode::no_data, "no household survives ingestion");
  const auto report =
      restrictiveness_report(inputs.ingest.panels, models, inputs.attributes, cfg, engine_options(mo), mo.threads);
  fs::create_directories(out_dir);
  write_restrictiveness(fs::path(out_dir) / "restrictiveness.csv",
                        fs::path(out_dir) / "restrictiveness_households.csv", report);
  for (const auto& s : report.summary) {
    std::printf("%-20s mean q_dist %.3f  mean q_ccei %s\n", s.model_id.c_str(), s.mean_q_dist,
                s.mean_q_ccei ? std::to_string(*s.mean_q_ccei).c_str() : "n/a");
  }
  return kExitOk;
}

std::vector<TestOutcome> load_run(const fs::path& dir) {
  const fs::path file = dir / "outcomes.jsonl";
  if (!fs::is_regular_file(file)) throw Error(ErrorCode::no_data, "no outcomes.jsonl in " + dir.string());
  auto outcomes = read_outcomes(file);
  if (outcomes.empty()) throw Error(ErrorCode::no_data, file.string() + " holds no outcomes");
  return outcomes;
}

std::vector<std::string> models_in_file_order(const std::vector<TestOutcome>& outcomes) {
  std::vector<std::string> order;
  for (const auto& o : outcomes) {
    if (std::find(order.begin(), order.end(), o.model_id) == order.end()) order.push_back(o.model_id);
  }
  return order;
}

int cmd_compare(const std::string& run_dir, const std::string& out_dir, const std::string& baseline,
                const std::vector<std::string>& alternatives) {
  const auto outcomes = load_run(run_dir);
  std::vector<PairedComparison> rows;
  std::vector<std::string> alts = alternatives;
  if (alts.empty()) {
    for (const auto& m : models_in_file_order(outcomes)) {
      if (m != baseline) alts.push_back(m);
    }
  }
  for (const auto& alt : alts) rows.push_back(compare(outcomes, baseline, alt));
  fs::create_directories(out_dir);
  write_comparisons(fs::path(out_dir) / "mcnemar.csv", rows);
  std::printf("Comparison (baseline vs alternative) & Pass0 & Pass1 & Delta (pp) & Switchers & p-value \\\\\n");
  for (const auto& r : rows) print_comparison(r);
  return kExitOk;
}

int cmd_report(const std::string& dir, const std::string& baseline) {
  const auto outcomes = load_run(dir);
  const auto order = models_in_file_order(outcomes);
  const std::string base = baseline.empty() ? order.front() : baseline;
  std::vector<PairedComparison> rows;
  for (const auto& m : order) {
    if (m != base) rows.push_back(compare(outcomes, base, m));
  }
  write_pass_rates(fs::path(dir) / "pass_rates.csv", pass_rate_table(outcomes, order));
  write_comparisons(fs::path(dir) / "mcnemar.csv", rows);
  spdlog::info("wrote pass_rates.csv and mcnemar.csv ({} comparisons) to {}", rows.size(), dir);
  return kExitOk;
}

struct SynthOptions {
  std::string profile = "pass";
  std::uint64_t seed = 1;
  long households = 5;
  GeneratorConfig gen;
  double delta = 0.5;
  int gap_days = 14;
  std::string out = "synth";
};

int cmd_synth(SynthOptions so, const ModelOptions& mo) {
  GeneratorConfig cfg = so.gen;
  cfg.mode = parse_mode(mo.mode);
  if (so.households < 1) throw Error(ErrorCode::invalid_argument, "--households must be >= 1");
  if (so.profile == "behavfail") cfg.habit_count = 0;
  cfg.seed = so.seed;
  cfg.validate();
  const Technology tech = random_technology(cfg);
  const std::vector<double> grid = mo.beta_grid.empty() ? default_beta_grid() : parse_grid(mo.beta_grid);

  std::vector<HouseholdPanel> panels(static_cast<std::size_t>(so.households));
  parallel_for(panels.size(), mo.threads, [&](std::size_t h) {
    GeneratorConfig c = cfg;
    c.seed = so.seed * 1000003ull + h + 1;
    GeneratedPanel g;
    if (so.profile == "pass") {
      g = generate_rationalisable(c, tech);
    } else if (so.profile == "structfail") {
      g = generate_structural_violation(c, tech, so.delta);
    } else if (so.profile == "behavfail") {
      g = generate_behavioural_violation(c, tech, grid);
    } else {
      throw Error(ErrorCode::invalid_argument, "--profile must be pass, structfail or behavfail");
    }
    char id[32];
    std::snprintf(id, sizeof id, "hh%04zu", h + 1);
    g.panel.household_id = id;
    panels[h] = std::move(g.panel);
  });

  // --out names either a directory or the purchases file inside one.
  fs::path dir = so.out;
  fs::path purchases_name;
  if (dir.extension() == ".csv") {
    purchases_name = dir.filename();
    dir = dir.parent_path().empty() ? fs::path(".") : dir.parent_path();
  }
  write_dataset(dir, panels, tech, default_attribute_names(tech.characteristic_count()), so.gap_days);
  if (!purchases_name.empty() && purchases_name != "purchases.csv") {
    fs::rename(dir / "purchases.csv", dir / purchases_name);
  }
  spdlog::info("wrote {} {} households to {}", panels.size(), so.profile, dir.string());
  return kExitOk;
}

void add_input_options(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--data", in.data_dir, "Directory holding purchases.csv, characteristics.csv, technology.json, rates.csv")
      ->capture_default_str();
  cmd->add_option("--purchases", in.purchases, "purchases.csv (overrides --data)");
  cmd->add_option("--characteristics", in.characteristics, "characteristics.csv (overrides --data)");
  cmd->add_option("--technology", in.technology, "technology.json (overrides --data)");
  cmd->add_option("--rates", in.rates, "rates.csv (overrides --data)");
  cmd->add_option("--min-periods", in.min_periods, "Households with fewer periods are excluded")->capture_default_str();
  cmd->add_option("--window", in.window, "Inclusive date window FROM:TO (YYYY-MM-DD, either side optional)");
  cmd->add_flag("--nominal", in.nominal, "Skip the present-value conversion");
}

void add_model_options(CLI::App* cmd, ModelOptions& mo) {
  cmd->add_option("--models", mo.models,
                  "Comma-separated builtin model names, 'technology' (from technology.json) or models.json files")
      ->delimiter(',');
  cmd->add_option("--beta-grid", mo.beta_grid, "Discount-factor grid LO:HI:STEP for habit models (default 0.95:1:0.001)");
  cmd->add_option("--mode", mo.mode, "Price regime: missing or full")->capture_default_str();
  cmd->add_flag("--nonnegative", mo.nonnegative, "Restrict shadow prices to be nonnegative");
  cmd->add_option("--ccei-tol", mo.ccei_tol, "Efficiency bisection tolerance")->capture_default_str();
  cmd->add_option("--threads", mo.threads, "Worker threads (0: one per core)")->capture_default_str();
}

int map_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::generator_stuck:
      return kExitInternal;
    default:
      return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"habitlens: revealed-preference tests for habits over characteristics"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "habitlens.toml", "Configuration file (flags override it)");
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  InputOptions in;
  ModelOptions mo;
  std::string out_dir = "out";
  bool no_ccei = false;

  auto* test = app.add_subcommand("test", "Test every household under every model");
  add_input_options(test, in);
  add_model_options(test, mo);
  test->add_option("--out", out_dir, "Output directory")->capture_default_str();
  test->add_flag("--no-ccei", no_ccei, "Skip the efficiency index");

  PerturbConfig perturb_cfg;
  std::string price_band;
  std::string match = "period";
  auto* restrict = app.add_subcommand("restrict", "Restrictiveness against randomly perturbed panels");
  add_input_options(restrict, in);
  add_model_options(restrict, mo);
  restrict->add_option("--out", out_dir, "Output directory")->capture_default_str();
  restrict->add_option("--draws", perturb_cfg.draws, "Draws per household")->capture_default_str();
  restrict->add_option("--seed", perturb_cfg.seed, "Random seed")->capture_default_str();
  restrict->add_option("--price-band", price_band, "Price band LO:HI relative to the observed range (default 0.8:1.2)");
  restrict->add_option("--alpha", perturb_cfg.dirichlet_alpha, "Dirichlet concentration")->capture_default_str();
  restrict->add_option("--match", match, "Expenditure matching: period or total")->capture_default_str();

  std::string run_dir;
  std::string baseline = "habits_chars";
  std::vector<std::string> alternatives;
  auto* cmp = app.add_subcommand("compare", "Exact McNemar comparisons between models of a test run");
  cmp->add_option("--run", run_dir, "Directory with outcomes.jsonl (default: --out)");
  auto* cmp_out = cmp->add_option("--out", out_dir, "Output directory for mcnemar.csv (default: --run)");
  cmp->add_option("--baseline", baseline, "Baseline model")->capture_default_str();
  cmp->add_option("--alt", alternatives, "Alternative model(s); default: every other model in the run")
      ->delimiter(',');

  std::string report_baseline;
  auto* report = app.add_subcommand("report", "Rebuild pass_rates.csv and mcnemar.csv from outcomes.jsonl");
  report->add_option("--out", out_dir, "Run directory")->capture_default_str();
  report->add_option("--baseline", report_baseline, "Baseline model (default: first model in the run)");

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with known ground truth");
  synth->add_option("--profile", so.profile, "pass, structfail or behavfail")
      ->check(CLI::IsMember({"pass", "structfail", "behavfail"}))
      ->capture_default_str();
  synth->add_option("--seed", so.seed, "Random seed")->capture_default_str();
  synth->add_option("--households", so.households, "Number of households")->capture_default_str();
  synth->add_option("--goods", so.gen.goods, "Goods K")->capture_default_str();
  synth->add_option("--characteristics", so.gen.characteristics, "Characteristics J")->capture_default_str();
  synth->add_option("--habits", so.gen.habit_count, "Habit-forming characteristics J2")->capture_default_str();
  synth->add_option("--lags", so.gen.lags, "Habit lags L")->capture_default_str();
  synth->add_option("--periods", so.gen.periods, "Periods T")->capture_default_str();
  synth->add_option("--beta", so.gen.beta, "True discount factor")->capture_default_str();
  synth->add_option("--max-active", so.gen.max_active, "Most goods bought per period")->capture_default_str();
  synth->add_option("--delta", so.delta, "Relative size of the injected pricing violation")->capture_default_str();
  synth->add_option("--gap-days", so.gap_days, "Days between periods")->capture_default_str();
  synth->add_option("--out", so.out, "Output directory, or a purchases file name inside one")->capture_default_str();
  synth->add_option("--beta-grid", mo.beta_grid, "Grid on which a behavfail panel must fail");
  synth->add_option("--mode", mo.mode, "Price regime: missing or full")->capture_default_str();
  synth->add_option("--threads", mo.threads, "Worker threads (0: one per core)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  auto logger = spdlog::stderr_color_mt("habitlens");  // mutex-guarded sink
  logger->set_pattern("[%l] %v");
  logger->set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_default_logger(logger);

  try {
    if (*test) return cmd_test(in, mo, out_dir, !no_ccei);
    if (*restrict) return cmd_restrict(in, mo, out_dir, perturb_cfg, price_band, match);
    if (*cmp) {
      const std::string from = run_dir.empty() ? out_dir : run_dir;
      return cmd_compare(from, cmp_out->count() > 0 ? out_dir : from, baseline, alternatives);
    }
    if (*report) return cmd_report(out_dir, report_baseline);
    if (*synth) return cmd_synth(so, mo);
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.code()), e.what());
    return map_error(e);
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
