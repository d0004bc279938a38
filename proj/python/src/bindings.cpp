#include "habitlens/dynamic_rp.hpp"
#include "habitlens/error.hpp"
#include "habitlens/io.hpp"
#include "habitlens/model_zoo.hpp"
#include "habitlens/restrictiveness.hpp"
#include "habitlens/stats_report.hpp"
#include "habitlens/structural.hpp"
#include "habitlens/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

namespace py = pybind11;
using namespace habitlens;

namespace {

PriceMode parse_mode(const std::string& mode) {
  if (mode == "missing") return PriceMode::missing_prices;
  if (mode == "full") return PriceMode::full_prices;
  throw Error(ErrorCode::invalid_argument, "mode must be 'missing' or 'full'");
}

EngineOptions make_options(const std::string& mode, double feasibility_tol, double rank_tol, bool nonnegative,
                           double ccei_tol) {
  EngineOptions o;
  o.mode = parse_mode(mode);
  o.feasibility_tol = feasibility_tol;
  o.rank_tol = rank_tol;
  o.nonnegative_shadow_prices = nonnegative;
  o.ccei_tol = ccei_tol;
  return o;
}

// Rows are periods; NaN marks a missing price.
HouseholdPanel make_panel(const std::string& id, const Matrix& quantities, const Matrix& prices) {
  if (quantities.rows() != prices.rows() || quantities.cols() != prices.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "quantities and prices must have the same shape");
  }
  HouseholdPanel panel;
  panel.household_id = id;
  const Day start{std::chrono::year{2020} / 1 / 1};
  for (Index t = 0; t < quantities.rows(); ++t) {
    Period p;
    p.quantities = quantities.row(t).transpose();
    p.prices = prices.row(t).transpose();
    for (Index k = 0; k < p.quantities.size(); ++k) {
      if (p.active(k)) p.expenditure += p.quantities(k) * p.prices(k);
    }
    p.first_day = p.last_day = start + std::chrono::days{t};
    panel.periods.push_back(std::move(p));
  }
  validate_panel(panel);
  return panel;
}

Matrix stack(const HouseholdPanel& panel, bool prices) {
  Matrix m(panel.period_count(), panel.goods_count());
  for (Index t = 0; t < panel.period_count(); ++t) {
    const Period& p = panel.periods[static_cast<std::size_t>(t)];
    m.row(t) = (prices ? p.prices : p.quantities).transpose();
  }
  return m;
}

GeneratorConfig make_config(Index goods, Index characteristics, Index habit_count, int lags, Index periods,
                            double beta, std::uint64_t seed, const std::string& mode, Index max_active) {
  GeneratorConfig c;
  c.goods = goods;
  c.characteristics = characteristics;
  c.habit_count = habit_count;
  c.lags = lags;
  c.periods = periods;
  c.beta = beta;
  c.seed = seed;
  c.mode = parse_mode(mode);
  c.max_active = max_active;
  return c;
}

py::dict structure_dict(const StructuralVerdict& v) {
  py::list dates;
  for (const auto& d : v.dates) {
    py::dict e;
    e["period"] = d.period;
    e["distance"] = d.distance;
    e["nc_pass"] = d.nc_pass;
    dates.append(e);
  }
  py::dict out;
  out["dates"] = dates;
  out["household_distance"] = v.household_distance;
  out["nc_all_pass"] = v.nc_all_pass();
  return out;
}

ModelSpec lookup_model(const std::string& name) {
  const auto models = builtin_models();
  return find_model(models, name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Revealed-preference tests for habits over characteristics";

  static PyObject* error_type = py::exception<Error>(m, "HabitlensError", PyExc_ValueError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error_type)(e.what());
      instance.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, instance.ptr());
    }
  });

  py::class_<Technology>(m, "Technology")
      .def(py::init<Matrix, std::vector<Index>, int>(), py::arg("loadings"), py::arg("habit_rows") = std::vector<Index>{},
           py::arg("lags") = 1)
      .def_static("identity", &Technology::identity, py::arg("goods"), py::arg("all_habit"), py::arg("lags") = 1)
      .def_property_readonly("loadings", &Technology::loadings)
      .def_property_readonly("habit_rows", &Technology::habit_rows)
      .def_property_readonly("lags", &Technology::lags)
      .def_property_readonly("characteristic_count", &Technology::characteristic_count)
      .def_property_readonly("goods_count", &Technology::goods_count)
      .def_property_readonly("habit_count", &Technology::habit_count);

  py::class_<HouseholdPanel>(m, "Panel")
      .def(py::init(&make_panel), py::arg("household_id"), py::arg("quantities"), py::arg("prices"))
      .def_readwrite("household_id", &HouseholdPanel::household_id)
      .def_property_readonly("quantities", [](const HouseholdPanel& p) { return stack(p, false); })
      .def_property_readonly("prices", [](const HouseholdPanel& p) { return stack(p, true); })
      .def_property_readonly("expenditure",
                             [](const HouseholdPanel& p) {
                               std::vector<double> e;
                               for (const auto& period : p.periods) e.push_back(period.expenditure);
                               return e;
                             })
      .def_property_readonly("period_count", &HouseholdPanel::period_count)
      .def_property_readonly("goods_count", &HouseholdPanel::goods_count);

  py::class_<Certificate>(m, "Certificate")
      .def_readonly("beta", &Certificate::beta)
      .def_readonly("dates", &Certificate::dates)
      .def_readonly("values", &Certificate::values)
      .def_readonly("bundles", &Certificate::bundles)
      .def_readonly("contemporaneous", &Certificate::contemporaneous)
      .def_readonly("habit", &Certificate::habit)
      .def("stacked", &Certificate::stacked, py::arg("t"))
      .def(
          "utility", [](const Certificate& c, const Vector& z) { return AfriatEnvelope(c)(z); }, py::arg("z"),
          "Afriat envelope min_t V_t + pi_t'(z - z_t)");

  py::class_<TestOutcome>(m, "TestOutcome")
      .def_readonly("household_id", &TestOutcome::household_id)
      .def_readonly("model_id", &TestOutcome::model_id)
      .def_readonly("passed", &TestOutcome::pass)
      .def_readonly("admissible_betas", &TestOutcome::admissible_betas)
      .def_readonly("certificate", &TestOutcome::certificate)
      .def_readonly("ccei", &TestOutcome::ccei)
      .def_property_readonly("structure", [](const TestOutcome& o) { return structure_dict(o.structural); })
      .def("to_json", &outcome_to_json, py::arg("with_certificate") = true);

#define HL_OPTION_ARGS                                                                                           \
  py::arg("mode") = "missing", py::arg("feasibility_tol") = kDefaultFeasibilityTolerance,                     \
      py::arg("rank_tol") = kDefaultRankTolerance, py::arg("nonnegative") = false, py::arg("ccei_tol") = 1e-4

  m.def("default_beta_grid", &default_beta_grid);
  m.def("make_beta_grid", &make_beta_grid, py::arg("lo"), py::arg("hi"), py::arg("step"));

  m.def(
      "evaluate_structure",
      [](const HouseholdPanel& panel, const Technology& tech, double rank_tol) {
        return structure_dict(evaluate_structure(panel, tech, rank_tol));
      },
      py::arg("panel"), py::arg("technology"), py::arg("rank_tol") = kDefaultRankTolerance);

  m.def(
      "feasible_at_beta",
      [](const HouseholdPanel& panel, const Technology& tech, double beta, const std::string& mode, double ftol,
         double rtol, bool nonneg, double ctol) {
        return feasible_at_beta(panel, tech, beta, make_options(mode, ftol, rtol, nonneg, ctol));
      },
      py::arg("panel"), py::arg("technology"), py::arg("beta"), HL_OPTION_ARGS,
      "Certificate at beta, or None when the system is infeasible");

  m.def(
      "admissible_beta_set",
      [](const HouseholdPanel& panel, const Technology& tech, std::vector<double> grid, const std::string& mode,
         double ftol, double rtol, bool nonneg, double ctol) {
        return admissible_beta_set(panel, tech, grid, make_options(mode, ftol, rtol, nonneg, ctol));
      },
      py::arg("panel"), py::arg("technology"), py::arg("grid"), HL_OPTION_ARGS);

  m.def(
      "ccei",
      [](const HouseholdPanel& panel, const Technology& tech, std::vector<double> grid, const std::string& mode,
         double ftol, double rtol, bool nonneg, double ctol) {
        return ccei(panel, tech, grid, make_options(mode, ftol, rtol, nonneg, ctol));
      },
      py::arg("panel"), py::arg("technology"), py::arg("grid"), HL_OPTION_ARGS);

  m.def(
      "run_dynamic_test",
      [](const HouseholdPanel& panel, const Technology& tech, std::vector<double> grid, bool with_ccei,
         const std::string& mode, double ftol, double rtol, bool nonneg, double ctol) {
        return run_dynamic_test(panel, tech, grid, make_options(mode, ftol, rtol, nonneg, ctol), with_ccei);
      },
      py::arg("panel"), py::arg("technology"), py::arg("grid"), py::arg("with_ccei") = true, HL_OPTION_ARGS);

  m.def(
      "certificate_violation",
      [](const HouseholdPanel& panel, const Technology& tech, const Certificate& cert, const std::string& mode) {
        EngineOptions o;
        o.mode = parse_mode(mode);
        return certificate_violation(panel, tech, cert, o);
      },
      py::arg("panel"), py::arg("technology"), py::arg("certificate"), py::arg("mode") = "missing");

  m.def("test_garp_goods", &test_garp_goods, py::arg("panel"));
  m.def("garp_efficiency", &garp_efficiency, py::arg("panel"), py::arg("tol") = 1e-4);

  m.def("builtin_model_names", [] {
    std::vector<std::string> names;
    for (const auto& spec : builtin_models()) names.push_back(spec.name);
    return names;
  });

  m.def(
      "run_model",
      [](const HouseholdPanel& panel, const std::string& model, std::vector<std::string> attribute_names,
         Matrix loadings, std::optional<std::vector<double>> grid, bool with_ccei, const std::string& mode,
         double ftol, double rtol, bool nonneg, double ctol) {
        ModelSpec spec = lookup_model(model);
        if (grid) spec.beta_grid = *grid;
        spec.mode = parse_mode(mode);
        AttributeTable table{std::move(attribute_names), std::move(loadings)};
        return run_model(panel, spec, table, make_options(mode, ftol, rtol, nonneg, ctol), with_ccei);
      },
      py::arg("panel"), py::arg("model"), py::arg("attribute_names"), py::arg("loadings"),
      py::arg("beta_grid") = py::none(), py::arg("with_ccei") = true, HL_OPTION_ARGS);

  m.def(
      "load_dataset",
      [](const std::filesystem::path& dir, Index min_periods, bool nominal, const std::string& window) {
        const GoodsCatalogue goods = read_characteristics(dir / "characteristics.csv");
        const auto events = read_purchases(dir / "purchases.csv", goods, window.empty() ? DateWindow{} : parse_window(window));
        std::optional<DiscountSeries> rates;
        if (!nominal) rates = read_rates(dir / "rates.csv");
        IngestResult r = ingest(events, static_cast<Index>(goods.good_ids.size()), min_periods, rates ? &*rates : nullptr);
        py::list excluded;
        for (const auto& e : r.excluded) excluded.append(py::make_tuple(e.household_id, e.reason, e.periods));
        py::dict out;
        out["panels"] = r.panels;
        out["excluded"] = excluded;
        out["good_ids"] = goods.good_ids;
        out["attribute_names"] = goods.attributes.names;
        out["loadings"] = goods.attributes.loadings;
        return out;
      },
      py::arg("directory"), py::arg("min_periods") = kDefaultMinPeriods, py::arg("nominal") = false,
      py::arg("window") = "");

  m.def(
      "generate_rationalisable",
      [](Index goods, Index characteristics, Index habit_count, int lags, Index periods, double beta,
         std::uint64_t seed, const std::string& mode, Index max_active) {
        const auto g =
            generate_rationalisable(make_config(goods, characteristics, habit_count, lags, periods, beta, seed, mode, max_active));
        return py::make_tuple(g.panel, g.technology, g.certificate);
      },
      py::arg("goods") = 6, py::arg("characteristics") = 3, py::arg("habit_count") = 1, py::arg("lags") = 1,
      py::arg("periods") = 6, py::arg("beta") = 0.98, py::arg("seed") = 1, py::arg("mode") = "missing",
      py::arg("max_active") = 3, "(panel, technology, certificate) rationalisable at beta");

  m.def(
      "generate_structural_violation",
      [](double delta, Index goods, Index characteristics, Index habit_count, int lags, Index periods, double beta,
         std::uint64_t seed, const std::string& mode, Index max_active) {
        const auto g = generate_structural_violation(
            make_config(goods, characteristics, habit_count, lags, periods, beta, seed, mode, max_active), delta);
        return py::make_tuple(g.panel, g.technology, g.injected_dates);
      },
      py::arg("delta") = 0.5, py::arg("goods") = 6, py::arg("characteristics") = 3, py::arg("habit_count") = 1,
      py::arg("lags") = 1, py::arg("periods") = 6, py::arg("beta") = 0.98, py::arg("seed") = 1,
      py::arg("mode") = "missing", py::arg("max_active") = 3);

  m.def(
      "generate_behavioural_violation",
      [](std::vector<double> grid, Index goods, Index characteristics, Index periods, std::uint64_t seed,
         const std::string& mode) {
        const auto g =
            generate_behavioural_violation(make_config(goods, characteristics, 0, 1, periods, 1.0, seed, mode, 3), grid);
        return py::make_tuple(g.panel, g.technology);
      },
      py::arg("grid"), py::arg("goods") = 6, py::arg("characteristics") = 3, py::arg("periods") = 6,
      py::arg("seed") = 1, py::arg("mode") = "missing");

  m.def("generate_garp_violation", &generate_garp_violation, py::arg("seed"), py::arg("goods") = 2);

  m.def(
      "write_dataset",
      [](const std::filesystem::path& dir, const std::vector<HouseholdPanel>& panels, const Technology& tech,
         std::optional<std::vector<std::string>> names, int gap_days) {
        write_dataset(dir, panels, tech, names ? *names : default_attribute_names(tech.characteristic_count()),
                      gap_days);
      },
      py::arg("directory"), py::arg("panels"), py::arg("technology"), py::arg("attribute_names") = py::none(),
      py::arg("gap_days") = 14);

  m.def(
      "perturb",
      [](const HouseholdPanel& panel, Index draw, std::uint64_t seed, double price_lo, double price_hi, double alpha,
         const std::string& match) {
        PerturbConfig c;
        c.seed = seed;
        c.price_lo = price_lo;
        c.price_hi = price_hi;
        c.dirichlet_alpha = alpha;
        if (match == "total") {
          c.match = ExpenditureMatch::total;
        } else if (match != "period") {
          throw Error(ErrorCode::invalid_argument, "match must be 'period' or 'total'");
        }
        return perturb(panel, c, draw);
      },
      py::arg("panel"), py::arg("draw"), py::arg("seed") = 0, py::arg("price_lo") = 0.8, py::arg("price_hi") = 1.2,
      py::arg("alpha") = 1.0, py::arg("match") = "period");

  m.def(
      "quantile_dist", [](double d, std::vector<double> sims) { return quantile_dist(d, sims); }, py::arg("d_obs"),
      py::arg("d_sims"));
  m.def(
      "quantile_ccei", [](double c, std::vector<double> sims) { return quantile_ccei(c, sims); },
      py::arg("ccei_obs"), py::arg("ccei_sims"));

  m.def("mcnemar_exact", &mcnemar_exact, py::arg("n01"), py::arg("n10"));
  m.def("format_percentage", &format_percentage, py::arg("passed"), py::arg("total"));

#undef HL_OPTION_ARGS
}
