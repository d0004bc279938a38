#include "habitlens/restrictiveness.hpp"

#include "habitlens/error.hpp"
#include "habitlens/parallel.hpp"
#include "habitlens/structural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace habitlens {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kTotalStream = 0xffffffffffffffffull;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t household, std::uint64_t draw, std::uint64_t period) {
  return std::mt19937_64(splitmix(splitmix(splitmix(seed ^ household) ^ draw) ^ period));
}

double positive_gamma(std::mt19937_64& rng, double alpha) {
  const double g = std::gamma_distribution<double>(alpha, 1.0)(rng);
  return g > 0.0 ? g : std::numeric_limits<double>::min();
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

void PerturbConfig::validate() const {
  if (draws < 1) throw Error(ErrorCode::invalid_argument, "draw count must be >= 1");
  if (!(price_lo > 0.0) || price_lo > price_hi) throw Error(ErrorCode::invalid_argument, "need 0 < price_lo <= price_hi");
  if (!(dirichlet_alpha > 0.0)) throw Error(ErrorCode::invalid_argument, "Dirichlet concentration must be positive");
}

HouseholdPanel perturb(const HouseholdPanel& panel, const PerturbConfig& cfg, Index draw) {
  cfg.validate();
  const Index k_count = panel.goods_count();
  Vector lo = Vector::Constant(k_count, std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(k_count, -std::numeric_limits<double>::infinity());
  for (const auto& p : panel.periods) {
    for (Index k = 0; k < k_count; ++k) {
      if (p.active(k) && p.has_price(k)) {
        lo(k) = std::min(lo(k), p.prices(k));
        hi(k) = std::max(hi(k), p.prices(k));
      }
    }
  }

  const std::uint64_t hh = fnv1a(panel.household_id);
  const auto d = static_cast<std::uint64_t>(draw);
  HouseholdPanel out = panel;
  // Prices and (per-period) Dirichlet weights, one stream per period.
  std::vector<Vector> weights;
  for (std::size_t t = 0; t < out.periods.size(); ++t) {
    Period& p = out.periods[t];
    auto rng = stream(cfg.seed, hh, d, t);
    Vector w = Vector::Zero(k_count);
    for (Index k = 0; k < k_count; ++k) {
      if (!p.active(k)) continue;
      if (!std::isfinite(lo(k))) throw Error(ErrorCode::missing_active_price, "missing price for an active good");
      p.prices(k) = std::uniform_real_distribution<double>(cfg.price_lo * lo(k), cfg.price_hi * hi(k))(rng);
      w(k) = positive_gamma(rng, cfg.dirichlet_alpha);
    }
    weights.push_back(std::move(w));
  }

  if (cfg.match == ExpenditureMatch::per_period) {
    for (std::size_t t = 0; t < out.periods.size(); ++t) {
      Period& p = out.periods[t];
      const Vector& w = weights[t];
      double cost = 0.0;
      for (Index k = 0; k < k_count; ++k) {
        if (p.active(k)) cost += p.prices(k) * w(k);
      }
      const double target = panel.periods[t].expenditure;
      for (Index k = 0; k < k_count; ++k) {
        if (p.active(k)) p.quantities(k) = w(k) * target / cost;
      }
      p.expenditure = target;
    }
  } else {
    // One Dirichlet vector over every active (period, good) cell.
    auto rng = stream(cfg.seed, hh, d, kTotalStream);
    double total = 0.0;
    double cost = 0.0;
    for (std::size_t t = 0; t < out.periods.size(); ++t) {
      Period& p = out.periods[t];
      total += panel.periods[t].expenditure;
      for (Index k = 0; k < k_count; ++k) {
        if (!p.active(k)) continue;
        weights[t](k) = positive_gamma(rng, cfg.dirichlet_alpha);
        cost += p.prices(k) * weights[t](k);
      }
    }
    for (std::size_t t = 0; t < out.periods.size(); ++t) {
      Period& p = out.periods[t];
      p.expenditure = 0.0;
      for (Index k = 0; k < k_count; ++k) {
        if (!p.active(k)) continue;
        p.quantities(k) = weights[t](k) * total / cost;
        p.expenditure += p.prices(k) * p.quantities(k);
      }
    }
  }
  return out;
}

double quantile_dist(double d_obs, std::span<const double> d_sims) {
  if (d_sims.empty()) throw Error(ErrorCode::invalid_argument, "no simulated distances");
  const auto n = std::count_if(d_sims.begin(), d_sims.end(), [&](double d) { return d <= d_obs; });
  return static_cast<double>(n) / static_cast<double>(d_sims.size());
}

double quantile_ccei(double ccei_obs, std::span<const double> ccei_sims) {
  if (ccei_sims.empty()) throw Error(ErrorCode::invalid_argument, "no simulated efficiency indices");
  const auto n = std::count_if(ccei_sims.begin(), ccei_sims.end(), [&](double c) { return c >= ccei_obs; });
  return static_cast<double>(n) / static_cast<double>(ccei_sims.size());
}

Discrepancy measure(const HouseholdPanel& panel, const ModelSpec& spec, const AttributeTable& attributes,
                    const EngineOptions& base) {
  EngineOptions options = base;
  options.mode = spec.mode;
  Discrepancy out;
  if (!spec.lifecycle) {
    validate_model(spec, attributes);
    out.distance =
        evaluate_structure(panel, Technology::identity(panel.goods_count(), false), options.rank_tol).household_distance;
    out.ccei = garp_efficiency(panel, options.ccei_tol);
    return out;
  }
  const DynamicSystem system(panel, resolve_technology(spec, attributes), options);
  out.distance = system.structure().household_distance;
  out.ccei = ccei(system, spec.beta_grid, options.ccei_tol);
  return out;
}

RestrictivenessReport restrictiveness_report(std::span<const HouseholdPanel> panels, std::span<const ModelSpec> models,
                                             const AttributeTable& attributes, const PerturbConfig& cfg,
                                             const EngineOptions& options, unsigned threads) {
  cfg.validate();
  for (const auto& m : models) validate_model(m, attributes);
  const std::size_t n_models = models.size();
  RestrictivenessReport report;
  report.rows.resize(panels.size() * n_models);

  parallel_for(report.rows.size(), threads, [&](std::size_t task) {
    const HouseholdPanel& panel = panels[task / n_models];
    const ModelSpec& spec = models[task % n_models];
    RestrictivenessRow row;
    row.household_id = panel.household_id;
    row.model_id = spec.name;
    row.draws = cfg.draws;

    const Discrepancy obs = measure(panel, spec, attributes, options);
    row.d_obs = obs.distance;
    row.ccei_obs = obs.ccei;

    std::vector<double> d_sims;
    std::vector<double> ccei_all;   // N/A draws enter as -inf
    std::vector<double> ccei_defined;
    d_sims.reserve(static_cast<std::size_t>(cfg.draws));
    for (Index m = 0; m < cfg.draws; ++m) {
      const Discrepancy sim = measure(perturb(panel, cfg, m), spec, attributes, options);
      d_sims.push_back(sim.distance);
      if (sim.ccei) {
        ccei_defined.push_back(*sim.ccei);
        ccei_all.push_back(*sim.ccei);
      } else {
        ccei_all.push_back(-std::numeric_limits<double>::infinity());
      }
    }
    row.structural_draws = static_cast<Index>(ccei_defined.size());
    row.d_sim_mean = mean(d_sims);
    row.q_dist = quantile_dist(row.d_obs, d_sims);
    if (!ccei_defined.empty()) row.ccei_sim_mean = mean(ccei_defined);
    if (row.ccei_obs) {
      row.q_ccei = quantile_ccei(*row.ccei_obs, ccei_all);
      if (!ccei_defined.empty()) row.q_ccei_conditional = quantile_ccei(*row.ccei_obs, ccei_defined);
    }
    report.rows[task] = std::move(row);
  });

  for (std::size_t mi = 0; mi < n_models; ++mi) {
    RestrictivenessSummary s;
    s.model_id = models[mi].name;
    std::vector<double> d_obs, d_sim, c_obs, c_sim, q_dist, q_ccei;
    for (std::size_t h = 0; h < panels.size(); ++h) {
      const RestrictivenessRow& r = report.rows[h * n_models + mi];
      d_obs.push_back(r.d_obs);
      d_sim.push_back(r.d_sim_mean);
      q_dist.push_back(r.q_dist);
      if (r.ccei_obs) c_obs.push_back(*r.ccei_obs);
      if (r.ccei_sim_mean) c_sim.push_back(*r.ccei_sim_mean);
      if (r.q_ccei) q_ccei.push_back(*r.q_ccei);
    }
    s.households = static_cast<Index>(panels.size());
    s.d_obs_mean = mean(d_obs);
    s.d_sim_mean = mean(d_sim);
    if (!c_obs.empty()) s.ccei_obs_mean = mean(c_obs);
    if (!c_sim.empty()) s.ccei_sim_mean = mean(c_sim);
    s.mean_q_dist = mean(q_dist);
    auto below = [](const std::vector<double>& v) {
      const auto n = std::count_if(v.begin(), v.end(), [](double q) { return q < 0.05; });
      return v.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(v.size());
    };
    s.share_q_dist_below = below(q_dist);
    if (!q_ccei.empty()) {
      s.mean_q_ccei = mean(q_ccei);
      s.share_q_ccei_below = below(q_ccei);
    }
    report.summary.push_back(std::move(s));
  }
  return report;
}

}  // namespace habitlens
