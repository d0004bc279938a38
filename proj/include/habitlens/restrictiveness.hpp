#pragma once

// Local perturbation of observed panels and quantile-based restrictiveness
// measures for the structural distance and the efficiency index.

#include "habitlens/dynamic_rp.hpp"
#include "habitlens/model_zoo.hpp"
#include "habitlens/panel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace habitlens {

enum class ExpenditureMatch {
  per_period,  // sim expenditure equals observed expenditure in every period
  total,       // only the sum over periods is matched
};

struct PerturbConfig {
  Index draws = 10000;  // M
  double price_lo = 0.8;
  double price_hi = 1.2;
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 0;
  ExpenditureMatch match = ExpenditureMatch::per_period;

  void validate() const;
};

/// Same active sets as the observed panel. Active prices are drawn i.i.d.
/// from U[price_lo * min_k, price_hi * max_k], with min_k / max_k the
/// household's observed price range for good k; quantities are Dirichlet
/// shares over the active goods scaled to the matched expenditure. The draw
/// depends only on (seed, household_id, draw, period).
HouseholdPanel perturb(const HouseholdPanel& panel, const PerturbConfig& cfg, Index draw);

/// #{j : sims_j <= obs} / M.
double quantile_dist(double d_obs, std::span<const double> d_sims);
/// #{j : sims_j >= obs} / M.
double quantile_ccei(double ccei_obs, std::span<const double> ccei_sims);

struct RestrictivenessRow {
  std::string household_id;
  std::string model_id;
  double d_obs = 0.0;
  double d_sim_mean = 0.0;
  std::optional<double> ccei_obs;       // empty when the observed equalities fail
  std::optional<double> ccei_sim_mean;  // over draws with defined CCEI
  double q_dist = 0.0;
  /// Over all M draws; draws without a defined CCEI never count as >= obs.
  std::optional<double> q_ccei;
  /// Over the draws satisfying the structural equalities only.
  std::optional<double> q_ccei_conditional;
  Index draws = 0;
  Index structural_draws = 0;
};

struct RestrictivenessSummary {
  std::string model_id;
  Index households = 0;
  double d_obs_mean = 0.0;
  double d_sim_mean = 0.0;
  std::optional<double> ccei_obs_mean;
  std::optional<double> ccei_sim_mean;
  double mean_q_dist = 0.0;
  double share_q_dist_below = 0.0;  // Pr(q_dist < 0.05)
  std::optional<double> mean_q_ccei;
  std::optional<double> share_q_ccei_below;
};

struct RestrictivenessReport {
  std::vector<RestrictivenessRow> rows;         // household-major, models in the given order
  std::vector<RestrictivenessSummary> summary;  // one per model, in the given order
};

/// Distance and efficiency of one dataset under one model. The distance is
/// the household mean over the evaluated dates.
struct Discrepancy {
  double distance = 0.0;
  std::optional<double> ccei;
};
Discrepancy measure(const HouseholdPanel& panel, const ModelSpec& spec, const AttributeTable& attributes,
                    const EngineOptions& options = {});

RestrictivenessReport restrictiveness_report(std::span<const HouseholdPanel> panels, std::span<const ModelSpec> models,
                                             const AttributeTable& attributes, const PerturbConfig& cfg,
                                             const EngineOptions& options = {}, unsigned threads = 0);

}  // namespace habitlens
