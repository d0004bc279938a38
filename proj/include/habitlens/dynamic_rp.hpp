#pragma once

// Dynamic revealed-preference engine for the habits-over-characteristics
// model: LP feasibility at a given discount factor, admissible discount-factor
// sets, critical cost efficiency, certificates and their utility envelopes.

#include "habitlens/hedonic.hpp"
#include "habitlens/panel.hpp"
#include "habitlens/structural.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace habitlens {

enum class PriceMode {
  missing_prices,  // pricing equalities on purchased goods only
  full_prices,     // plus pricing inequalities on every unpurchased good
};

struct EngineOptions {
  PriceMode mode = PriceMode::missing_prices;
  double feasibility_tol = kDefaultFeasibilityTolerance;
  double rank_tol = kDefaultRankTolerance;
  bool nonnegative_shadow_prices = false;
  double ccei_tol = 1e-4;
};

/// Rationalisability witness at one discount factor. Period indices are
/// zero-based: entry t corresponds to calendar period t + 1.
struct Certificate {
  double beta = 1.0;
  std::vector<Index> dates;         // periods entering the Afriat inequalities
  std::vector<double> values;       // V_t, aligned with `dates`
  std::vector<Vector> bundles;      // augmented bundles z~_t, aligned with `dates`
  std::vector<Vector> contemporaneous;      // pi_t^0, t = 0 .. T-1
  std::vector<std::vector<Vector>> habit;   // habit[l-1][t] = pi_t^l, t = 0 .. T-1+L
                                            // (entries past T-1 are exactly zero)

  Index period_count() const { return static_cast<Index>(contemporaneous.size()); }
  int lags() const { return static_cast<int>(habit.size()); }
  /// Undiscounted stacked shadow prices beta^-t [pi_t^0; pi_t^1; ...; pi_t^L].
  Vector stacked(Index t) const;
};

struct TestOutcome {
  std::string household_id;
  std::string model_id;
  bool pass = false;
  std::vector<double> admissible_betas;
  std::optional<Certificate> certificate;  // at the smallest admissible beta
  StructuralVerdict structural;
  std::optional<double> ccei;  // empty when the pricing equalities fail
};

/// One household under one technology, prepared once and reused across
/// discount factors and efficiency levels. The pricing equalities are
/// eliminated (particular solution plus null-space coordinates) and the
/// remaining Afriat system is reduced to the range of its coefficient matrix,
/// so each solve is a small dense LP.
class DynamicSystem {
 public:
  DynamicSystem(const HouseholdPanel& panel, const Technology& tech, const EngineOptions& options = {});
  ~DynamicSystem();
  DynamicSystem(DynamicSystem&&) noexcept;
  DynamicSystem& operator=(DynamicSystem&&) noexcept;

  const StructuralVerdict& structure() const;
  /// Pricing equalities solvable at every equality date.
  bool structurally_feasible() const;

  /// Afriat inequalities with slack (1 - efficiency) * beta^-(t-1) e_t.
  bool feasible(double beta, double efficiency = 1.0) const;
  std::optional<Certificate> certificate(double beta) const;

  /// Largest efficiency in [0, 1] feasible at `beta`, solved as one LP.
  /// Empty when infeasible even at efficiency 0 or structurally infeasible.
  std::optional<double> max_efficiency(double beta) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::optional<Certificate> feasible_at_beta(const HouseholdPanel& panel, const Technology& tech, double beta,
                                            const EngineOptions& options = {});

std::vector<double> admissible_beta_set(const HouseholdPanel& panel, const Technology& tech,
                                        std::span<const double> grid, const EngineOptions& options = {});

/// sup { e : relaxed system feasible at some beta in grid }, by bisection to
/// options.ccei_tol. Empty when the pricing equalities fail; 0 when even the
/// fully relaxed system is infeasible.
std::optional<double> ccei(const HouseholdPanel& panel, const Technology& tech, std::span<const double> grid,
                           const EngineOptions& options = {});
std::optional<double> ccei(const DynamicSystem& system, std::span<const double> grid, double tol = 1e-4);

/// Full household test: structural verdict, admissible set, certificate at
/// the smallest admissible beta and (optionally) the efficiency index.
TestOutcome run_dynamic_test(const HouseholdPanel& panel, const Technology& tech, std::span<const double> grid,
                             const EngineOptions& options = {}, bool with_ccei = true);

/// Independent check of a certificate against the interior-date system.
/// Returns the largest violation in rescaled price units.
double certificate_violation(const HouseholdPanel& panel, const Technology& tech, const Certificate& cert,
                             const EngineOptions& options = {});

/// One-lag system written out directly: every shadow price is an LP variable
/// and the pricing equalities are explicit equality rows.
std::optional<Certificate> feasible_one_lag_direct(const HouseholdPanel& panel, const Technology& tech, double beta,
                                                   const EngineOptions& options = {});

/// True iff sum_m p_{t_m}'(z_{t_{m+1}} - z_{t_m}) >= -tol for every cycle of
/// distinct observations of length 2..max_len. Cycles that revisit an
/// observation split into such simple cycles, so max_len = n is full cyclical
/// monotonicity.
bool check_cycles_bruteforce(std::span<const Vector> prices, std::span<const Vector> bundles, std::size_t max_len,
                             double tol = 1e-9);

/// Feasibility of V_s - V_t <= p_t'(z_s - z_t) for all s != t, as an LP.
bool afriat_feasible(std::span<const Vector> prices, std::span<const Vector> bundles,
                     double feasibility_tol = kDefaultFeasibilityTolerance);

/// u(z) = min_t { V_t + pi~_t'(z - z~_t) }.
class AfriatEnvelope {
 public:
  explicit AfriatEnvelope(const Certificate& cert);
  AfriatEnvelope(std::vector<double> values, std::vector<Vector> gradients, std::vector<Vector> points);

  double operator()(const Vector& z) const;
  std::size_t size() const { return values_.size(); }
  const Vector& gradient(std::size_t i) const { return gradients_[i]; }
  const Vector& point(std::size_t i) const { return points_[i]; }
  double value(std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
  std::vector<Vector> gradients_;
  std::vector<Vector> points_;
};

inline AfriatEnvelope reconstruct_utility(const Certificate& cert) { return AfriatEnvelope(cert); }

}  // namespace habitlens
