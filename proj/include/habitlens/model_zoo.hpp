#pragma once

// Named model specifications and reference implementations of the nested
// special cases (habits over goods, static characteristics, GARP).

#include "habitlens/dynamic_rp.hpp"
#include "habitlens/hedonic.hpp"
#include "habitlens/panel.hpp"

#include <span>
#include <string>
#include <vector>

namespace habitlens {

enum class Representation {
  characteristics,  // A taken from the attribute table
  goods,            // A = identity(K)
};

enum class HabitSelection { none, all, named };

struct ModelSpec {
  std::string name;
  Representation representation = Representation::characteristics;
  HabitSelection habits = HabitSelection::none;
  std::vector<std::string> habit_attributes;  // used when habits == named
  int lags = 1;
  bool lifecycle = true;  // false: classical GARP on goods
  std::vector<double> beta_grid = default_beta_grid();
  PriceMode mode = PriceMode::missing_prices;
};

/// J named attributes for K goods: loadings(j, k) is attribute j of good k.
struct AttributeTable {
  std::vector<std::string> names;
  Matrix loadings;

  Index index_of(const std::string& name) const;  // throws InvalidArgument
};

/// habits_chars, habits_sugar, habits_sodium, habits_all_chars, static_chars,
/// habits_all_goods, static_goods, garp_goods.
std::vector<ModelSpec> builtin_models();
const ModelSpec& find_model(std::span<const ModelSpec> models, const std::string& name);

/// Checks habit names against the table and the grid against (0, 1].
void validate_model(const ModelSpec& spec, const AttributeTable& attributes);

/// Technology implied by a (lifecycle) model for a table with K goods.
Technology resolve_technology(const ModelSpec& spec, const AttributeTable& attributes);

/// Habits over an arbitrary subset of goods (one lag), written directly in
/// goods space: observed prices of non-habit goods are the shadow prices and
/// each habit good's price splits as rho^{a,0}_t + rho^{a,1}_{t+1}.
TestOutcome test_goods_corollary(const HouseholdPanel& panel, std::span<const Index> habit_goods,
                                 std::span<const double> grid, const EngineOptions& options = {});

/// Intertemporally separable characteristics model at beta = 1: one LP with
/// explicit equality rows a_k' pi_t = rho_t^k.
TestOutcome test_static_characteristics(const HouseholdPanel& panel, const Matrix& loadings,
                                        const EngineOptions& options = {});

/// Classical GARP on the observed goods bundles over all periods. A pair
/// (t, s) is compared only when every good bought at s has a price at t.
bool test_garp_goods(const HouseholdPanel& panel);
/// Largest e in [0, 1] at which GARP_e holds, by bisection to `tol`.
double garp_efficiency(const HouseholdPanel& panel, double tol = 1e-4);

/// Runs one model on one household. Non-lifecycle models go through GARP;
/// everything else through the dynamic engine.
TestOutcome run_model(const HouseholdPanel& panel, const ModelSpec& spec, const AttributeTable& attributes,
                      const EngineOptions& base = {}, bool with_ccei = true);

}  // namespace habitlens
