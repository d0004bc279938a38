#pragma once

// Synthetic panels with known ground truth: rationalisable by construction
// (gradient of a concave quadratic potential), structurally violating, or
// behaviourally violating.

#include "habitlens/dynamic_rp.hpp"
#include "habitlens/hedonic.hpp"
#include "habitlens/panel.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace habitlens {

struct GeneratorConfig {
  Index goods = 6;            // K
  Index characteristics = 3;  // J
  Index habit_count = 1;      // J2
  int lags = 1;               // L
  Index periods = 6;          // T
  double beta = 0.98;
  std::uint64_t seed = 1;
  /// Scale of the random positive definite curvature Q when `q` is unset.
  double curvature = 0.01;
  std::optional<Matrix> q;  // over the augmented space, PSD
  std::optional<Vector> b;
  Index min_active = 1;
  Index max_active = 3;
  int max_units = 4;
  PriceMode mode = PriceMode::missing_prices;
  int max_attempts = 2000;

  void validate() const;
};

struct GeneratedPanel {
  HouseholdPanel panel;
  Technology technology;
  std::optional<Certificate> certificate;  // witness at cfg.beta (rationalisable panels only)
  std::vector<Index> injected_dates;       // zero-based
};

/// Nonnegative J x K loadings with J2 habit rows (ascending) and cfg.lags.
Technology random_technology(const GeneratorConfig& cfg);

/// Bundles are drawn for L pre-sample and L post-sample periods as well, so
/// every observed price follows from the true model without truncation.
/// Throws GeneratorStuck when no draw yields positive active prices.
GeneratedPanel generate_rationalisable(const GeneratorConfig& cfg);
GeneratedPanel generate_rationalisable(const GeneratorConfig& cfg, const Technology& tech);

/// Rationalisable panel whose active prices at `dates` (zero-based equality
/// dates; default: the second period) get an added component orthogonal to
/// the hedonic span, of relative norm delta. Those dates carry J + 1 active
/// goods. Throws CannotViolate when the span is already full.
GeneratedPanel generate_structural_violation(const GeneratorConfig& cfg, const Technology& tech, double delta,
                                             std::vector<Index> dates = {});
GeneratedPanel generate_structural_violation(const GeneratorConfig& cfg, double delta, std::vector<Index> dates = {});

/// Panel with prices in the hedonic span at every date but a negative
/// two-cycle between the second and third periods at every beta in `grid`.
/// Habits are switched off (J2 = 0) so that the shadow prices on those dates
/// are pinned down by the observed prices. Needs T >= 4 and K >= J.
GeneratedPanel generate_behavioural_violation(const GeneratorConfig& cfg, std::span<const double> grid);
/// Same with a given habit-free technology; cfg.lags must match it.
GeneratedPanel generate_behavioural_violation(const GeneratorConfig& cfg, const Technology& tech,
                                              std::span<const double> grid);

/// Three-period goods panel with a strict revealed-preference cycle between
/// the first two observations.
HouseholdPanel generate_garp_violation(std::uint64_t seed, Index goods = 2);

/// Writes purchases.csv, characteristics.csv, technology.json and rates.csv
/// (zero rates) so that ingesting the directory reproduces the panels: period
/// t is bought on day t * gap, except that the last period is split across
/// days (T-1) * gap and T * gap.
void write_dataset(const std::filesystem::path& dir, std::span<const HouseholdPanel> panels, const Technology& tech,
                   const std::vector<std::string>& attribute_names, int gap_days = 14);

/// sugar, sodium, fat, fibre, protein, then attr6, attr7, ...
std::vector<std::string> default_attribute_names(Index count);

}  // namespace habitlens
