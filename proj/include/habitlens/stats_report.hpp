#pragma once

// Pass-rate tables, exact McNemar comparisons between models and report
// emission (CSV and JSON lines).

#include "habitlens/dynamic_rp.hpp"
#include "habitlens/restrictiveness.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace habitlens {

/// min(1, 2 * P[Bin(n, 1/2) <= min(n01, n10)]), n = n01 + n10; 1 when n = 0.
double mcnemar_exact(long n01, long n10);

struct PairedComparison {
  std::string model0;
  std::string model1;
  long households = 0;
  long pass0 = 0;
  long pass1 = 0;
  double pass0_rate = 0.0;
  double pass1_rate = 0.0;
  long n_01 = 0;  // fail under model0, pass under model1
  long n_10 = 0;
  long switchers = 0;
  double p_value = 1.0;
};

/// Pairs outcomes by household over the households present for both models.
PairedComparison compare(std::span<const TestOutcome> outcomes, const std::string& model0, const std::string& model1);

struct PassRateRow {
  std::string model_id;
  long passed = 0;
  long households = 0;
  double rate = 0.0;        // raw fraction
  std::string percentage;   // e.g. "54.69"
};

/// 100 * passed / total rounded half-even to two decimals, computed exactly.
std::string format_percentage(long passed, long total);

/// One row per model; `model_order` fixes the row order (models not listed
/// follow in name order). Throws NoData on an empty outcome set.
std::vector<PassRateRow> pass_rate_table(std::span<const TestOutcome> outcomes,
                                         std::span<const std::string> model_order = {});

std::string outcome_to_json(const TestOutcome& outcome, bool with_certificate = true);
TestOutcome outcome_from_json(const std::string& line);

/// Writes pass_rates.csv, mcnemar.csv, restrictiveness.csv (per-model
/// summary), restrictiveness_households.csv and outcomes.jsonl into `dir`.
/// Empty inputs produce header-only files; output is byte-identical for
/// identical inputs.
void emit_reports(const std::filesystem::path& dir, std::span<const TestOutcome> outcomes,
                  std::span<const PairedComparison> comparisons, const RestrictivenessReport* restrictiveness,
                  std::span<const std::string> model_order = {});

void write_pass_rates(const std::filesystem::path& file, std::span<const PassRateRow> rows);
void write_comparisons(const std::filesystem::path& file, std::span<const PairedComparison> rows);
void write_restrictiveness(const std::filesystem::path& summary_file, const std::filesystem::path& rows_file,
                           const RestrictivenessReport& report);
void write_outcomes(const std::filesystem::path& file, std::span<const TestOutcome> outcomes);
std::vector<TestOutcome> read_outcomes(const std::filesystem::path& file);

}  // namespace habitlens
