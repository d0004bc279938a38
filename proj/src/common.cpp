#include "habitlens/error.hpp"
#include "habitlens/types.hpp"

#include <cmath>

namespace habitlens {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::empty_household: return "EmptyHousehold";
    case ErrorCode::inconsistent_record: return "InconsistentRecord";
    case ErrorCode::missing_rate: return "MissingRate";
    case ErrorCode::missing_active_price: return "MissingActivePrice";
    case ErrorCode::missing_price: return "MissingPrice";
    case ErrorCode::degenerate_prices: return "DegeneratePrices";
    case ErrorCode::no_exact_solution: return "NoExactSolution";
    case ErrorCode::too_few_periods: return "TooFewPeriods";
    case ErrorCode::generator_stuck: return "GeneratorStuck";
    case ErrorCode::cannot_violate: return "CannotViolate";
    case ErrorCode::no_data: return "NoData";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

std::vector<double> make_beta_grid(double lo, double hi, double step) {
  if (!(lo > 0.0) || hi > 1.0 || lo > hi || !(step > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "beta grid must satisfy 0 < lo <= hi <= 1 and step > 0");
  }
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  grid.reserve(static_cast<std::size_t>(n) + 1);
  for (long i = 0; i <= n; ++i) {
    const double b = lo + static_cast<double>(i) * step;
    grid.push_back(std::round(b * 1e12) / 1e12);
  }
  return grid;
}

std::vector<double> default_beta_grid() { return make_beta_grid(0.950, 1.000, 0.001); }

}  // namespace habitlens
