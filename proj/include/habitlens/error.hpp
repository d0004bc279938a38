#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace habitlens {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  empty_household,
  inconsistent_record,
  missing_rate,
  missing_active_price,
  missing_price,
  degenerate_prices,
  no_exact_solution,
  too_few_periods,
  generator_stuck,
  cannot_violate,
  no_data,
  parse_error,
  io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above so
/// that drivers can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace habitlens
