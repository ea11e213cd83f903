#pragma once

#include <stdexcept>
#include <string>

namespace sqv {

enum class Errc {
  invalid_argument,
  invalid_direction,
  empty_measure,
  dimension_mismatch,
  resource_limit,
  invalid_grid,
  insufficient_data,
  domain_error,
  out_of_range,
  degenerate_spectrum,
  undefined_estimate,
  degenerate_increment,
  empty_sample,
  non_finite,
  parse_error,
  config_error,
  io_error,
};

const char* errc_name(Errc code) noexcept;

// Single exception type for the toolkit; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sqv
