#include "stableqv/error.hpp"

namespace sqv {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invalid_direction: return "invalid-direction";
    case Errc::empty_measure: return "empty-measure";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::resource_limit: return "resource-limit";
    case Errc::invalid_grid: return "invalid-grid";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::domain_error: return "domain-error";
    case Errc::out_of_range: return "out-of-range";
    case Errc::degenerate_spectrum: return "degenerate-spectrum";
    case Errc::undefined_estimate: return "undefined-estimate";
    case Errc::degenerate_increment: return "degenerate-increment";
    case Errc::empty_sample: return "empty-sample";
    case Errc::non_finite: return "non-finite";
    case Errc::parse_error: return "parse-error";
    case Errc::config_error: return "config-error";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

}  // namespace sqv
