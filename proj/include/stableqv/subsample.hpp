#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stableqv/linalg.hpp"
#include "stableqv/simulate.hpp"

namespace sqv {

/// Block/coarsening parameters on the unit horizon.
struct SubsampleConfig {
  std::size_t M = 16;  // number of blocks
  std::size_t k = 16;  // coarsening factor
  double p = -0.25;    // moment exponent of the ratio estimator
  double step = 0.0;

  /// Throws config_error listing every violated condition.
  void validate() const;
  /// M = k = largest power of two <= floor(step^{-1/4}).
  static SubsampleConfig defaults(double step);

  nlohmann::json to_json() const;
  static SubsampleConfig from_json(const nlohmann::json& j);
};

/// Grid index ranges [first, last] of the M blocks ((m-1)/M, m/M]. An
/// increment belongs to a block when both of its endpoints do.
std::vector<std::pair<std::size_t, std::size_t>> block_ranges(const GridPath& grid,
                                                              std::size_t M);

/// z(step)_m: realised QV of the increments inside block m.
std::vector<SymMatrix> block_qv(const GridPath& grid, std::size_t M);

/// Ratio estimator of beta from the mean p-th power of 2-step and 1-step
/// increment norms, clamped to [0.05, 1.99].
double beta_hat(const GridPath& grid, double p);
double beta_from_ratio(double r, double p);

/// A smooth functional f of a symmetric matrix.
struct Functional {
  enum class Kind { lambda_max, trace, entry };
  Kind kind = Kind::trace;
  std::size_t i = 0, j = 0;

  double operator()(const SymMatrix& a) const;
  std::string name() const;
  /// "lambda_max", "trace" or "entry(i,j)".
  static Functional parse(const std::string& text);
};

struct SubsampleReport {
  SubsampleConfig config;
  double beta_hat_global = 0.0;
  std::vector<double> beta_hat_blocks;  // NaN where the block saw no movement
  std::vector<SymMatrix> zetas;
  std::optional<std::vector<double>> functional_samples;
  std::vector<std::pair<double, double>> quantiles;  // (level, value)

  nlohmann::json to_json() const;
};

/// zeta_m = dhat_m(k step) M^{1/beta_m} (z(k step)_m - z(step)_m) with beta_m
/// estimated from block m alone. With a functional, also records
/// dhat_m(k step) M^{1/beta_m} (f(z(k step)_m) - f(z(step)_m)).
SubsampleReport zeta_stats(const GridPath& grid, const SubsampleConfig& cfg,
                           const std::optional<Functional>& f = std::nullopt);

/// Fraction of samples in the set.
double empirical_law(const std::vector<SymMatrix>& zetas,
                     const std::function<bool(const SymMatrix&)>& set);
/// Empirical CDF at w.
double empirical_law(const std::vector<double>& samples, double w);

struct ConfidenceInterval {
  double estimate = 0.0;  // f(realised QV at 1)
  double lower = 0.0;
  double upper = 0.0;
  SubsampleReport report;

  bool contains(double v) const { return lower <= v && v <= upper; }
};

/// Two-sided level-(1 - alpha) interval for f([L]_1):
/// [f_n - q_{1-alpha/2} / dhat(step), f_n - q_{alpha/2} / dhat(step)].
ConfidenceInterval confidence_interval(const GridPath& grid, const SubsampleConfig& cfg,
                                       const Functional& f, double alpha);

}  // namespace sqv
