#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "stableqv/linalg.hpp"
#include "stableqv/measures.hpp"
#include "stableqv/rng.hpp"

namespace sqv {

/// Gaussian stand-in for the jumps below the truncation level: independent
/// N(0, step * rate) increments on a regular grid covering [0, T].
struct SmallJumpResidual {
  double step = 0.0;
  SymMatrix rate;                  // eps^{2-beta}/(2-beta) * int theta theta^T dH
  std::vector<double> increments;  // count() x d, row-major

  std::size_t count(std::size_t d) const { return increments.size() / d; }
};

/// A simulated path of L on (0, T]: every jump with norm >= eps, sorted by
/// time, plus truncation metadata. L_t is the sum of jumps with t_j <= t
/// (and of the residual increments when one is attached).
struct JumpPath {
  StableLevySpec spec;
  double horizon = 0.0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;  // strictly increasing, in (0, horizon]
  std::vector<double> jumps;  // size() x dim(), row-major
  double expected_jumps = 0.0;     // T H(S_d) eps^{-beta} / beta
  double truncated_qv_mass = 0.0;  // T H(S_d) eps^{2-beta} / (2-beta)
  std::optional<SmallJumpResidual> residual;

  std::size_t dim() const noexcept { return spec.dim(); }
  std::size_t size() const noexcept { return times.size(); }
  std::span<const double> jump(std::size_t i) const {
    return {jumps.data() + i * dim(), dim()};
  }
};

struct SimulationOptions {
  // > 0 attaches a SmallJumpResidual on this step; must divide every
  // observation step later passed to path_values.
  double residual_step = 0.0;
  double max_expected_jumps = 1e8;
};

/// Series representation: radii rho_i = (beta Gamma_i / (T H(S_d)))^{-1/beta}
/// for unit-rate Poisson arrivals Gamma_i, kept while rho_i >= eps; i.i.d.
/// directions from H / H(S_d); i.i.d. uniform times on (0, T].
JumpPath simulate_levy_path(const StableLevySpec& spec, double horizon, double eps,
                            Rng& rng, const SimulationOptions& options = {});

double expected_jump_count(const StableLevySpec& spec, double horizon, double eps);
double truncated_qv_mass(const StableLevySpec& spec, double horizon, double eps);

/// eps = kappa * step^{1/beta}: truncation tied to the observation scale.
double grid_truncation(double beta, double step, double kappa = 0.5);

/// Smallest eps whose truncated QV mass T H eps^{2-beta}/(2-beta) stays below
/// `budget`.
double qv_budget_truncation(const StableLevySpec& spec, double horizon, double budget);

/// Observations on a regular grid: values at i * step, i = 0..n, n = floor(T/step).
struct GridPath {
  double step = 0.0;
  std::size_t dim = 0;
  std::vector<double> values;  // (n + 1) x dim

  std::size_t points() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::size_t increments() const noexcept { return points() == 0 ? 0 : points() - 1; }
  std::span<const double> value(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  Vec increment(std::size_t i) const;  // value(i) - value(i - 1), i >= 1
  // Coarser grid keeping every k-th point.
  GridPath subsample(std::size_t k) const;
  GridPath scaled(double c) const;
};

std::size_t grid_count(double horizon, double step);

GridPath path_values(const JumpPath& path, double step);

/// Volatility driving X = int sigma_{s-} dL_s; independent of L.
struct VolatilitySpec {
  struct Constant {
    Matrix sigma;
  };
  /// Piece k holds on [starts[k], starts[k+1]); starts[0] == 0.
  struct PiecewiseConstant {
    std::vector<double> starts;
    std::vector<Matrix> matrices;
  };
  /// Diagonal volatility with independent Ornstein-Uhlenbeck entries started
  /// at `level`, held constant between observation times.
  struct OrnsteinUhlenbeckDiagonal {
    double rate;
    double level;
    double vol;
  };

  std::variant<Constant, PiecewiseConstant, OrnsteinUhlenbeckDiagonal> model;

  nlohmann::json to_json() const;
  static VolatilitySpec from_json(const nlohmann::json& j, std::size_t d);
};

/// A realized right-continuous step path of sigma.
struct VolPath {
  std::vector<double> starts;
  std::vector<Matrix> matrices;

  std::size_t dim() const { return matrices.empty() ? 0 : matrices.front().rows(); }
  const Matrix& at(double t) const;          // sigma_t
  const Matrix& left_limit(double t) const;  // sigma_{t-}
  static VolPath constant(const Matrix& sigma);
};

struct IntegralPath {
  JumpPath levy;
  VolPath vol;
  std::vector<double> jumps;  // sigma(t_j-) dL_j, row-major, aligned with levy.times
  GridPath values;            // X on the observation grid

  std::size_t dim() const noexcept { return levy.dim(); }
};

IntegralPath simulate_integral_path(const StableLevySpec& spec, const VolatilitySpec& vol,
                                    double horizon, double eps, double step, Rng& rng,
                                    const SimulationOptions& options = {});

/// Builds the integral of a given step volatility against an existing path.
IntegralPath integrate_path(const JumpPath& levy, VolPath vol, double step);

// Columnar text export: '#' header lines (spec, horizon, eps, seed, residual
// metadata), one row "t dL_1 .. dL_d" per jump, then residual rows. Numbers
// are written with 17 significant digits so re-import is exact.
void write_path(std::ostream& out, const JumpPath& path);
JumpPath read_path(std::istream& in);

}  // namespace sqv
