#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "stableqv/linalg.hpp"
#include "stableqv/simulate.hpp"

namespace sqv {

/// Realised QV along the grid: values[i] = sum_{j <= i} (Delta_j Y)(Delta_j Y)^T,
/// values[0] = 0.
struct QVEstimate {
  double step = 0.0;
  std::vector<SymMatrix> values;
  std::optional<double> beta_used;

  const SymMatrix& final() const { return values.back(); }
};

QVEstimate realised_qv(const GridPath& grid);

/// Realised QV over the first `upto` increments (all of them by default).
SymMatrix realised_qv_total(const GridPath& grid);
SymMatrix realised_qv_total(const GridPath& grid, std::size_t upto);

/// [L]_t: sum of jump outer products with t_j <= t. When the path carries a
/// small-jump residual its mean QV, t * rate, is added.
SymMatrix true_qv(const JumpPath& path, double t);
/// [X]_t for X = int sigma_{s-} dL_s.
SymMatrix true_qv(const IntegralPath& path, double t);

/// delta_n = (step log(1/step))^{-1/beta}; defined for step in (0, 1).
double rate_delta(double step, double beta);

/// U^n_t = delta_n ([L]^n_t - [L]_{step floor(t/step)}) sampled on the grid.
struct ErrorProcess {
  double step = 0.0;
  double rate = 0.0;
  std::vector<SymMatrix> values;  // values[i] at time i * step

  const SymMatrix& final() const { return values.back(); }
};

ErrorProcess error_process(const JumpPath& path, double step, double beta);
ErrorProcess error_process(const IntegralPath& path, double beta);

/// U^n at the last grid time, without materializing the whole process.
SymMatrix error_at_end(const JumpPath& path, double step, double beta);
SymMatrix error_at_end(const IntegralPath& path, double beta);

/// Columns: t, then the packed upper triangle (q1_1 q1_2 .. q1_d q2_2 ..).
void write_qv(std::ostream& out, const QVEstimate& qv);

}  // namespace sqv
