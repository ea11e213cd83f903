#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stableqv/linalg.hpp"
#include "stableqv/measures.hpp"
#include "stableqv/rng.hpp"
#include "stableqv/simulate.hpp"

namespace sqv {

/// x (.) y = x y^T + y x^T.
SymMatrix sym_tensor(std::span<const double> x, std::span<const double> y);

struct MatrixAtom {
  SymMatrix direction;
  double weight;
};

/// Law of the limit process U: a symmetric beta-stable Levy process on the
/// symmetric d x d matrices with Levy measure
///   nu_U(B) = 1/(2 beta) int mu(dz) int 1_B(rho z) rho^{-1-beta} drho,
/// where mu lives on the unit Frobenius sphere and is the image of
/// (2 (1 + <t1, t2>^2))^{beta/2} H(dt1) H(dt2) under (t1, t2) -> t1 (.) t2 / |t1 (.) t2|.
class LimitSpec {
 public:
  explicit LimitSpec(StableLevySpec base, std::uint64_t mc_seed = 0x5EED5EEDULL,
                     std::size_t mc_pairs = 1'000'000);

  const StableLevySpec& base() const noexcept { return base_; }
  double beta() const noexcept { return base_.beta; }
  std::size_t dim() const noexcept { return base_.dim(); }

  double mu_mass() const noexcept { return mu_mass_; }
  /// Monte Carlo standard error of mu_mass (0 for atomic H).
  double mu_mass_stderr() const noexcept { return mu_mass_stderr_; }

  /// Exact atoms of mu for atomic H (one per ordered pair of H-atoms); empty
  /// for the uniform sphere.
  const std::vector<MatrixAtom>& atoms() const noexcept { return atoms_; }

  /// Direction drawn from mu / mu(S): unit Frobenius norm, rank <= 2.
  SymMatrix sample_direction(Rng& rng) const;

  /// int p(z) p(z)^T mu(dz) with p the packed upper triangle; drives the
  /// Gaussian stand-in for the jumps of U below the truncation level.
  const SymMatrix& packed_second_moment() const noexcept { return packed_moment_; }

  /// mu(B) for a set of unit directions: exact for atomic H, Monte Carlo
  /// with `mc_pairs` pairs otherwise.
  double mu_of(const std::function<bool(const SymMatrix&)>& set) const;

 private:
  void pair_direction(std::span<const double> t1, std::span<const double> t2, SymMatrix& z,
                      double& weight) const;

  StableLevySpec base_;
  std::uint64_t mc_seed_;
  std::size_t mc_pairs_;
  double mu_mass_ = 0.0;
  double mu_mass_stderr_ = 0.0;
  std::vector<MatrixAtom> atoms_;
  std::vector<double> cumulative_;
  SymMatrix packed_moment_;
};

LimitSpec mu_mass_and_sampler(const StableLevySpec& base);

/// Atoms of the unnormalized representation mu'(z) = int 1_z(t1 (.) t2) H(dt1) H(dt2)
/// for atomic H, with coinciding tensors merged.
std::vector<MatrixAtom> mu_prime_atoms(const DirectionalMeasure& h);

/// nu_U({rho z : z in B, rho > w}) = mu(B) w^{-beta} / (2 beta^2).
double nu_U_tail(const LimitSpec& limit, const std::function<bool(const SymMatrix&)>& set,
                 double w);

/// The jumps of U on (0, t] with Frobenius norm >= eps, from the series
/// rho_i = (2 beta^2 Gamma_i / (t mu(S)))^{-1/beta}.
struct LimitJumps {
  double horizon = 0.0;
  double eps = 0.0;
  std::vector<double> times;
  std::vector<double> radii;
  std::vector<SymMatrix> directions;

  std::size_t size() const noexcept { return times.size(); }
};

struct LimitSampleOptions {
  // Replace the jumps below eps by a Gaussian matrix with the same covariance.
  bool gaussian_residual = true;
  double max_expected_jumps = 1e8;
};

double expected_limit_jumps(const LimitSpec& limit, double t, double eps);

/// eps at which the series for U_t has `jump_budget` expected jumps.
double limit_truncation(const LimitSpec& limit, double t, double jump_budget = 1000.0);

LimitJumps draw_limit_jumps(const LimitSpec& limit, double t, double eps, Rng& rng,
                            double max_expected_jumps = 1e8);

/// Covariance (packed coordinates) of the discarded jumps of U over a time
/// span of length `length`.
SymMatrix limit_residual_covariance(const LimitSpec& limit, double length, double eps);

SymMatrix sample_U(const LimitSpec& limit, double t, double eps, Rng& rng,
                   const LimitSampleOptions& options = {});

/// int_0^t sigma_{s-} dU_s sigma_{s-}^T for a step volatility path independent of U.
SymMatrix conditional_limit_sample(const VolPath& vol, const LimitSpec& limit, double t,
                                   double eps, Rng& rng, const LimitSampleOptions& options = {});

/// Jump part of the conditional limit restricted to jump times in (t0, t1].
SymMatrix conditional_limit_from_jumps(const VolPath& vol, const LimitJumps& jumps, double t0,
                                       double t1);

}  // namespace sqv
