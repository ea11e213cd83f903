#include "stableqv/limitlaw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stableqv/error.hpp"

namespace sqv {
namespace {

Vec packed_vector(const SymMatrix& z) { return Vec(z.packed().begin(), z.packed().end()); }

SymMatrix gaussian_matrix(const SymMatrix& packed_cov, std::size_t d, Rng& rng) {
  const Matrix factor = psd_factor(packed_cov);
  Vec z(packed_cov.dim());
  for (double& x : z) x = rng.normal();
  return SymMatrix::from_packed(d, factor.apply(z));
}

}  // namespace

SymMatrix sym_tensor(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::dimension_mismatch, "sym_tensor");
  SymMatrix m(x.size());
  m.add_sym_tensor(x, y);
  return m;
}

LimitSpec::LimitSpec(StableLevySpec base, std::uint64_t mc_seed, std::size_t mc_pairs)
    : base_(std::move(base)), mc_seed_(mc_seed), mc_pairs_(mc_pairs) {
  const std::size_t d = base_.dim();
  const std::size_t packed = SymMatrix::packed_size(d);
  packed_moment_ = SymMatrix(packed);
  const DirectionalMeasure& h = base_.measure;

  if (h.is_atomic()) {
    double run = 0.0;
    for (const auto& a1 : h.atoms()) {
      for (const auto& a2 : h.atoms()) {
        SymMatrix z;
        double w = 0.0;
        pair_direction(a1.direction, a2.direction, z, w);
        w *= a1.weight * a2.weight;
        run += w;
        packed_moment_.add_outer(packed_vector(z), w);
        atoms_.push_back({std::move(z), w});
        cumulative_.push_back(run);
      }
    }
    mu_mass_ = run;
    return;
  }

  if (mc_pairs_ < 2) throw Error(Errc::invalid_argument, "need at least two Monte Carlo pairs");
  Rng rng(mc_seed_);
  Vec t1(d), t2(d);
  SymMatrix z;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < mc_pairs_; ++i) {
    h.sample_direction(rng, t1);
    h.sample_direction(rng, t2);
    double w = 0.0;
    pair_direction(t1, t2, z, w);
    sum += w;
    sum2 += w * w;
    packed_moment_.add_outer(packed_vector(z), w);
  }
  const double n = static_cast<double>(mc_pairs_);
  const double pair_mass = h.total_mass() * h.total_mass();
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
  mu_mass_ = pair_mass * mean;
  mu_mass_stderr_ = pair_mass * std::sqrt(var / n);
  packed_moment_ *= pair_mass / n;
}

void LimitSpec::pair_direction(std::span<const double> t1, std::span<const double> t2,
                               SymMatrix& z, double& weight) const {
  const double c = dot(t1, t2);
  z = sym_tensor(t1, t2);
  z *= 1.0 / z.frobenius_norm();
  weight = std::pow(2.0 * (1.0 + c * c), 0.5 * base_.beta);
}

SymMatrix LimitSpec::sample_direction(Rng& rng) const {
  if (!atoms_.empty()) {
    const double u = rng.uniform() * mu_mass_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const std::size_t k = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative_.begin()), atoms_.size() - 1);
    return atoms_[k].direction;
  }
  // The pair weight peaks at 2^beta when t1 = +-t2.
  const std::size_t d = dim();
  const double bound = std::pow(2.0, base_.beta);
  Vec t1(d), t2(d);
  SymMatrix z;
  double w = 0.0;
  for (;;) {
    base_.measure.sample_direction(rng, t1);
    base_.measure.sample_direction(rng, t2);
    pair_direction(t1, t2, z, w);
    if (rng.uniform() * bound < w) return z;
  }
}

double LimitSpec::mu_of(const std::function<bool(const SymMatrix&)>& set) const {
  if (!atoms_.empty()) {
    double s = 0.0;
    for (const auto& a : atoms_)
      if (set(a.direction)) s += a.weight;
    return s;
  }
  const std::size_t d = dim();
  Rng rng(splitmix64(mc_seed_));
  Vec t1(d), t2(d);
  SymMatrix z;
  double sum = 0.0;
  for (std::size_t i = 0; i < mc_pairs_; ++i) {
    base_.measure.sample_direction(rng, t1);
    base_.measure.sample_direction(rng, t2);
    double w = 0.0;
    pair_direction(t1, t2, z, w);
    if (set(z)) sum += w;
  }
  const double pair_mass = base_.measure.total_mass() * base_.measure.total_mass();
  return pair_mass * sum / static_cast<double>(mc_pairs_);
}

LimitSpec mu_mass_and_sampler(const StableLevySpec& base) { return LimitSpec(base); }

std::vector<MatrixAtom> mu_prime_atoms(const DirectionalMeasure& h) {
  if (!h.is_atomic()) {
    throw Error(Errc::invalid_argument, "mu' atoms exist only for atomic H");
  }
  std::vector<MatrixAtom> out;
  for (const auto& a1 : h.atoms()) {
    for (const auto& a2 : h.atoms()) {
      SymMatrix z = sym_tensor(a1.direction, a2.direction);
      const double w = a1.weight * a2.weight;
      auto it = std::find_if(out.begin(), out.end(), [&](const MatrixAtom& m) {
        return (m.direction - z).frobenius_norm() <= 1e-12;
      });
      if (it != out.end()) {
        it->weight += w;
      } else {
        out.push_back({std::move(z), w});
      }
    }
  }
  return out;
}

double nu_U_tail(const LimitSpec& limit, const std::function<bool(const SymMatrix&)>& set,
                 double w) {
  if (!(w > 0.0)) throw Error(Errc::invalid_argument, "nu_U_tail needs w > 0");
  if (std::isinf(w)) return 0.0;
  const double b = limit.beta();
  return limit.mu_of(set) * std::pow(w, -b) / (2.0 * b * b);
}

double expected_limit_jumps(const LimitSpec& limit, double t, double eps) {
  const double b = limit.beta();
  return t * limit.mu_mass() * std::pow(eps, -b) / (2.0 * b * b);
}

double limit_truncation(const LimitSpec& limit, double t, double jump_budget) {
  const double b = limit.beta();
  return std::pow(2.0 * b * b * jump_budget / (t * limit.mu_mass()), -1.0 / b);
}

LimitJumps draw_limit_jumps(const LimitSpec& limit, double t, double eps, Rng& rng,
                            double max_expected_jumps) {
  if (!(t > 0.0) || !(eps > 0.0)) {
    throw Error(Errc::invalid_argument, "limit sampling needs t > 0 and eps > 0");
  }
  const double expected = expected_limit_jumps(limit, t, eps);
  if (!(expected <= max_expected_jumps)) {
    throw Error(Errc::resource_limit,
                "expected limit jump count " + std::to_string(expected) + " exceeds the guard");
  }
  const double b = limit.beta();
  const double arrival_scale = 2.0 * b * b / (t * limit.mu_mass());
  LimitJumps out{t, eps, {}, {}, {}};
  double gamma = 0.0;
  for (;;) {
    gamma += rng.exponential();
    const double rho = std::pow(arrival_scale * gamma, -1.0 / b);
    if (rho < eps) break;
    out.radii.push_back(rho);
    out.directions.push_back(limit.sample_direction(rng));
    out.times.push_back(t * rng.uniform_pos());
  }
  return out;
}

SymMatrix limit_residual_covariance(const LimitSpec& limit, double length, double eps) {
  const double b = limit.beta();
  SymMatrix cov = limit.packed_second_moment();
  cov *= length * std::pow(eps, 2.0 - b) / (2.0 * b * (2.0 - b));
  return cov;
}

SymMatrix sample_U(const LimitSpec& limit, double t, double eps, Rng& rng,
                   const LimitSampleOptions& options) {
  const LimitJumps jumps = draw_limit_jumps(limit, t, eps, rng, options.max_expected_jumps);
  SymMatrix acc(limit.dim());
  for (std::size_t i = 0; i < jumps.size(); ++i) acc += jumps.radii[i] * jumps.directions[i];
  if (options.gaussian_residual) {
    acc += gaussian_matrix(limit_residual_covariance(limit, t, eps), limit.dim(), rng);
  }
  return acc;
}

SymMatrix conditional_limit_from_jumps(const VolPath& vol, const LimitJumps& jumps, double t0,
                                       double t1) {
  const std::size_t d = vol.dim();
  SymMatrix acc(d);
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    const double tau = jumps.times[i];
    if (!(tau > t0 && tau <= t1)) continue;
    acc += congruence(vol.left_limit(tau), jumps.radii[i] * jumps.directions[i]);
  }
  return acc;
}

SymMatrix conditional_limit_sample(const VolPath& vol, const LimitSpec& limit, double t,
                                   double eps, Rng& rng, const LimitSampleOptions& options) {
  if (vol.dim() != limit.dim()) {
    throw Error(Errc::dimension_mismatch, "volatility vs limit dimension");
  }
  const LimitJumps jumps = draw_limit_jumps(limit, t, eps, rng, options.max_expected_jumps);
  SymMatrix acc = conditional_limit_from_jumps(vol, jumps, 0.0, t);
  if (options.gaussian_residual) {
    for (std::size_t k = 0; k < vol.starts.size() && vol.starts[k] < t; ++k) {
      const double end = k + 1 < vol.starts.size() ? std::min(vol.starts[k + 1], t) : t;
      const double length = end - vol.starts[k];
      if (!(length > 0.0)) continue;
      const SymMatrix g =
          gaussian_matrix(limit_residual_covariance(limit, length, eps), limit.dim(), rng);
      acc += congruence(vol.matrices[k], g);
    }
  }
  return acc;
}

}  // namespace sqv
