#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stableqv/linalg.hpp"
#include "stableqv/rng.hpp"

namespace sqv {

struct Atom {
  Vec direction;  // unit vector
  double weight;  // > 0
};

/// Finite symmetric measure H on the unit sphere S_d: the angular part of the
/// Levy measure G(dx) = rho^{-1-beta} drho H(dtheta).
///
/// Either a finite list of atoms (closed under negation) or a constant
/// density `a` against surface measure. Immutable once built.
class DirectionalMeasure {
 public:
  enum class Kind { atomic, uniform_sphere };

  /// Builds an atomic measure from (direction, weight) pairs: directions are
  /// normalized, duplicates merged by summing weights, and missing mirror
  /// atoms (-theta, w) are appended. An atom whose mirror is present with a
  /// different weight has both weights replaced by their mean.
  static DirectionalMeasure atomic(const std::vector<std::pair<Vec, double>>& pairs);
  static DirectionalMeasure uniform_sphere(std::size_t d, double density);

  Kind kind() const noexcept { return kind_; }
  bool is_atomic() const noexcept { return kind_ == Kind::atomic; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  double density() const noexcept { return density_; }

  double total_mass() const noexcept { return total_mass_; }

  /// Draws a direction from H / H(S_d) into `out` (size dim()).
  void sample_direction(Rng& rng, std::span<double> out) const;
  Vec sample_direction(Rng& rng) const;

  /// int theta theta^T H(dtheta).
  SymMatrix second_moment() const;

  bool spans_space() const;

  nlohmann::json to_json() const;
  static DirectionalMeasure from_json(const nlohmann::json& j);

 private:
  DirectionalMeasure() = default;

  Kind kind_ = Kind::atomic;
  std::size_t dim_ = 0;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;  // running atom-weight sums
  double density_ = 0.0;
  double total_mass_ = 0.0;
};

/// Surface area of the unit sphere in R^d, 2 pi^{d/2} / Gamma(d/2).
double sphere_area(std::size_t d);

DirectionalMeasure make_atomic_H(const std::vector<std::pair<Vec, double>>& pairs);
DirectionalMeasure make_uniform_H(std::size_t d, double density);
/// Atoms {+-e_i} with weight a each: the measure of a process with i.i.d.
/// symmetric stable components.
DirectionalMeasure make_iid_H(std::size_t d, double a);

double total_mass(const DirectionalMeasure& h);
Vec sample_direction(const DirectionalMeasure& h, Rng& rng);
bool span_check(const DirectionalMeasure& h);

/// Law of a symmetric beta-stable Levy process with triplet (0, 0, G).
struct StableLevySpec {
  double beta;
  DirectionalMeasure measure;

  StableLevySpec(double beta, DirectionalMeasure measure);

  std::size_t dim() const noexcept { return measure.dim(); }

  nlohmann::json to_json() const;
  static StableLevySpec from_json(const nlohmann::json& j);
};

}  // namespace sqv
