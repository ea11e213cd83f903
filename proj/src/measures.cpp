#include "stableqv/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "stableqv/error.hpp"

namespace sqv {
namespace {

constexpr double kSameDirectionTol = 1e-12;

bool same_direction(std::span<const double> a, std::span<const double> b, double sign) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - sign * b[i]) > kSameDirectionTol) return false;
  return true;
}

}  // namespace

double sphere_area(std::size_t d) {
  if (d == 0) throw Error(Errc::invalid_argument, "sphere_area: d must be >= 1");
  const double half = 0.5 * static_cast<double>(d);
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

DirectionalMeasure DirectionalMeasure::atomic(
    const std::vector<std::pair<Vec, double>>& pairs) {
  if (pairs.empty()) throw Error(Errc::empty_measure, "no atoms given");
  const std::size_t d = pairs.front().first.size();
  if (d == 0) throw Error(Errc::invalid_direction, "zero-dimensional direction");

  std::vector<Atom> merged;
  for (const auto& [raw, w] : pairs) {
    if (raw.size() != d) {
      throw Error(Errc::dimension_mismatch, "atoms have different dimensions");
    }
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(Errc::invalid_argument, "atom weights must be finite and > 0");
    }
    const double n = norm(raw);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(Errc::invalid_direction, "zero or non-finite direction vector");
    }
    Vec dir = raw;
    // Leave already-unit vectors bit-for-bit intact so serialization round-trips.
    if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
      for (double& x : dir) x /= n;
    }
    auto it = std::find_if(merged.begin(), merged.end(), [&](const Atom& a) {
      return same_direction(a.direction, dir, 1.0);
    });
    if (it != merged.end()) {
      it->weight += w;
    } else {
      merged.push_back({std::move(dir), w});
    }
  }

  const std::size_t given = merged.size();
  for (std::size_t i = 0; i < given; ++i) {
    auto mirror = std::find_if(merged.begin(), merged.end(), [&](const Atom& a) {
      return same_direction(a.direction, merged[i].direction, -1.0);
    });
    if (mirror == merged.end()) {
      Vec neg = merged[i].direction;
      for (double& x : neg) x = -x;
      merged.push_back({std::move(neg), merged[i].weight});
    } else if (mirror->weight != merged[i].weight) {
      const double mean = 0.5 * (mirror->weight + merged[i].weight);
      mirror->weight = mean;
      merged[i].weight = mean;
    }
  }

  DirectionalMeasure h;
  h.kind_ = Kind::atomic;
  h.dim_ = d;
  h.atoms_ = std::move(merged);
  double run = 0.0;
  for (const auto& a : h.atoms_) {
    run += a.weight;
    h.cumulative_.push_back(run);
  }
  h.total_mass_ = run;
  return h;
}

DirectionalMeasure DirectionalMeasure::uniform_sphere(std::size_t d, double density) {
  if (d == 0) throw Error(Errc::invalid_argument, "uniform sphere needs d >= 1");
  if (!(density > 0.0) || !std::isfinite(density)) {
    throw Error(Errc::empty_measure, "uniform sphere density must be finite and > 0");
  }
  DirectionalMeasure h;
  h.kind_ = Kind::uniform_sphere;
  h.dim_ = d;
  h.density_ = density;
  h.total_mass_ = density * sphere_area(d);
  return h;
}

void DirectionalMeasure::sample_direction(Rng& rng, std::span<double> out) const {
  if (out.size() != dim_) throw Error(Errc::dimension_mismatch, "sample_direction");
  if (kind_ == Kind::atomic) {
    const double u = rng.uniform() * total_mass_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const std::size_t k = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative_.begin()), atoms_.size() - 1);
    std::copy(atoms_[k].direction.begin(), atoms_[k].direction.end(), out.begin());
    return;
  }
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : out) {
      x = rng.normal();
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : out) x *= inv;
}

Vec DirectionalMeasure::sample_direction(Rng& rng) const {
  Vec v(dim_);
  sample_direction(rng, v);
  return v;
}

SymMatrix DirectionalMeasure::second_moment() const {
  if (kind_ == Kind::uniform_sphere) {
    SymMatrix m = SymMatrix::identity(dim_);
    m *= total_mass_ / static_cast<double>(dim_);
    return m;
  }
  SymMatrix m(dim_);
  for (const auto& a : atoms_) m.add_outer(a.direction, a.weight);
  return m;
}

bool DirectionalMeasure::spans_space() const {
  if (kind_ == Kind::uniform_sphere) return true;
  Eigen::MatrixXd theta(atoms_.size(), dim_);
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    for (std::size_t j = 0; j < dim_; ++j) theta(i, j) = atoms_[i].direction[j];
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(theta);
  const auto& s = svd.singularValues();
  if (s.size() < static_cast<Eigen::Index>(dim_)) return false;
  const double cutoff = 1e-10 * s(0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++rank;
  return rank == dim_;
}

nlohmann::json DirectionalMeasure::to_json() const {
  if (kind_ == Kind::uniform_sphere) {
    return {{"type", "uniform"}, {"d", dim_}, {"a", density_}};
  }
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : atoms_) atoms.push_back({{"dir", a.direction}, {"w", a.weight}});
  return {{"type", "atomic"}, {"atoms", atoms}};
}

DirectionalMeasure DirectionalMeasure::from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "uniform") {
      return uniform_sphere(j.at("d").get<std::size_t>(), j.at("a").get<double>());
    }
    if (type == "atomic") {
      std::vector<std::pair<Vec, double>> pairs;
      for (const auto& a : j.at("atoms")) {
        pairs.emplace_back(a.at("dir").get<Vec>(), a.at("w").get<double>());
      }
      return atomic(pairs);
    }
    throw Error(Errc::parse_error, "unknown measure type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("measure block: ") + e.what());
  }
}

DirectionalMeasure make_atomic_H(const std::vector<std::pair<Vec, double>>& pairs) {
  return DirectionalMeasure::atomic(pairs);
}

DirectionalMeasure make_uniform_H(std::size_t d, double density) {
  return DirectionalMeasure::uniform_sphere(d, density);
}

DirectionalMeasure make_iid_H(std::size_t d, double a) {
  std::vector<std::pair<Vec, double>> pairs;
  for (std::size_t i = 0; i < d; ++i) {
    Vec e(d, 0.0);
    e[i] = 1.0;
    pairs.emplace_back(std::move(e), a);
  }
  return make_atomic_H(pairs);
}

double total_mass(const DirectionalMeasure& h) { return h.total_mass(); }

Vec sample_direction(const DirectionalMeasure& h, Rng& rng) {
  return h.sample_direction(rng);
}

bool span_check(const DirectionalMeasure& h) { return h.spans_space(); }

StableLevySpec::StableLevySpec(double beta_, DirectionalMeasure measure_)
    : beta(beta_), measure(std::move(measure_)) {
  if (!(beta > 0.0 && beta < 2.0)) {
    throw Error(Errc::invalid_argument, "beta must lie in (0, 2)");
  }
}

nlohmann::json StableLevySpec::to_json() const {
  return {{"beta", beta}, {"measure", measure.to_json()}};
}

StableLevySpec StableLevySpec::from_json(const nlohmann::json& j) {
  try {
    return StableLevySpec(j.at("beta").get<double>(),
                          DirectionalMeasure::from_json(j.at("measure")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("spec block: ") + e.what());
  }
}

}  // namespace sqv
