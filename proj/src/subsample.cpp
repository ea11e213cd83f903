#include "stableqv/subsample.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "stableqv/error.hpp"
#include "stableqv/qv.hpp"
#include "stableqv/spectral.hpp"
#include "stableqv/stats.hpp"

namespace sqv {
namespace {

constexpr double kBetaMin = 0.05;
constexpr double kBetaMax = 1.99;

GridPath slice(const GridPath& grid, std::size_t first, std::size_t last) {
  GridPath g{grid.step, grid.dim, {}};
  g.values.assign(grid.values.begin() + static_cast<std::ptrdiff_t>(first * grid.dim),
                  grid.values.begin() + static_cast<std::ptrdiff_t>((last + 1) * grid.dim));
  return g;
}

double dhat(double step, double beta) {
  return std::pow(step * std::log(1.0 / step), -1.0 / beta);
}

bool is_zero(const SymMatrix& a) {
  for (double v : a.packed())
    if (v != 0.0) return false;
  return true;
}

}  // namespace

void SubsampleConfig::validate() const {
  std::vector<std::string> bad;
  if (M < 2) bad.push_back("M must be >= 2");
  if (k < 1) bad.push_back("k must be >= 1");
  if (!(p > -0.5 && p < 0.0)) bad.push_back("p must lie in (-1/2, 0)");
  if (!(step > 0.0 && step < 1.0)) {
    bad.push_back("step must lie in (0, 1)");
  } else if (M >= 1 && k >= 1) {
    const double md = static_cast<double>(M) * step;
    if (std::floor(1.0 / md * (1.0 + 1e-12)) < 2.0 * static_cast<double>(k))
      bad.push_back("each block needs at least two coarse increments (floor(1/(M step)) >= 2k)");
    if (!(static_cast<double>(k) * md < 0.1)) bad.push_back("k M step must be < 0.1");
  }
  if (bad.empty()) return;
  std::string msg = "invalid subsample config:";
  for (const auto& b : bad) msg += " " + b + ";";
  throw Error(Errc::config_error, msg);
}

SubsampleConfig SubsampleConfig::defaults(double step) {
  if (!(step > 0.0 && step < 1.0)) throw Error(Errc::invalid_grid, "step must lie in (0, 1)");
  const double root = std::floor(std::pow(step, -0.25) * (1.0 + 1e-12));
  std::size_t m = 1;
  while (static_cast<double>(2 * m) <= root) m *= 2;
  SubsampleConfig cfg;
  cfg.M = m;
  cfg.k = m;
  cfg.step = step;
  return cfg;
}

nlohmann::json SubsampleConfig::to_json() const {
  return {{"M", M}, {"k", k}, {"p", p}, {"step", step}};
}

SubsampleConfig SubsampleConfig::from_json(const nlohmann::json& j) {
  SubsampleConfig cfg;
  if (j.contains("step")) {
    cfg = defaults(j.at("step").get<double>());
  }
  if (j.contains("M")) cfg.M = j.at("M").get<std::size_t>();
  if (j.contains("k")) cfg.k = j.at("k").get<std::size_t>();
  if (j.contains("p")) cfg.p = j.at("p").get<double>();
  return cfg;
}

std::vector<std::pair<std::size_t, std::size_t>> block_ranges(const GridPath& grid,
                                                              std::size_t M) {
  if (M == 0) throw Error(Errc::invalid_argument, "M must be >= 1");
  if (!(grid.step > 0.0)) throw Error(Errc::invalid_grid, "grid step must be > 0");
  const std::size_t n = std::min(grid.increments(), grid_count(1.0, grid.step));
  if (n < M) throw Error(Errc::insufficient_data, "fewer increments than blocks");
  const double per_block = 1.0 / (static_cast<double>(M) * grid.step);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    const double lo = per_block * static_cast<double>(m);
    const double hi = per_block * static_cast<double>(m + 1);
    const auto first = static_cast<std::size_t>(std::ceil(lo - 1e-9 * per_block));
    const auto last = std::min(n, static_cast<std::size_t>(std::floor(hi + 1e-9 * per_block)));
    if (last <= first) {
      throw Error(Errc::insufficient_data, "block " + std::to_string(m + 1) + " holds no increment");
    }
    out.emplace_back(first, last);
  }
  return out;
}

std::vector<SymMatrix> block_qv(const GridPath& grid, std::size_t M) {
  std::vector<SymMatrix> out;
  for (const auto& [first, last] : block_ranges(grid, M)) {
    SymMatrix z(grid.dim);
    for (std::size_t i = first + 1; i <= last; ++i) z.add_outer(grid.increment(i));
    out.push_back(std::move(z));
  }
  return out;
}

double beta_from_ratio(double r, double p) {
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(Errc::undefined_estimate, "ratio must be finite and > 0");
  if (std::abs(r - 1.0) < 1e-12) throw Error(Errc::undefined_estimate, "ratio is 1 to within 1e-12");
  const double b = p * std::log(2.0) / std::log(r);
  return std::clamp(b, kBetaMin, kBetaMax);
}

double beta_hat(const GridPath& grid, double p) {
  if (!(p > -0.5 && p < 0.0)) throw Error(Errc::invalid_argument, "p must lie in (-1/2, 0)");
  if (grid.points() < 3) throw Error(Errc::insufficient_data, "beta_hat needs >= 3 grid values");
  const std::size_t d = grid.dim;
  const std::size_t n = grid.increments();
  double one = 0.0, two = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    double s1 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double x = grid.values[i * d + c] - grid.values[(i - 1) * d + c];
      s1 += x * x;
    }
    if (s1 == 0.0) {
      throw Error(Errc::degenerate_increment, "zero increment at index " + std::to_string(i));
    }
    one += std::pow(s1, 0.5 * p);
    if (i >= 2) {
      double s2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double x = grid.values[i * d + c] - grid.values[(i - 2) * d + c];
        s2 += x * x;
      }
      if (s2 == 0.0) {
        throw Error(Errc::degenerate_increment, "zero 2-step increment at index " + std::to_string(i));
      }
      two += std::pow(s2, 0.5 * p);
    }
  }
  const double r = (two / static_cast<double>(n - 1)) / (one / static_cast<double>(n));
  return beta_from_ratio(r, p);
}

double Functional::operator()(const SymMatrix& a) const {
  switch (kind) {
    case Kind::lambda_max:
      return lambda_max(a);
    case Kind::trace:
      return a.trace();
    case Kind::entry:
      if (i >= a.dim() || j >= a.dim()) throw Error(Errc::out_of_range, "entry index");
      return a(i, j);
  }
  return 0.0;
}

std::string Functional::name() const {
  switch (kind) {
    case Kind::lambda_max:
      return "lambda_max";
    case Kind::trace:
      return "trace";
    case Kind::entry:
      return "entry(" + std::to_string(i) + "," + std::to_string(j) + ")";
  }
  return {};
}

Functional Functional::parse(const std::string& text) {
  if (text == "lambda_max") return {Kind::lambda_max};
  if (text == "trace") return {Kind::trace};
  std::size_t i = 0, j = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "entry(%zu,%zu%c", &i, &j, &tail) == 3 && tail == ')') {
    return {Kind::entry, i, j};
  }
  throw Error(Errc::parse_error, "unknown functional '" + text + "'");
}

SubsampleReport zeta_stats(const GridPath& grid, const SubsampleConfig& cfg,
                           const std::optional<Functional>& f) {
  cfg.validate();
  if (std::abs(grid.step - cfg.step) > 1e-12 * cfg.step) {
    throw Error(Errc::invalid_grid, "grid step differs from the config step");
  }
  SubsampleReport rep;
  rep.config = cfg;
  // A path that never moves has no scale to estimate; its zetas are all zero.
  rep.beta_hat_global = is_zero(realised_qv_total(grid))
                            ? std::numeric_limits<double>::quiet_NaN()
                            : beta_hat(grid, cfg.p);
  if (f) rep.functional_samples.emplace();

  const double coarse = static_cast<double>(cfg.k) * cfg.step;
  const double M = static_cast<double>(cfg.M);
  const auto ranges = block_ranges(grid, cfg.M);
  for (std::size_t m = 0; m < ranges.size(); ++m) {
    const GridPath block = slice(grid, ranges[m].first, ranges[m].second);
    const SymMatrix fine = realised_qv_total(block);
    const SymMatrix coarse_qv = realised_qv_total(block.subsample(cfg.k));
    const SymMatrix diff = coarse_qv - fine;
    if (is_zero(diff)) {
      // Nothing moved (or k = 1): the statistic is zero whatever beta is.
      rep.beta_hat_blocks.push_back(std::numeric_limits<double>::quiet_NaN());
      rep.zetas.emplace_back(grid.dim);
      if (f) rep.functional_samples->push_back(0.0);
      continue;
    }
    double b = 0.0;
    try {
      b = beta_hat(block, cfg.p);
    } catch (const Error& e) {
      throw Error(e.code(), "block " + std::to_string(m + 1) + ": " + e.what());
    }
    const double scale = dhat(coarse, b) * std::pow(M, 1.0 / b);
    rep.beta_hat_blocks.push_back(b);
    rep.zetas.push_back(scale * diff);
    if (f) rep.functional_samples->push_back(scale * ((*f)(coarse_qv) - (*f)(fine)));
  }
  return rep;
}

double empirical_law(const std::vector<SymMatrix>& zetas,
                     const std::function<bool(const SymMatrix&)>& set) {
  if (zetas.empty()) throw Error(Errc::empty_sample, "empirical law of an empty sample");
  std::size_t hits = 0;
  for (const auto& z : zetas)
    if (set(z)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(zetas.size());
}

double empirical_law(const std::vector<double>& samples, double w) {
  if (samples.empty()) throw Error(Errc::empty_sample, "empirical law of an empty sample");
  std::size_t hits = 0;
  for (double v : samples)
    if (v <= w) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

ConfidenceInterval confidence_interval(const GridPath& grid, const SubsampleConfig& cfg,
                                       const Functional& f, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(Errc::out_of_range, "alpha must lie in (0, 1)");
  }
  const SymMatrix qv = realised_qv_total(grid, std::min(grid.increments(), grid_count(1.0, grid.step)));
  if (f.kind == Functional::Kind::lambda_max) {
    const EigenSystem eig = eigen_sorted(qv);
    if (!(eig.gap > degenerate_gap_threshold(eig))) {
      throw Error(Errc::degenerate_spectrum, "realised QV has a repeated top eigenvalue");
    }
  }
  ConfidenceInterval ci;
  ci.report = zeta_stats(grid, cfg, f);
  ci.estimate = f(qv);
  std::vector<double> sorted = *ci.report.functional_samples;
  std::sort(sorted.begin(), sorted.end());
  const double q_lo = quantile_sorted(sorted, 0.5 * alpha);
  const double q_hi = quantile_sorted(sorted, 1.0 - 0.5 * alpha);
  ci.report.quantiles = {{0.5 * alpha, q_lo}, {1.0 - 0.5 * alpha, q_hi}};
  const double rate = dhat(cfg.step, ci.report.beta_hat_global);
  ci.lower = ci.estimate - q_hi / rate;
  ci.upper = ci.estimate - q_lo / rate;
  return ci;
}

nlohmann::json SubsampleReport::to_json() const {
  nlohmann::json j;
  j["config"] = config.to_json();
  if (std::isnan(beta_hat_global)) {
    j["beta_hat_global"] = nullptr;
  } else {
    j["beta_hat_global"] = beta_hat_global;
  }
  auto& blocks = j["beta_hat_blocks"] = nlohmann::json::array();
  for (double b : beta_hat_blocks) {
    if (std::isnan(b)) {
      blocks.push_back(nullptr);
    } else {
      blocks.push_back(b);
    }
  }
  auto& z = j["zetas"] = nlohmann::json::array();
  for (const auto& m : zetas) z.push_back(std::vector<double>(m.packed().begin(), m.packed().end()));
  if (functional_samples) j["functional_samples"] = *functional_samples;
  auto& q = j["quantiles"] = nlohmann::json::array();
  for (const auto& [level, value] : quantiles) q.push_back({{"level", level}, {"value", value}});
  return j;
}

}  // namespace sqv
