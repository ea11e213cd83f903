#include "stableqv/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "stableqv/error.hpp"

namespace sqv {
namespace {

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(Errc::invalid_argument, std::string(what) + " must be finite and > 0");
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Sorts jump times (and their vectors) and redraws exact ties.
void sort_jumps(std::vector<double>& times, std::vector<double>& jumps, std::size_t d,
                double horizon, Rng& rng) {
  const std::size_t n = times.size();
  for (;;) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    std::vector<double> t_sorted(n);
    std::vector<double> j_sorted(n * d);
    for (std::size_t k = 0; k < n; ++k) {
      t_sorted[k] = times[order[k]];
      std::copy_n(jumps.begin() + static_cast<std::ptrdiff_t>(order[k] * d), d,
                  j_sorted.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
    times.swap(t_sorted);
    jumps.swap(j_sorted);
    bool tie = false;
    for (std::size_t k = 1; k < n; ++k) {
      if (times[k] == times[k - 1]) {
        times[k] = horizon * rng.uniform_pos();
        tie = true;
      }
    }
    if (!tie) return;
  }
}

std::size_t residual_ratio(const JumpPath& path, double step) {
  const double step_r = path.residual->step;
  const double ratio = step / step_r;
  const double r = std::round(ratio);
  if (r < 1.0 || std::abs(ratio - r) > 1e-9 * r) {
    throw Error(Errc::invalid_grid,
                "observation step must be an integer multiple of the residual step");
  }
  return static_cast<std::size_t>(r);
}

Matrix matrix_from_json(const nlohmann::json& j, std::size_t d) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.size() != d) throw Error(Errc::dimension_mismatch, "volatility matrix rows");
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    if (rows[i].size() != d) throw Error(Errc::dimension_mismatch, "volatility matrix cols");
    for (std::size_t k = 0; k < d; ++k) m(i, k) = rows[i][k];
  }
  if (!m.is_finite()) throw Error(Errc::non_finite, "volatility matrix");
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (std::size_t k = 0; k < m.cols(); ++k) r[k] = m(i, k);
    rows.push_back(r);
  }
  return rows;
}

VolPath realize_volatility(const VolatilitySpec& spec, std::size_t d, double horizon,
                           double step, Rng& rng) {
  return std::visit(
      [&](const auto& m) -> VolPath {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, VolatilitySpec::Constant>) {
          if (m.sigma.rows() != d || m.sigma.cols() != d) {
            throw Error(Errc::dimension_mismatch, "constant volatility dimension");
          }
          return VolPath::constant(m.sigma);
        } else if constexpr (std::is_same_v<T, VolatilitySpec::PiecewiseConstant>) {
          if (m.starts.empty() || m.starts.size() != m.matrices.size() || m.starts[0] != 0.0) {
            throw Error(Errc::invalid_argument,
                        "piecewise volatility needs starts[0] == 0 and one matrix per start");
          }
          for (std::size_t k = 0; k < m.starts.size(); ++k) {
            if (m.matrices[k].rows() != d || m.matrices[k].cols() != d) {
              throw Error(Errc::dimension_mismatch, "piecewise volatility dimension");
            }
            if (!m.matrices[k].is_finite()) throw Error(Errc::non_finite, "volatility matrix");
            if (k > 0 && !(m.starts[k] > m.starts[k - 1])) {
              throw Error(Errc::invalid_argument, "volatility breakpoints must increase");
            }
            if (m.starts[k] >= horizon) {
              throw Error(Errc::invalid_argument, "volatility breakpoint outside [0, T)");
            }
          }
          return VolPath{m.starts, m.matrices};
        } else {
          check_positive(m.rate, "OU rate");
          if (!(m.vol >= 0.0)) throw Error(Errc::invalid_argument, "OU vol must be >= 0");
          const std::size_t n = grid_count(horizon, step);
          const double decay = std::exp(-m.rate * step);
          const double sd = m.vol * std::sqrt((1.0 - decay * decay) / (2.0 * m.rate));
          VolPath vp;
          Vec x(d, m.level);
          for (std::size_t k = 0; k < n; ++k) {
            vp.starts.push_back(static_cast<double>(k) * step);
            vp.matrices.push_back(Matrix::diagonal(x));
            for (double& xi : x) xi = m.level + (xi - m.level) * decay + sd * rng.normal();
          }
          return vp;
        }
      },
      spec.model);
}

}  // namespace

double expected_jump_count(const StableLevySpec& spec, double horizon, double eps) {
  return horizon * spec.measure.total_mass() * std::pow(eps, -spec.beta) / spec.beta;
}

double truncated_qv_mass(const StableLevySpec& spec, double horizon, double eps) {
  return horizon * spec.measure.total_mass() * std::pow(eps, 2.0 - spec.beta) /
         (2.0 - spec.beta);
}

double grid_truncation(double beta, double step, double kappa) {
  return kappa * std::pow(step, 1.0 / beta);
}

double qv_budget_truncation(const StableLevySpec& spec, double horizon, double budget) {
  check_positive(budget, "QV budget");
  const double b = spec.beta;
  return std::pow(budget * (2.0 - b) / (horizon * spec.measure.total_mass()), 1.0 / (2.0 - b));
}

JumpPath simulate_levy_path(const StableLevySpec& spec, double horizon, double eps,
                            Rng& rng, const SimulationOptions& options) {
  check_positive(horizon, "horizon");
  check_positive(eps, "eps");
  const double expected = expected_jump_count(spec, horizon, eps);
  if (!(expected <= options.max_expected_jumps)) {
    throw Error(Errc::resource_limit,
                "expected jump count " + fmt17(expected) + " exceeds the guard " +
                    fmt17(options.max_expected_jumps));
  }

  const std::size_t d = spec.dim();
  const double beta = spec.beta;
  JumpPath path{spec, horizon, eps, rng.seed(), {}, {}, expected,
                truncated_qv_mass(spec, horizon, eps), std::nullopt};
  const auto reserve = static_cast<std::size_t>(expected + 6.0 * std::sqrt(expected) + 16.0);
  path.times.reserve(reserve);
  path.jumps.reserve(reserve * d);

  const double arrival_scale = beta / (horizon * spec.measure.total_mass());
  const double inv_beta = -1.0 / beta;
  Vec dir(d);
  double gamma = 0.0;
  for (;;) {
    gamma += rng.exponential();
    const double rho = std::pow(arrival_scale * gamma, inv_beta);
    if (rho < eps) break;
    spec.measure.sample_direction(rng, dir);
    for (double x : dir) path.jumps.push_back(rho * x);
    path.times.push_back(horizon * rng.uniform_pos());
  }
  sort_jumps(path.times, path.jumps, d, horizon, rng);

  if (options.residual_step > 0.0) {
    SmallJumpResidual res;
    res.step = options.residual_step;
    res.rate = spec.measure.second_moment();
    res.rate *= std::pow(eps, 2.0 - beta) / (2.0 - beta);
    const std::size_t m = grid_count(horizon, res.step);
    const Matrix factor = psd_factor(res.rate);
    const double root_step = std::sqrt(res.step);
    res.increments.resize(m * d);
    Vec z(d);
    for (std::size_t l = 0; l < m; ++l) {
      for (double& zi : z) zi = rng.normal();
      const Vec g = factor.apply(z);
      for (std::size_t i = 0; i < d; ++i) res.increments[l * d + i] = root_step * g[i];
    }
    path.residual = std::move(res);
  }
  return path;
}

Vec GridPath::increment(std::size_t i) const {
  Vec v(dim);
  for (std::size_t k = 0; k < dim; ++k) v[k] = values[i * dim + k] - values[(i - 1) * dim + k];
  return v;
}

GridPath GridPath::subsample(std::size_t k) const {
  if (k == 0) throw Error(Errc::invalid_grid, "subsample factor must be >= 1");
  GridPath g{step * static_cast<double>(k), dim, {}};
  for (std::size_t i = 0; i < points(); i += k) {
    auto v = value(i);
    g.values.insert(g.values.end(), v.begin(), v.end());
  }
  return g;
}

GridPath GridPath::scaled(double c) const {
  GridPath g = *this;
  for (double& v : g.values) v *= c;
  return g;
}

std::size_t grid_count(double horizon, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(Errc::invalid_grid, "grid step must be finite and > 0");
  }
  if (step > horizon * (1.0 + 1e-12)) {
    throw Error(Errc::invalid_grid, "grid step exceeds the horizon");
  }
  return static_cast<std::size_t>(std::floor(horizon / step * (1.0 + 1e-12)));
}

GridPath path_values(const JumpPath& path, double step) {
  const std::size_t n = grid_count(path.horizon, step);
  const std::size_t d = path.dim();
  GridPath g{step, d, std::vector<double>((n + 1) * d, 0.0)};
  std::size_t ratio = 0;
  if (path.residual) {
    ratio = residual_ratio(path, step);
    if (n * ratio > path.residual->count(d)) {
      throw Error(Errc::invalid_grid, "residual grid does not cover the observation grid");
    }
  }
  Vec acc(d, 0.0);
  std::size_t j = 0;
  std::size_t l = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) * step;
    for (; j < path.size() && path.times[j] <= t; ++j) {
      auto jump = path.jump(j);
      for (std::size_t k = 0; k < d; ++k) acc[k] += jump[k];
    }
    if (path.residual) {
      for (const std::size_t end = i * ratio; l < end; ++l)
        for (std::size_t k = 0; k < d; ++k) acc[k] += path.residual->increments[l * d + k];
    }
    std::copy(acc.begin(), acc.end(), g.values.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return g;
}

const Matrix& VolPath::at(double t) const {
  auto it = std::upper_bound(starts.begin(), starts.end(), t);
  const std::size_t k = it == starts.begin() ? 0 : static_cast<std::size_t>(it - starts.begin()) - 1;
  return matrices[k];
}

const Matrix& VolPath::left_limit(double t) const {
  auto it = std::lower_bound(starts.begin(), starts.end(), t);
  const std::size_t k = it == starts.begin() ? 0 : static_cast<std::size_t>(it - starts.begin()) - 1;
  return matrices[k];
}

VolPath VolPath::constant(const Matrix& sigma) { return VolPath{{0.0}, {sigma}}; }

nlohmann::json VolatilitySpec::to_json() const {
  return std::visit(
      [](const auto& m) -> nlohmann::json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return {{"type", "constant"}, {"sigma", matrix_to_json(m.sigma)}};
        } else if constexpr (std::is_same_v<T, PiecewiseConstant>) {
          nlohmann::json mats = nlohmann::json::array();
          for (const auto& s : m.matrices) mats.push_back(matrix_to_json(s));
          return {{"type", "piecewise"}, {"starts", m.starts}, {"matrices", mats}};
        } else {
          return {{"type", "ou"}, {"rate", m.rate}, {"level", m.level}, {"vol", m.vol}};
        }
      },
      model);
}

VolatilitySpec VolatilitySpec::from_json(const nlohmann::json& j, std::size_t d) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant") return {Constant{matrix_from_json(j.at("sigma"), d)}};
    if (type == "piecewise") {
      PiecewiseConstant p;
      p.starts = j.at("starts").get<std::vector<double>>();
      for (const auto& m : j.at("matrices")) p.matrices.push_back(matrix_from_json(m, d));
      return {p};
    }
    if (type == "ou") {
      return {OrnsteinUhlenbeckDiagonal{j.at("rate").get<double>(), j.at("level").get<double>(),
                                        j.at("vol").get<double>()}};
    }
    throw Error(Errc::parse_error, "unknown volatility type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("volatility block: ") + e.what());
  }
}

IntegralPath integrate_path(const JumpPath& levy, VolPath vol, double step) {
  const std::size_t d = levy.dim();
  if (vol.dim() != d) throw Error(Errc::dimension_mismatch, "volatility vs process dimension");
  IntegralPath ip{levy, std::move(vol), {}, {}};
  ip.jumps.resize(levy.jumps.size());
  for (std::size_t j = 0; j < levy.size(); ++j) {
    const Vec x = ip.vol.left_limit(levy.times[j]).apply(levy.jump(j));
    std::copy(x.begin(), x.end(), ip.jumps.begin() + static_cast<std::ptrdiff_t>(j * d));
  }

  const std::size_t n = grid_count(levy.horizon, step);
  ip.values = GridPath{step, d, std::vector<double>((n + 1) * d, 0.0)};
  std::size_t ratio = 0;
  if (levy.residual) {
    ratio = residual_ratio(levy, step);
    if (n * ratio > levy.residual->count(d)) {
      throw Error(Errc::invalid_grid, "residual grid does not cover the observation grid");
    }
  }
  Vec acc(d, 0.0);
  std::size_t j = 0;
  std::size_t l = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) * step;
    for (; j < levy.size() && levy.times[j] <= t; ++j)
      for (std::size_t k = 0; k < d; ++k) acc[k] += ip.jumps[j * d + k];
    if (levy.residual) {
      const auto& res = *levy.residual;
      for (const std::size_t end = i * ratio; l < end; ++l) {
        const Matrix& s = ip.vol.at(static_cast<double>(l) * res.step);
        const Vec x = s.apply(std::span<const double>(res.increments.data() + l * d, d));
        for (std::size_t k = 0; k < d; ++k) acc[k] += x[k];
      }
    }
    std::copy(acc.begin(), acc.end(), ip.values.values.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return ip;
}

IntegralPath simulate_integral_path(const StableLevySpec& spec, const VolatilitySpec& vol,
                                    double horizon, double eps, double step, Rng& rng,
                                    const SimulationOptions& options) {
  grid_count(horizon, step);
  // Validate the volatility before paying for the path.
  if (const auto* c = std::get_if<VolatilitySpec::Constant>(&vol.model)) {
    if (c->sigma.rows() != spec.dim() || c->sigma.cols() != spec.dim()) {
      throw Error(Errc::dimension_mismatch, "constant volatility dimension");
    }
  }
  JumpPath levy = simulate_levy_path(spec, horizon, eps, rng, options);
  VolPath vp = realize_volatility(vol, spec.dim(), horizon, step, rng);
  return integrate_path(levy, std::move(vp), step);
}

void write_path(std::ostream& out, const JumpPath& path) {
  const std::size_t d = path.dim();
  out << "# stableqv-path v1\n";
  out << "# spec " << path.spec.to_json().dump() << '\n';
  out << "# horizon " << fmt17(path.horizon) << '\n';
  out << "# eps " << fmt17(path.eps) << '\n';
  out << "# seed " << path.seed << '\n';
  out << "# expected_jumps " << fmt17(path.expected_jumps) << '\n';
  out << "# truncated_qv_mass " << fmt17(path.truncated_qv_mass) << '\n';
  if (path.residual) {
    out << "# residual_step " << fmt17(path.residual->step) << '\n';
    out << "# residual_rate";
    for (double v : path.residual->rate.packed()) out << ' ' << fmt17(v);
    out << '\n';
  }
  out << "# columns t";
  for (std::size_t k = 0; k < d; ++k) out << " dL" << (k + 1);
  out << '\n';
  for (std::size_t j = 0; j < path.size(); ++j) {
    out << fmt17(path.times[j]);
    for (double v : path.jump(j)) out << ' ' << fmt17(v);
    out << '\n';
  }
  if (path.residual) {
    out << "# residual_rows " << path.residual->count(d) << '\n';
    const auto& inc = path.residual->increments;
    for (std::size_t l = 0; l < path.residual->count(d); ++l) {
      for (std::size_t k = 0; k < d; ++k) out << (k ? " " : "") << fmt17(inc[l * d + k]);
      out << '\n';
    }
  }
}

JumpPath read_path(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "# stableqv-path v1") {
    throw Error(Errc::parse_error, "not a stableqv path file");
  }
  std::optional<StableLevySpec> spec;
  double horizon = 0.0, eps = 0.0, expected = 0.0, trunc = 0.0, rstep = 0.0;
  std::uint64_t seed = 0;
  Vec rate;
  bool in_residual = false;
  std::vector<double> times, jumps, residual;
  std::size_t d = 0;

  auto parse_numbers = [](std::istringstream& ss) {
    Vec v;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw Error(Errc::parse_error, "bad number '" + tok + "'");
      }
      v.push_back(x);
    }
    return v;
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    if (line[0] == '#') {
      std::string hash, key;
      ss >> hash >> key;
      if (key == "spec") {
        std::string rest;
        std::getline(ss, rest);
        try {
          spec = StableLevySpec::from_json(nlohmann::json::parse(rest));
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::parse_error, std::string("spec header: ") + e.what());
        }
        d = spec->dim();
      } else if (key == "horizon") {
        horizon = parse_numbers(ss).at(0);
      } else if (key == "eps") {
        eps = parse_numbers(ss).at(0);
      } else if (key == "seed") {
        ss >> seed;
      } else if (key == "expected_jumps") {
        expected = parse_numbers(ss).at(0);
      } else if (key == "truncated_qv_mass") {
        trunc = parse_numbers(ss).at(0);
      } else if (key == "residual_step") {
        rstep = parse_numbers(ss).at(0);
      } else if (key == "residual_rate") {
        rate = parse_numbers(ss);
      } else if (key == "residual_rows") {
        in_residual = true;
      }
      continue;
    }
    if (!spec) throw Error(Errc::parse_error, "data row before spec header");
    const Vec row = parse_numbers(ss);
    if (in_residual) {
      if (row.size() != d) throw Error(Errc::parse_error, "residual row width");
      residual.insert(residual.end(), row.begin(), row.end());
    } else {
      if (row.size() != d + 1) throw Error(Errc::parse_error, "jump row width");
      times.push_back(row[0]);
      jumps.insert(jumps.end(), row.begin() + 1, row.end());
    }
  }
  if (!spec) throw Error(Errc::parse_error, "missing spec header");
  JumpPath path{*spec, horizon, eps, seed, std::move(times), std::move(jumps), expected, trunc,
                std::nullopt};
  for (std::size_t j = 1; j < path.size(); ++j) {
    if (!(path.times[j] > path.times[j - 1])) {
      throw Error(Errc::parse_error, "jump times must be strictly increasing");
    }
  }
  if (rstep > 0.0) {
    SmallJumpResidual res;
    res.step = rstep;
    res.rate = SymMatrix::from_packed(d, rate);
    res.increments = std::move(residual);
    path.residual = std::move(res);
  }
  return path;
}

}  // namespace sqv
