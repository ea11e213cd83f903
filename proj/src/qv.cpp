#include "stableqv/qv.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "stableqv/error.hpp"

namespace sqv {
namespace {

void check_time(double horizon, double t) {
  if (!(t >= 0.0 && t <= horizon)) {
    throw Error(Errc::out_of_range, "time outside [0, T]");
  }
}

void check_grid(const GridPath& grid) {
  if (grid.points() < 2) {
    throw Error(Errc::insufficient_data, "realised QV needs at least two grid values");
  }
}

}  // namespace

QVEstimate realised_qv(const GridPath& grid) {
  check_grid(grid);
  QVEstimate q{grid.step, {}, std::nullopt};
  q.values.reserve(grid.points());
  SymMatrix acc(grid.dim);
  q.values.push_back(acc);
  for (std::size_t i = 1; i < grid.points(); ++i) {
    acc.add_outer(grid.increment(i));
    q.values.push_back(acc);
  }
  return q;
}

SymMatrix realised_qv_total(const GridPath& grid) {
  check_grid(grid);
  return realised_qv_total(grid, grid.increments());
}

SymMatrix realised_qv_total(const GridPath& grid, std::size_t upto) {
  check_grid(grid);
  if (upto > grid.increments()) throw Error(Errc::out_of_range, "increment count");
  const std::size_t d = grid.dim;
  SymMatrix acc(d);
  Vec inc(d);
  for (std::size_t i = 1; i <= upto; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      inc[k] = grid.values[i * d + k] - grid.values[(i - 1) * d + k];
    }
    acc.add_outer(inc);
  }
  return acc;
}

SymMatrix true_qv(const JumpPath& path, double t) {
  check_time(path.horizon, t);
  SymMatrix acc(path.dim());
  for (std::size_t j = 0; j < path.size() && path.times[j] <= t; ++j) acc.add_outer(path.jump(j));
  if (path.residual) {
    SymMatrix mean = path.residual->rate;
    mean *= t;
    acc += mean;
  }
  return acc;
}

SymMatrix true_qv(const IntegralPath& path, double t) {
  const JumpPath& levy = path.levy;
  check_time(levy.horizon, t);
  const std::size_t d = levy.dim();
  SymMatrix acc(d);
  for (std::size_t j = 0; j < levy.size() && levy.times[j] <= t; ++j) {
    acc.add_outer(std::span<const double>(path.jumps.data() + j * d, d));
  }
  if (levy.residual) {
    const auto& vol = path.vol;
    for (std::size_t k = 0; k < vol.starts.size() && vol.starts[k] < t; ++k) {
      const double end = k + 1 < vol.starts.size() ? std::min(vol.starts[k + 1], t) : t;
      SymMatrix piece = congruence(vol.matrices[k], levy.residual->rate);
      piece *= end - vol.starts[k];
      acc += piece;
    }
  }
  return acc;
}

double rate_delta(double step, double beta) {
  if (!(step > 0.0 && step < 1.0)) {
    throw Error(Errc::domain_error, "rate_delta needs a step in (0, 1)");
  }
  if (!(beta > 0.0 && beta < 2.0)) {
    throw Error(Errc::domain_error, "rate_delta needs beta in (0, 2)");
  }
  return std::pow(step * std::log(1.0 / step), -1.0 / beta);
}

ErrorProcess error_process(const JumpPath& path, double step, double beta) {
  const double rate = rate_delta(step, beta);
  const GridPath grid = path_values(path, step);
  check_grid(grid);
  const std::size_t d = path.dim();
  ErrorProcess u{step, rate, {}};
  u.values.reserve(grid.points());
  u.values.emplace_back(d);

  SymMatrix realised(d);
  SymMatrix jumps(d);
  std::size_t j = 0;
  for (std::size_t i = 1; i < grid.points(); ++i) {
    const double t = static_cast<double>(i) * step;
    realised.add_outer(grid.increment(i));
    for (; j < path.size() && path.times[j] <= t; ++j) jumps.add_outer(path.jump(j));
    SymMatrix diff = realised - jumps;
    if (path.residual) {
      SymMatrix mean = path.residual->rate;
      mean *= t;
      diff -= mean;
    }
    diff *= rate;
    u.values.push_back(std::move(diff));
  }
  return u;
}

ErrorProcess error_process(const IntegralPath& path, double beta) {
  const GridPath& grid = path.values;
  const double rate = rate_delta(grid.step, beta);
  const QVEstimate realised = realised_qv(grid);
  ErrorProcess u{grid.step, rate, {}};
  u.values.reserve(grid.points());
  for (std::size_t i = 0; i < grid.points(); ++i) {
    SymMatrix diff = realised.values[i] - true_qv(path, static_cast<double>(i) * grid.step);
    diff *= rate;
    u.values.push_back(std::move(diff));
  }
  return u;
}

SymMatrix error_at_end(const JumpPath& path, double step, double beta) {
  const double rate = rate_delta(step, beta);
  const GridPath grid = path_values(path, step);
  SymMatrix diff = realised_qv_total(grid) -
                   true_qv(path, static_cast<double>(grid.increments()) * step);
  diff *= rate;
  return diff;
}

SymMatrix error_at_end(const IntegralPath& path, double beta) {
  const GridPath& grid = path.values;
  const double rate = rate_delta(grid.step, beta);
  SymMatrix diff = realised_qv_total(grid) -
                   true_qv(path, static_cast<double>(grid.increments()) * grid.step);
  diff *= rate;
  return diff;
}

void write_qv(std::ostream& out, const QVEstimate& qv) {
  if (qv.values.empty()) return;
  const std::size_t d = qv.values.front().dim();
  out << "t";
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) out << ",q" << (i + 1) << '_' << (j + 1);
  out << '\n';
  char buf[40];
  for (std::size_t k = 0; k < qv.values.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(k) * qv.step);
    out << buf;
    for (double v : qv.values[k].packed()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace sqv
