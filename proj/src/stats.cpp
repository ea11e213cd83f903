#include "stableqv/stats.hpp"

#include <algorithm>
#include <cmath>

#include "stableqv/error.hpp"

namespace sqv {

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  // The alternating series converges slowly near zero, where the value is 1
  // to double precision anyway.
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty()) throw Error(Errc::empty_sample, "KS test needs two nonempty samples");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double ne = std::sqrt(n * m / (n + m));
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

double quantile_sorted(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw Error(Errc::empty_sample, "quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw Error(Errc::out_of_range, "quantile level outside [0, 1]");
  const double h = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> x, double level) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, level);
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

double mean(std::span<const double> x) {
  if (x.empty()) throw Error(Errc::empty_sample, "mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw Error(Errc::insufficient_data, "variance needs two values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

std::complex<double> empirical_cf(std::span<const double> x, double t) {
  if (x.empty()) throw Error(Errc::empty_sample, "characteristic function of an empty sample");
  double re = 0.0, im = 0.0;
  for (double v : x) {
    re += std::cos(t * v);
    im += std::sin(t * v);
  }
  const double n = static_cast<double>(x.size());
  return {re / n, im / n};
}

double tail_slope(std::span<const double> x, double fraction) {
  std::vector<double> a;
  a.reserve(x.size());
  for (double v : x) a.push_back(std::abs(v));
  std::sort(a.begin(), a.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(fraction * static_cast<double>(a.size()));
  if (k < 3) throw Error(Errc::insufficient_data, "tail_slope needs at least three tail points");
  const double n = static_cast<double>(a.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(a[i] > 0.0)) throw Error(Errc::domain_error, "tail_slope: zero in the tail");
    const double lx = std::log(a[i]);
    const double ly = std::log((static_cast<double>(i) + 1.0) / n);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double kk = static_cast<double>(k);
  return (kk * sxy - sx * sy) / (kk * sxx - sx * sx);
}

}  // namespace sqv
