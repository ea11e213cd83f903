#pragma once

#include <complex>
#include <span>
#include <vector>

namespace sqv {

struct KsResult {
  double statistic = 0.0;  // sup |F_x - F_y|
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution (Stephens' small-sample correction).
KsResult ks_two_sample(std::vector<double> x, std::vector<double> y);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

/// Linear-interpolation quantile (R type 7); level in [0, 1].
double quantile(std::vector<double> x, double level);
double quantile_sorted(std::span<const double> sorted, double level);
double median(std::vector<double> x);
double mean(std::span<const double> x);
double variance(std::span<const double> x);  // unbiased

/// (1/n) sum exp(i t x_j).
std::complex<double> empirical_cf(std::span<const double> x, double t);

/// Slope of log(rank / n) against log|x| over the largest `fraction` of
/// |x|; approximates -alpha for a tail P(|X| > w) ~ c w^{-alpha}.
double tail_slope(std::span<const double> x, double fraction = 0.1);

}  // namespace sqv
