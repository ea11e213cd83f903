#include "stableqv/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stableqv/error.hpp"

namespace sqv {

EigenSystem eigen_sorted(const SymMatrix& a) {
  if (!a.is_finite()) throw Error(Errc::non_finite, "eigen_sorted: non-finite entries");
  const JacobiResult raw = jacobi_eigen(a);
  const std::size_t d = a.dim();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return raw.values[i] > raw.values[j];
  });

  EigenSystem eig;
  eig.values.resize(d);
  eig.vectors = Matrix(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    eig.values[c] = raw.values[order[c]];
    Vec v = raw.vectors.column(order[c]);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < d; ++k)
      if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
    if (v[arg] < 0.0)
      for (double& x : v) x = -x;
    eig.vectors.set_column(c, v);
  }
  for (std::size_t c = 1; c < d; ++c)
    eig.gap = std::min(eig.gap, eig.values[c - 1] - eig.values[c]);
  eig.min_eig = d == 0 ? 0.0 : eig.values.back();
  return eig;
}

double lambda_max(const SymMatrix& a) { return eigen_sorted(a).values.front(); }

SymMatrix pseudo_inverse(const SymMatrix& a, double tol_rel) {
  const EigenSystem eig = eigen_sorted(a);
  const std::size_t d = a.dim();
  SymMatrix out(d);
  double scale = 0.0;
  for (double l : eig.values) scale = std::max(scale, std::abs(l));
  if (scale == 0.0) return out;
  for (std::size_t i = 0; i < d; ++i) {
    const double l = eig.values[i];
    if (std::abs(l) <= tol_rel * scale) continue;
    out.add_outer(eig.vector(i), 1.0 / l);
  }
  return out;
}

double degenerate_gap_threshold(const EigenSystem& eig) {
  double s = 0.0;
  for (double l : eig.values) s += std::abs(l);
  return 1e-8 * s;
}

SpectrumDerivative linearize_spectrum(const SymMatrix& a0, const SymMatrix& da) {
  if (a0.dim() != da.dim()) throw Error(Errc::dimension_mismatch, "A0 vs dA");
  const EigenSystem eig = eigen_sorted(a0);
  if (!(eig.gap > degenerate_gap_threshold(eig))) {
    throw Error(Errc::degenerate_spectrum, "eigen-gap below threshold");
  }
  const std::size_t d = a0.dim();
  SpectrumDerivative out{Vec(d), Matrix(d, d)};
  for (std::size_t i = 0; i < d; ++i) {
    const Vec v = eig.vector(i);
    const Vec dav = da.apply(v);
    out.dlambda[i] = dot(v, dav);
    SymMatrix shifted = -1.0 * a0;
    for (std::size_t k = 0; k < d; ++k) shifted.ref(k, k) += eig.values[i];
    out.dv.set_column(i, pseudo_inverse(shifted).apply(dav));
  }
  return out;
}

SpectrumDerivative spectral_limit_sample(const SymMatrix& qv, const SymMatrix& u) {
  return linearize_spectrum(qv, u);
}

}  // namespace sqv
