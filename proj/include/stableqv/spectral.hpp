#pragma once

#include <limits>

#include "stableqv/linalg.hpp"

namespace sqv {

/// Eigen-decomposition with eigenvalues in descending order. Column i of
/// `vectors` is v_i; its largest-magnitude entry is positive (lowest index on
/// ties).
struct EigenSystem {
  Vec values;
  Matrix vectors;
  double gap = std::numeric_limits<double>::infinity();  // min_{i<j} (lambda_i - lambda_j)
  double min_eig = 0.0;

  Vec vector(std::size_t i) const { return vectors.column(i); }
};

EigenSystem eigen_sorted(const SymMatrix& a);

double lambda_max(const SymMatrix& a);

constexpr double kPseudoInverseTol = 1e-12;

/// Spectral Moore-Penrose pseudoinverse: eigenvalues with
/// |lambda| <= tol_rel * max|lambda| are treated as zero.
SymMatrix pseudo_inverse(const SymMatrix& a, double tol_rel = kPseudoInverseTol);

struct SpectrumDerivative {
  Vec dlambda;  // dlambda_i = v_i^T dA v_i
  Matrix dv;    // column i: (lambda_i I - A0)^+ dA v_i
};

/// Minimum admissible eigen-gap for first-order perturbation: 1e-8 times
/// sum |lambda_i| (the trace for a positive semidefinite A0).
double degenerate_gap_threshold(const EigenSystem& eig);

/// First-order change of the sorted spectrum of A0 along dA. Throws
/// degenerate_spectrum when the eigen-gap of A0 is below the threshold.
SpectrumDerivative linearize_spectrum(const SymMatrix& a0, const SymMatrix& da);

/// Stable-limit coordinates of the spectrum estimator: (v_i^T U v_i)_i and
/// ((lambda_i I - [L])^+ U v_i)_i for a limit draw U.
SpectrumDerivative spectral_limit_sample(const SymMatrix& qv, const SymMatrix& u);

}  // namespace sqv
