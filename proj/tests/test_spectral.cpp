#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "stableqv/error.hpp"
#include "stableqv/limitlaw.hpp"
#include "stableqv/rng.hpp"
#include "stableqv/spectral.hpp"

using namespace sqv;

namespace {

SymMatrix random_sym(std::size_t d, Rng& rng) {
  SymMatrix a(d);
  for (double& v : a.packed_mut()) v = rng.normal();
  return a;
}

Eigen::MatrixXd to_eigen(const SymMatrix& a) {
  Eigen::MatrixXd m(a.dim(), a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) m(i, j) = a(i, j);
  return m;
}

}  // namespace

TEST(Linalg, SymTensorExamples) {
  EXPECT_EQ(sym_tensor(Vec{1, 0}, Vec{0, 1}), (SymMatrix{{0, 1}, {1, 0}}));
  const Vec x{1, 2};
  SymMatrix xx(2);
  xx.add_outer(x, 2.0);
  EXPECT_EQ(sym_tensor(x, x), xx);
  const SymMatrix t = sym_tensor(Vec{1, 2}, Vec{3, 4});
  EXPECT_EQ(t, (SymMatrix{{6, 10}, {10, 16}}));
  EXPECT_EQ(t.trace(), 22.0);
  EXPECT_THROW(sym_tensor(Vec{1, 2}, Vec{1, 2, 3}), Error);
}

TEST(Linalg, CongruenceMatchesDense) {
  Rng rng(3);
  const SymMatrix s = random_sym(3, rng);
  Matrix m(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) m(i, j) = rng.normal();
  const SymMatrix c = congruence(m, s);
  const Matrix dense = m * s.to_dense() * m.transpose();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c(i, j), dense(i, j), 1e-12);
}

TEST(Linalg, PsdFactor) {
  const SymMatrix s{{4, 2}, {2, 3}};
  const Matrix f = psd_factor(s);
  const Matrix ff = f * f.transpose();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(ff(i, j), s(i, j), 1e-12);
}

TEST(Spectral, DiagonalAndTwoByTwo) {
  const EigenSystem a = eigen_sorted(SymMatrix{{3, 0}, {0, 1}});
  EXPECT_EQ(a.values, (Vec{3, 1}));
  EXPECT_EQ(a.vector(0), (Vec{1, 0}));
  EXPECT_EQ(a.vector(1), (Vec{0, 1}));
  EXPECT_EQ(a.gap, 2.0);
  EXPECT_EQ(a.min_eig, 1.0);

  const EigenSystem b = eigen_sorted(SymMatrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(b.values[0], 3.0, 1e-15);
  EXPECT_NEAR(b.values[1], 1.0, 1e-15);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(b.vector(0)[0], r, 1e-15);
  EXPECT_NEAR(b.vector(0)[1], r, 1e-15);
  // Largest magnitude ties: lowest index is made positive.
  EXPECT_NEAR(b.vector(1)[0], r, 1e-15);
  EXPECT_NEAR(b.vector(1)[1], -r, 1e-15);
}

TEST(Spectral, ReconstructionAndOrthonormality) {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + rep % 6;
    const SymMatrix a = random_sym(d, rng);
    const EigenSystem e = eigen_sorted(a);
    SymMatrix back(d);
    for (std::size_t i = 0; i < d; ++i) back.add_outer(e.vector(i), e.values[i]);
    EXPECT_LE((back - a).frobenius_norm(), 1e-10 * a.frobenius_norm());
    for (std::size_t i = 0; i < d; ++i) {
      const Vec av = a.apply(e.vector(i));
      double res = 0.0;
      for (std::size_t k = 0; k < d; ++k) res += std::pow(av[k] - e.values[i] * e.vector(i)[k], 2);
      EXPECT_LE(std::sqrt(res), 1e-10 * a.frobenius_norm());
      if (i > 0) {
        EXPECT_GE(e.values[i - 1], e.values[i]);
      }
      for (std::size_t j = 0; j < d; ++j)
        EXPECT_NEAR(dot(e.vector(i), e.vector(j)), i == j ? 1.0 : 0.0, 1e-12);
    }
    // Against an independent solver.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(a));
    for (std::size_t i = 0; i < d; ++i)
      EXPECT_NEAR(e.values[i], ref.eigenvalues()(static_cast<Eigen::Index>(d - 1 - i)),
                  1e-12 * (1 + a.frobenius_norm()));
  }
}

TEST(Spectral, NonFiniteRejected) {
  SymMatrix a(2);
  a.set(0, 1, std::nan(""));
  EXPECT_THROW(eigen_sorted(a), Error);
}

TEST(Spectral, SignConventionStable) {
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const SymMatrix a = random_sym(3, rng);
    const EigenSystem e = eigen_sorted(a);
    if (e.gap <= 0.1) continue;
    const EigenSystem f = eigen_sorted(a + 1e-14 * SymMatrix::identity(3));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(e.vectors(k, i), f.vectors(k, i), 1e-6);
  }
}

TEST(Spectral, ArgmaxScaleInvariant) {
  Rng rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    const SymMatrix a = random_sym(4, rng);
    const EigenSystem e = eigen_sorted(a);
    const EigenSystem f = eigen_sorted(3.7 * a);
    auto argmax = [](const Vec& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
    EXPECT_EQ(argmax(e.vectors.column(0)), argmax(f.vectors.column(0)));
    EXPECT_EQ(lambda_max(a) > 0, lambda_max(3.7 * a) > 0);
  }
}

TEST(Spectral, PseudoInverseExamples) {
  EXPECT_EQ(pseudo_inverse(SymMatrix{{2, 0}, {0, 0}}), (SymMatrix{{0.5, 0}, {0, 0}}));
  EXPECT_EQ(pseudo_inverse(SymMatrix(3)), SymMatrix(3));
  const SymMatrix p = pseudo_inverse(SymMatrix{{1, 1}, {1, 1}});
  for (double v : p.packed()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Spectral, PseudoInverseMatchesSvdOracle) {
  Rng rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = 2 + rep % 4;
    SymMatrix a = random_sym(d, rng);
    if (rep % 2) {
      // Rank-deficient: zero out the smallest eigenvalue.
      const EigenSystem e = eigen_sorted(a);
      a = SymMatrix(d);
      for (std::size_t i = 0; i + 1 < d; ++i) a.add_outer(e.vector(i), e.values[i]);
    }
    const SymMatrix p = pseudo_inverse(a, 1e-10);
    const Eigen::MatrixXd ref =
        to_eigen(a).completeOrthogonalDecomposition().pseudoInverse();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        EXPECT_NEAR(p(i, j), ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                    1e-8 * (1 + std::abs(ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))));
  }
}

TEST(Spectral, LinearizeCommuting) {
  const SpectrumDerivative s = linearize_spectrum(SymMatrix{{3, 0}, {0, 1}}, SymMatrix{{0.1, 0}, {0, -0.2}});
  EXPECT_NEAR(s.dlambda[0], 0.1, 1e-16);
  EXPECT_NEAR(s.dlambda[1], -0.2, 1e-16);
  for (double v : s.dv.data()) EXPECT_EQ(v, 0.0);
}

TEST(Spectral, LinearizeOffDiagonal) {
  const double h = 0.3;
  const SpectrumDerivative s = linearize_spectrum(SymMatrix{{3, 0}, {0, 1}}, SymMatrix{{0, h}, {h, 0}});
  EXPECT_EQ(s.dlambda[0], 0.0);
  EXPECT_EQ(s.dlambda[1], 0.0);
  EXPECT_NEAR(s.dv(0, 0), 0.0, 1e-16);
  EXPECT_NEAR(s.dv(1, 0), h / 2, 1e-15);
  EXPECT_NEAR(s.dv(0, 1), -h / 2, 1e-15);
  EXPECT_NEAR(s.dv(1, 1), 0.0, 1e-16);
}

TEST(Spectral, LinearizeOrthogonalAndDegenerate) {
  Rng rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const SymMatrix a = random_sym(3, rng);
    if (eigen_sorted(a).gap < 1e-3) continue;
    const SymMatrix da = random_sym(3, rng);
    const SpectrumDerivative s = linearize_spectrum(a, da);
    const EigenSystem e = eigen_sorted(a);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(dot(s.dv.column(i), e.vector(i)), 0.0, 1e-10);
  }
  try {
    linearize_spectrum(SymMatrix::identity(2), SymMatrix(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_spectrum);
  }
}

TEST(Spectral, LimitSample) {
  const SymMatrix qv{{3, 0}, {0, 1}};
  const SpectrumDerivative zero = spectral_limit_sample(qv, SymMatrix(2));
  for (double v : zero.dlambda) EXPECT_EQ(v, 0.0);
  const SpectrumDerivative diag = spectral_limit_sample(qv, SymMatrix{{0.4, 0}, {0, -1.5}});
  EXPECT_EQ(diag.dlambda, (Vec{0.4, -1.5}));
  Rng rng(2);
  const SymMatrix u = random_sym(2, rng);
  const SymMatrix q{{5, 1}, {1, 2}};
  const SpectrumDerivative a = spectral_limit_sample(q, u);
  const SpectrumDerivative b = linearize_spectrum(q, u);
  EXPECT_EQ(a.dlambda, b.dlambda);
  EXPECT_EQ(a.dv, b.dv);
}
