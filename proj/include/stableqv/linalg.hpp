#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sqv {

using Vec = std::vector<double>;

double dot(std::span<const double> x, std::span<const double> y);
double norm(std::span<const double> x);

/// Dense row-major matrix. Only small sizes (d <= 10) are expected.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t d);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> data() const noexcept { return data_; }

  Vec column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> v);

  Matrix transpose() const;
  Vec apply(std::span<const double> x) const;

  Matrix& operator*=(double s);
  Matrix& operator+=(const Matrix& other);

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(const Matrix& a, const Matrix& b);

  bool operator==(const Matrix&) const = default;

  double frobenius_norm() const;
  bool is_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric d x d matrix stored as its packed upper triangle, so symmetry
/// holds by construction.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t d) : d_(d), data_(d * (d + 1) / 2, 0.0) {}
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static SymMatrix identity(std::size_t d);
  static SymMatrix diagonal(std::span<const double> diag);
  // Symmetrizes (A + A^T) / 2.
  static SymMatrix from_dense(const Matrix& a);
  // Rebuilds from packed upper-triangle entries (row-major, i <= j).
  static SymMatrix from_packed(std::size_t d, std::span<const double> packed);

  std::size_t dim() const noexcept { return d_; }
  static std::size_t packed_size(std::size_t d) noexcept { return d * (d + 1) / 2; }

  double operator()(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }
  void set(std::size_t i, std::size_t j, double v) { data_[index(i, j)] = v; }
  double& ref(std::size_t i, std::size_t j) { return data_[index(i, j)]; }

  std::span<const double> packed() const noexcept { return data_; }
  std::span<double> packed_mut() noexcept { return data_; }

  // this += scale * x x^T
  void add_outer(std::span<const double> x, double scale = 1.0);
  // this += scale * (x y^T + y x^T)
  void add_sym_tensor(std::span<const double> x, std::span<const double> y,
                      double scale = 1.0);

  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator-=(const SymMatrix& other);
  SymMatrix& operator*=(double s);

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

  bool operator==(const SymMatrix&) const = default;

  double trace() const;
  double frobenius_norm() const;
  bool is_finite() const;

  Vec apply(std::span<const double> x) const;
  double quad_form(std::span<const double> x) const;
  Matrix to_dense() const;

 private:
  std::size_t index(std::size_t i, std::size_t j) const noexcept {
    if (i > j) { std::size_t t = i; i = j; j = t; }
    return i * d_ - i * (i + 1) / 2 + j;
  }

  std::size_t d_ = 0;
  std::vector<double> data_;
};

/// Trace inner product <A, B>_tr = tr(A^T B).
double inner(const SymMatrix& a, const SymMatrix& b);

/// M S M^T, computed as a dense product and then symmetrized.
SymMatrix congruence(const Matrix& m, const SymMatrix& s);

/// Raw output of the cyclic Jacobi eigenvalue iteration: unsorted eigenvalues
/// and the matching orthonormal eigenvectors as columns.
struct JacobiResult {
  Vec values;
  Matrix vectors;
  int sweeps = 0;
};

JacobiResult jacobi_eigen(const SymMatrix& a);

/// F with F F^T = S for a positive semidefinite S (negative eigenvalues from
/// rounding are clipped to zero).
Matrix psd_factor(const SymMatrix& s);

}  // namespace sqv
