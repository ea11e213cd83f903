#include "stableqv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stableqv/error.hpp"

namespace sqv {

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::dimension_mismatch, "dot: vector sizes differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw Error(Errc::dimension_mismatch, "Matrix: ragged initializer");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t d) {
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Vec Matrix::column(std::size_t j) const {
  Vec v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

void Matrix::set_column(std::size_t j, std::span<const double> v) {
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Vec Matrix::apply(std::span<const double> x) const {
  if (x.size() != cols_) {
    throw Error(Errc::dimension_mismatch, "Matrix::apply: size mismatch");
  }
  Vec y(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw Error(Errc::dimension_mismatch, "Matrix +=: shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols_ != b.rows_) {
    throw Error(Errc::dimension_mismatch, "Matrix *: inner dimensions differ");
  }
  Matrix c(a.rows_, b.cols_);
  for (std::size_t i = 0; i < a.rows_; ++i)
    for (std::size_t k = 0; k < a.cols_; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) {
    throw Error(Errc::dimension_mismatch, "Matrix -: shape mismatch");
  }
  Matrix c = a;
  for (std::size_t i = 0; i < c.data_.size(); ++i) c.data_[i] -= b.data_[i];
  return c;
}

double Matrix::frobenius_norm() const { return norm(data_); }

bool Matrix::is_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : SymMatrix(rows.size()) {
  std::size_t i = 0;
  for (const auto& r : rows) {
    if (r.size() != d_) {
      throw Error(Errc::dimension_mismatch, "SymMatrix: initializer not square");
    }
    std::size_t j = 0;
    for (double v : r) {
      if (j >= i) {
        set(i, j, v);
      } else if (v != (*this)(j, i)) {
        throw Error(Errc::invalid_argument, "SymMatrix: initializer not symmetric");
      }
      ++j;
    }
    ++i;
  }
}

SymMatrix SymMatrix::identity(std::size_t d) {
  SymMatrix m(d);
  for (std::size_t i = 0; i < d; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.set(i, i, diag[i]);
  return m;
}

SymMatrix SymMatrix::from_dense(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(Errc::dimension_mismatch, "SymMatrix::from_dense: not square");
  }
  SymMatrix m(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    m.set(i, i, a(i, i));
    for (std::size_t j = i + 1; j < a.cols(); ++j) m.set(i, j, 0.5 * (a(i, j) + a(j, i)));
  }
  return m;
}

SymMatrix SymMatrix::from_packed(std::size_t d, std::span<const double> packed) {
  if (packed.size() != packed_size(d)) {
    throw Error(Errc::dimension_mismatch, "SymMatrix::from_packed: wrong entry count");
  }
  SymMatrix m(d);
  std::copy(packed.begin(), packed.end(), m.data_.begin());
  return m;
}

void SymMatrix::add_outer(std::span<const double> x, double scale) {
  if (x.size() != d_) {
    throw Error(Errc::dimension_mismatch, "SymMatrix::add_outer: size mismatch");
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < d_; ++i) {
    const double xi = scale * x[i];
    for (std::size_t j = i; j < d_; ++j) data_[k++] += xi * x[j];
  }
}

void SymMatrix::add_sym_tensor(std::span<const double> x, std::span<const double> y,
                               double scale) {
  if (x.size() != d_ || y.size() != d_) {
    throw Error(Errc::dimension_mismatch, "SymMatrix::add_sym_tensor: size mismatch");
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < d_; ++i)
    for (std::size_t j = i; j < d_; ++j) data_[k++] += scale * (x[i] * y[j] + y[i] * x[j]);
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  if (d_ != other.d_) throw Error(Errc::dimension_mismatch, "SymMatrix +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
  if (d_ != other.d_) throw Error(Errc::dimension_mismatch, "SymMatrix -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < d_; ++i) t += (*this)(i, i);
  return t;
}

double SymMatrix::frobenius_norm() const { return std::sqrt(inner(*this, *this)); }

bool SymMatrix::is_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Vec SymMatrix::apply(std::span<const double> x) const {
  if (x.size() != d_) throw Error(Errc::dimension_mismatch, "SymMatrix::apply");
  Vec y(d_, 0.0);
  for (std::size_t i = 0; i < d_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d_; ++j) s += (*this)(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double SymMatrix::quad_form(std::span<const double> x) const { return dot(x, apply(x)); }

Matrix SymMatrix::to_dense() const {
  Matrix m(d_, d_);
  for (std::size_t i = 0; i < d_; ++i)
    for (std::size_t j = 0; j < d_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

double inner(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw Error(Errc::dimension_mismatch, "inner");
  const std::size_t d = a.dim();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    s += a(i, i) * b(i, i);
    for (std::size_t j = i + 1; j < d; ++j) s += 2.0 * a(i, j) * b(i, j);
  }
  return s;
}

SymMatrix congruence(const Matrix& m, const SymMatrix& s) {
  if (m.cols() != s.dim()) {
    throw Error(Errc::dimension_mismatch, "congruence: M columns != S dimension");
  }
  return SymMatrix::from_dense(m * s.to_dense() * m.transpose());
}

JacobiResult jacobi_eigen(const SymMatrix& a) {
  if (!a.is_finite()) throw Error(Errc::non_finite, "jacobi_eigen: non-finite entries");
  const std::size_t d = a.dim();
  Matrix m = a.to_dense();
  Matrix v = Matrix::identity(d);
  JacobiResult out;
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += m(p, q) * m(p, q);
    if (off == 0.0) break;
    out.sweeps = sweep + 1;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        // Once an entry no longer perturbs the diagonal it is set to zero.
        const double app = m(p, p);
        const double aqq = m(q, q);
        if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
            std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
          m(p, q) = 0.0;
          m(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        m(p, q) = 0.0;
        m(q, p) = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  out.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.values[i] = m(i, i);
  out.vectors = std::move(v);
  return out;
}

Matrix psd_factor(const SymMatrix& s) {
  const JacobiResult eig = jacobi_eigen(s);
  const std::size_t d = s.dim();
  Matrix f(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    const double r = std::sqrt(std::max(eig.values[j], 0.0));
    for (std::size_t i = 0; i < d; ++i) f(i, j) = eig.vectors(i, j) * r;
  }
  return f;
}

}  // namespace sqv
