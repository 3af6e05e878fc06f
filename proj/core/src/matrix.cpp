#include "simcon/matrix.hpp"

#include <cmath>

namespace simcon {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() == 0 ? 0 : rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    if (r.size() != m.cols()) throw ShapeMismatchError("ragged initializer rows");
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatchError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols(), 0.0);
  // i-k-j order keeps the b and c accesses contiguous.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.data() + i * a.cols();
    double* crow = c.data() + i * c.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      const double* brow = b.data() + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_transb(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatchError("matmul_transb: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.data() + i * a.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.data() + j * b.cols();
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

Matrix matmul_transa(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeMismatchError("matmul_transa: row counts differ");
  Matrix c(a.cols(), b.cols(), 0.0);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* arow = a.data() + k * a.cols();
    const double* brow = b.data() + k * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      double* crow = c.data() + i * c.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  if (!x.same_shape(y)) throw ShapeMismatchError("axpy: shape mismatch");
  double* yd = y.data();
  const double* xd = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) yd[i] += alpha * xd[i];
}

bool all_finite(const Matrix& m) {
  for (double v : m.flat())
    if (!std::isfinite(v)) return false;
  return true;
}

void require_finite(const Matrix& m, const char* name) {
  if (!all_finite(m)) throw NonFiniteError(std::string(name) + " contains non-finite entries");
}

}  // namespace simcon
