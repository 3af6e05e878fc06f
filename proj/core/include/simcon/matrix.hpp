#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "simcon/errors.hpp"

namespace simcon {

// Dense row-major matrix of doubles. All reductions use a fixed left-to-right
// summation order so results are bit-identical across runs for identical
// inputs. Batch sizes are desk scale; no sparse or blocked paths.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> flat() { return {data_.data(), data_.size()}; }
  std::span<const double> flat() const { return {data_.data(), data_.size()}; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double v) { data_.assign(data_.size(), v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a * b^T (rows of a against rows of b)
Matrix matmul_transb(const Matrix& a, const Matrix& b);
// c = a^T * b
Matrix matmul_transa(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// y += alpha * x
void axpy(double alpha, const Matrix& x, Matrix& y);

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const char* name);

}  // namespace simcon
