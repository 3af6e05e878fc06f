#pragma once

#include <functional>
#include <span>
#include <vector>

#include "simcon/matrix.hpp"

namespace simcon {

// |B| x |B| cosine similarities, entries clamped to [-1, 1].
using SimilarityMatrix = Matrix;

// Row-normalized |B| x d batch of embeddings. `normalized` records whether
// the rows are unit length; loss functions require it and trust it, so
// construct through l2_normalize_rows unless the data is known to be unit
// (tests perturb entries by ~1e-5 for finite differences and keep the flag).
struct EmbeddingBatch {
  Matrix matrix;
  bool normalized = false;

  std::size_t batch_size() const { return matrix.rows(); }
  std::size_t dim() const { return matrix.cols(); }

  static EmbeddingBatch trusted(Matrix m) { return EmbeddingBatch{std::move(m), true}; }
};

// Divides each row by its L2 norm. Throws ZeroRowError if a row norm is
// <= 1e-12.
EmbeddingBatch l2_normalize_rows(const Matrix& m);

// S[i][j] = dot(a_i, b_j), clamped to [-1, 1] to guard downstream threshold
// comparisons against rounding overshoot. Requires normalized inputs of
// equal dimension.
SimilarityMatrix cosine_similarity_matrix(const EmbeddingBatch& a, const EmbeddingBatch& b);

// log(sum(exp(v_i))) via max shift. Throws EmptyInputError on empty input.
double logsumexp(std::span<const double> v);

double logaddexp(double a, double b);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
// Throws NonFiniteEvaluationError if any call of f returns a non-finite
// value.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> x, double h);

// Comparison rule used by every gradient check: coordinates whose magnitude
// reaches mag_floor are held to the relative tolerance, smaller ones to the
// absolute tolerance.
struct GradCompareResult {
  bool pass = true;
  double worst_rel = 0.0;     // worst relative error among large-magnitude coords
  double worst_abs = 0.0;     // worst absolute error among small-magnitude coords
  std::size_t worst_index = 0;
  std::size_t count = 0;
};

GradCompareResult compare_gradients(std::span<const double> analytic,
                                    std::span<const double> numeric, double rel_tol = 1e-4,
                                    double abs_tol = 1e-7, double mag_floor = 1e-3);

// Accumulates two results, keeping the worst errors.
void merge(GradCompareResult& into, const GradCompareResult& other);

}  // namespace simcon
