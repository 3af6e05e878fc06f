#include "simcon/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace simcon {

EmbeddingBatch l2_normalize_rows(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw ShapeMismatchError("l2_normalize_rows: empty matrix");
  require_finite(m, "l2_normalize_rows input");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) sq += m(i, j) * m(i, j);
    const double norm = std::sqrt(sq);
    if (norm <= 1e-12) throw ZeroRowError(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) / norm;
  }
  return EmbeddingBatch{std::move(out), true};
}

SimilarityMatrix cosine_similarity_matrix(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  if (a.dim() != b.dim())
    throw DimMismatchError("cosine_similarity_matrix: embedding dimensions differ");
  if (!a.normalized || !b.normalized)
    throw NonFiniteError("cosine_similarity_matrix: inputs must be normalized");
  Matrix s = matmul_transb(a.matrix, b.matrix);
  for (double& v : s.flat()) v = std::clamp(v, -1.0, 1.0);
  return s;
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw EmptyInputError("logsumexp: empty input");
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

double logaddexp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> x, double h) {
  if (h <= 0.0) throw InvalidSpecError("finite_difference_gradient: h must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + h;
    const double fp = f(point);
    point[i] = orig - h;
    const double fm = f(point);
    point[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NonFiniteEvaluationError("finite_difference_gradient: f returned non-finite value");
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

GradCompareResult compare_gradients(std::span<const double> analytic,
                                    std::span<const double> numeric, double rel_tol,
                                    double abs_tol, double mag_floor) {
  if (analytic.size() != numeric.size())
    throw ShapeMismatchError("compare_gradients: length mismatch");
  GradCompareResult r;
  r.count = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double mag = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    const double diff = std::abs(analytic[i] - numeric[i]);
    if (mag >= mag_floor) {
      const double rel = diff / mag;
      if (rel > r.worst_rel) {
        r.worst_rel = rel;
        r.worst_index = i;
      }
      if (rel >= rel_tol) r.pass = false;
    } else {
      if (diff > r.worst_abs) {
        r.worst_abs = diff;
        r.worst_index = i;
      }
      if (diff >= abs_tol) r.pass = false;
    }
  }
  return r;
}

void merge(GradCompareResult& into, const GradCompareResult& other) {
  into.pass = into.pass && other.pass;
  into.worst_rel = std::max(into.worst_rel, other.worst_rel);
  into.worst_abs = std::max(into.worst_abs, other.worst_abs);
  into.count += other.count;
}

}  // namespace simcon
