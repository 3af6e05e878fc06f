#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "simcon/errors.hpp"
#include "simcon/matrix.hpp"
#include "simcon/numerics.hpp"
#include "simcon/rng.hpp"

using namespace simcon;

TEST_CASE("l2_normalize_rows scales a 3-4-5 row to 0.6-0.8") {
  const Matrix m = Matrix::from_rows({{3.0, 4.0}});
  const EmbeddingBatch b = l2_normalize_rows(m);
  CHECK(b.normalized);
  CHECK(b.matrix(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b.matrix(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("l2_normalize_rows is idempotent") {
  Rng rng(11);
  Matrix m(5, 7);
  for (double& v : m.flat()) v = rng.normal();
  const EmbeddingBatch once = l2_normalize_rows(m);
  const EmbeddingBatch twice = l2_normalize_rows(once.matrix);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(once.matrix.flat()[i] == doctest::Approx(twice.matrix.flat()[i]).epsilon(1e-14));
  }
}

TEST_CASE("l2_normalize_rows rejects a zero row") {
  Matrix m(2, 3);
  m(0, 0) = 1.0;
  CHECK_THROWS_AS(l2_normalize_rows(m), ZeroRowError);
}

TEST_CASE("cosine similarity of orthonormal rows is the identity") {
  const Matrix m = Matrix::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  const EmbeddingBatch b = EmbeddingBatch::trusted(m);
  const SimilarityMatrix s = cosine_similarity_matrix(b, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(s(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("cosine similarity reproduces a 60 degree angle") {
  const double c = 0.5;
  const double s60 = std::sqrt(3.0) / 2.0;
  const Matrix a = Matrix::from_rows({{1.0, 0.0}});
  const Matrix b = Matrix::from_rows({{c, s60}});
  const SimilarityMatrix s =
      cosine_similarity_matrix(EmbeddingBatch::trusted(a), EmbeddingBatch::trusted(b));
  CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("cosine similarity entries are clamped and diagonal-unit on self") {
  Rng rng(3);
  Matrix m(6, 4);
  for (double& v : m.flat()) v = rng.normal();
  const EmbeddingBatch b = l2_normalize_rows(m);
  const SimilarityMatrix s = cosine_similarity_matrix(b, b);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(s(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(s(i, j) >= -1.0);
      CHECK(s(i, j) <= 1.0);
      CHECK(s(i, j) == doctest::Approx(s(j, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("logsumexp closed forms") {
  const std::vector<double> two_zeros{0.0, 0.0};
  CHECK(logsumexp(two_zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> single{-3.25};
  CHECK(logsumexp(single) == doctest::Approx(-3.25).epsilon(1e-15));
  const std::vector<double> huge{1000.0, 1000.0};
  CHECK(logsumexp(huge) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(logsumexp(std::vector<double>{}), EmptyInputError);
}

TEST_CASE("logsumexp shift property") {
  Rng rng(5);
  std::vector<double> v(9);
  for (double& x : v) x = rng.uniform(-4.0, 4.0);
  const double base = logsumexp(v);
  std::vector<double> shifted = v;
  for (double& x : shifted) x += 17.5;
  CHECK(logsumexp(shifted) == doctest::Approx(base + 17.5).epsilon(1e-12));
}

TEST_CASE("logaddexp agrees with direct evaluation") {
  CHECK(logaddexp(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(logaddexp(-1.0, 2.0) ==
        doctest::Approx(std::log(std::exp(-1.0) + std::exp(2.0))).epsilon(1e-14));
}

TEST_CASE("finite differences recover simple gradients") {
  const auto square_sum = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const std::vector<double> x{3.0, -1.5, 0.25};
  const std::vector<double> g = finite_difference_gradient(square_sum, x, 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(-3.0).epsilon(1e-6));
  CHECK(g[2] == doctest::Approx(0.5).epsilon(1e-6));

  const auto constant = [](std::span<const double>) { return 4.2; };
  for (double v : finite_difference_gradient(constant, x, 1e-5)) {
    CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("finite differences match the gradient of a quadratic form") {
  Rng rng(19);
  const std::size_t n = 6;
  Matrix a(n, n);
  for (double& v : a.flat()) v = rng.uniform(-1.0, 1.0);
  Matrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sym(i, j) = 0.5 * (a(i, j) + a(j, i));
  }
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(-2.0, 2.0);

  const auto quad = [&](std::span<const double> p) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) s += p[i] * sym(i, j) * p[j];
    }
    return s;
  };
  const std::vector<double> g = finite_difference_gradient(quad, x, 1e-5);
  for (std::size_t i = 0; i < n; ++i) {
    double expect = 0.0;
    for (std::size_t j = 0; j < n; ++j) expect += 2.0 * sym(i, j) * x[j];
    CHECK(g[i] == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("finite differences reject a non-finite evaluation") {
  const auto bad = [](std::span<const double> x) { return std::log(x[0]); };
  const std::vector<double> x{0.0};
  CHECK_THROWS_AS(finite_difference_gradient(bad, x, 1e-5), NonFiniteEvaluationError);
}

TEST_CASE("compare_gradients separates relative and absolute regimes") {
  const std::vector<double> analytic{2.0, 1e-5};
  const std::vector<double> close{2.0 * (1.0 + 5e-5), 1e-5 + 5e-8};
  const GradCompareResult ok = compare_gradients(analytic, close);
  CHECK(ok.pass);
  CHECK(ok.count == 2);
  CHECK(ok.worst_rel > 0.0);

  const std::vector<double> rel_bad{2.0 * (1.0 + 5e-4), 1e-5};
  CHECK_FALSE(compare_gradients(analytic, rel_bad).pass);

  const std::vector<double> abs_bad{2.0, 1e-5 + 1e-6};
  CHECK_FALSE(compare_gradients(analytic, abs_bad).pass);
}

TEST_CASE("merge keeps the worst errors") {
  GradCompareResult a;
  a.worst_rel = 1e-6;
  a.worst_abs = 1e-9;
  a.count = 3;
  GradCompareResult b;
  b.pass = false;
  b.worst_rel = 1e-3;
  b.worst_abs = 1e-8;
  b.count = 2;
  merge(a, b);
  CHECK_FALSE(a.pass);
  CHECK(a.worst_rel == doctest::Approx(1e-3));
  CHECK(a.worst_abs == doctest::Approx(1e-8));
  CHECK(a.count == 5);
}

TEST_CASE("matmul variants agree with hand results") {
  const Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  const Matrix b = Matrix::from_rows({{5.0, 6.0}, {7.0, 8.0}});
  const Matrix ab = matmul(a, b);
  CHECK(ab(0, 0) == doctest::Approx(19.0));
  CHECK(ab(0, 1) == doctest::Approx(22.0));
  CHECK(ab(1, 0) == doctest::Approx(43.0));
  CHECK(ab(1, 1) == doctest::Approx(50.0));

  const Matrix abt = matmul_transb(a, b);
  CHECK(abt(0, 0) == doctest::Approx(17.0));
  CHECK(abt(1, 1) == doctest::Approx(53.0));

  const Matrix atb = matmul_transa(a, b);
  CHECK(atb(0, 0) == doctest::Approx(26.0));
  CHECK(atb(1, 1) == doctest::Approx(44.0));

  const Matrix at = transpose(a);
  CHECK(at(0, 1) == doctest::Approx(3.0));
  CHECK(at(1, 0) == doctest::Approx(2.0));
}
