#include "simcon/oracle.hpp"

#include <cmath>
#include <cstddef>

#include "simcon/errors.hpp"

namespace simcon::oracle {

namespace {

Matrix tempered(const Matrix& s, double tau) {
  Matrix e(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) e(i, j) = std::exp(s(i, j) / tau);
  }
  return e;
}

// One anchor direction: mean over positives of -log of the fused ratio,
// averaged over anchors. e_intra may be empty (cross-only denominators).
double direction(const Matrix& e_cross, const Matrix& e_intra, const Matrix& mask) {
  const std::size_t n = e_cross.rows();
  const bool with_intra = e_intra.rows() != 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      denom += e_cross(i, j);
      if (with_intra) denom += e_intra(i, j);
    }
    double inner = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (mask(i, p) == 0.0) continue;
      double numer = e_cross(i, p);
      if (with_intra) numer += e_intra(i, p);
      inner += std::log(numer / denom);
      ++count;
    }
    if (count == 0) throw EmptyPositiveSetError(i);
    loss -= inner / static_cast<double>(count);
  }
  return loss / static_cast<double>(n);
}

}  // namespace

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) sq += m(i, j) * m(i, j);
    const double norm = std::sqrt(sq);
    if (norm <= 1e-12) throw ZeroRowError(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) / norm;
  }
  return out;
}

Matrix similarity(const Matrix& a, const Matrix& b) {
  Matrix s(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) dot += a(i, k) * b(j, k);
      s(i, j) = dot;
    }
  }
  return s;
}

Matrix positive_mask(const Matrix& s, double lambda) {
  Matrix p(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) p(i, j) = s(i, j) - lambda >= 0.0 ? 1.0 : 0.0;
    if (lambda <= 1.0) p(i, i) = 1.0;
  }
  return p;
}

Matrix joint_positive_mask(const Matrix& s_11, const Matrix& s_22, double lambda) {
  Matrix pooled(s_11.rows(), s_11.cols());
  for (std::size_t i = 0; i < s_11.rows(); ++i) {
    for (std::size_t j = 0; j < s_11.cols(); ++j) {
      pooled(i, j) = s_11(i, j) > s_22(i, j) ? s_11(i, j) : s_22(i, j);
    }
  }
  return positive_mask(pooled, lambda);
}

double info_nce(const Matrix& z_i, const Matrix& z_t, double tau) {
  const std::size_t n = z_i.rows();
  const Matrix e_it = tempered(similarity(z_i, z_t), tau);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) denom += e_it(i, j);
    loss -= std::log(e_it(i, i) / denom);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) denom += e_it(j, i);
    loss -= std::log(e_it(i, i) / denom);
  }
  return loss / static_cast<double>(n);
}

double simcon(const Matrix& z_i, const Matrix& z_t, const Matrix& mask_i, const Matrix& mask_t,
              double tau) {
  const Matrix s_it = similarity(z_i, z_t);
  const Matrix e_it = tempered(s_it, tau);
  const Matrix e_ti = transpose(e_it);
  const Matrix e_ii = tempered(similarity(z_i, z_i), tau);
  const Matrix e_tt = tempered(similarity(z_t, z_t), tau);
  return direction(e_it, e_ii, mask_i) + direction(e_ti, e_tt, mask_t);
}

double mv_simcon(const Matrix& z_i1, const Matrix& z_i2, const Matrix& z_t, double tau,
                 double lambda) {
  const Matrix s_11 = similarity(z_i1, z_i1);
  const Matrix s_22 = similarity(z_i2, z_i2);
  const Matrix s_tt = similarity(z_t, z_t);
  const Matrix joint = joint_positive_mask(s_11, s_22, lambda);
  const Matrix txt = positive_mask(s_tt, lambda);

  const Matrix e_1t = tempered(similarity(z_i1, z_t), tau);
  const Matrix e_2t = tempered(similarity(z_i2, z_t), tau);
  const Matrix e_11 = tempered(s_11, tau);
  const Matrix e_22 = tempered(s_22, tau);
  const Matrix e_tt = tempered(s_tt, tau);

  return direction(e_1t, e_11, joint) + direction(e_2t, e_22, joint) +
         direction(transpose(e_1t), e_tt, txt) + direction(transpose(e_2t), e_tt, txt);
}

Matrix head_forward(const Mlp& head, const Matrix& z) {
  Matrix x = z;
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    const Layer& layer = head.layers[l];
    Matrix y(x.rows(), layer.weight.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t o = 0; o < layer.weight.cols(); ++o) {
        double acc = layer.bias[o];
        for (std::size_t k = 0; k < x.cols(); ++k) acc += x(i, k) * layer.weight(k, o);
        y(i, o) = l + 1 < head.layers.size() ? std::tanh(acc) : acc;
      }
    }
    x = y;
  }
  return normalize_rows(x);
}

double ncs(const Matrix& z_i1, const Matrix& z_i2, const Mlp& head) {
  const Matrix p1 = head_forward(head, z_i1);
  const Matrix p2 = head_forward(head, z_i2);
  const std::size_t n = z_i1.rows();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dot1 = 0.0, dot2 = 0.0;
    for (std::size_t k = 0; k < p1.cols(); ++k) {
      dot1 += p1(i, k) * z_i2(i, k);
      dot2 += p2(i, k) * z_i1(i, k);
    }
    loss -= 0.5 * dot1 + 0.5 * dot2;
  }
  return loss / static_cast<double>(n);
}

double total(const Matrix& z_i1, const Matrix& z_i2, const Matrix& z_t, double tau, double lambda,
             const Mlp& head) {
  return mv_simcon(z_i1, z_i2, z_t, tau, lambda) + ncs(z_i1, z_i2, head);
}

double lambda_at_epoch(double initial, double step, const std::vector<std::size_t>& boundaries,
                       double floor, std::size_t epoch) {
  double value = initial;
  for (std::size_t b : boundaries) {
    if (epoch > b) value -= step;
  }
  return value < floor ? floor : value;
}

double lr_at_step(double init_lr, double max_lr, double min_lr, std::size_t warmup_steps,
                  std::size_t total_steps, std::size_t step) {
  if (warmup_steps > 0 && step <= warmup_steps) {
    const double frac = static_cast<double>(step) / static_cast<double>(warmup_steps);
    return init_lr + (max_lr - init_lr) * frac;
  }
  if (step >= total_steps) return min_lr;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return min_lr + 0.5 * (max_lr - min_lr) * (1.0 + std::cos(progress * 3.14159265358979323846));
}

}  // namespace simcon::oracle
