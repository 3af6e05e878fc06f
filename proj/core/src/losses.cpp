#include "simcon/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "simcon/errors.hpp"

namespace simcon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_temperature(const Temperature& temp) {
  if (!(temp.tau > 0.0) || !std::isfinite(temp.tau)) {
    throw InvalidSpecError("temperature must be finite and positive, got " +
                           std::to_string(temp.tau));
  }
}

void require_pair(const EmbeddingBatch& a, const EmbeddingBatch& b, const char* what) {
  if (a.batch_size() == 0 || b.batch_size() == 0) throw EmptyInputError(what);
  if (a.batch_size() != b.batch_size()) {
    throw ShapeMismatchError(std::string(what) + ": batch sizes " +
                             std::to_string(a.batch_size()) + " vs " +
                             std::to_string(b.batch_size()));
  }
  if (a.dim() != b.dim()) {
    throw DimMismatchError(std::string(what) + ": dims " + std::to_string(a.dim()) + " vs " +
                           std::to_string(b.dim()));
  }
}

void require_mask(const PositiveMask& m, std::size_t n, const char* what) {
  if (m.mask.rows() != n || m.mask.cols() != n) {
    throw ShapeMismatchError(std::string(what) + ": mask is " + std::to_string(m.mask.rows()) +
                             "x" + std::to_string(m.mask.cols()) + ", batch is " +
                             std::to_string(n));
  }
}

// One anchor direction of the similarity-aware loss. s_cross holds the
// anchor-to-other similarities; s_intra (optional) the anchor-to-anchor ones.
// Everything is evaluated with a per-row shift by the max logit across both
// matrices, so a single exp per entry yields both the stable log ratio and
// the softmax-style gradient factors.
struct DirectionOutcome {
  double value = 0.0;
  Matrix g_cross;  // dL/dS_cross
  Matrix g_intra;  // dL/dS_intra; empty when no intra terms
  double grad_tau = 0.0;
  // Per-row log of the summed numerator mass and of the diagonal intra term
  // (shift removed), for the diag_numerator_share diagnostic.
  std::vector<double> row_log_numer;
  std::vector<double> row_log_diag;
};

DirectionOutcome simcon_direction(const SimilarityMatrix& s_cross,
                                  const SimilarityMatrix* s_intra, const PositiveMask& mask,
                                  double tau) {
  const std::size_t n = s_cross.rows();
  const double inv_b_tau = 1.0 / (static_cast<double>(n) * tau);

  DirectionOutcome out;
  out.g_cross = Matrix(n, n);
  if (s_intra != nullptr) out.g_intra = Matrix(n, n);
  out.row_log_numer.assign(n, -kInf);
  out.row_log_diag.assign(n, -kInf);

  std::vector<double> e_cross(n), e_intra(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row_c = s_cross.row(i);
    double m = -kInf;
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, row_c[j] / tau);
    if (s_intra != nullptr) {
      const auto row_i = s_intra->row(i);
      for (std::size_t j = 0; j < n; ++j) m = std::max(m, row_i[j] / tau);
    }

    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      e_cross[j] = std::exp(row_c[j] / tau - m);
      denom += e_cross[j];
    }
    if (s_intra != nullptr) {
      const auto row_i = s_intra->row(i);
      for (std::size_t j = 0; j < n; ++j) {
        e_intra[j] = std::exp(row_i[j] / tau - m);
        denom += e_intra[j];
      }
    }

    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask.mask(i, j) != 0.0) ++positives;
    }
    if (positives == 0) throw EmptyPositiveSetError(i);
    const double inv_pos = 1.0 / static_cast<double>(positives);
    const double log_denom = std::log(denom);

    double row_value = 0.0;
    double numer_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double numer = s_intra != nullptr ? e_cross[j] + e_intra[j] : e_cross[j];
      double g = e_cross[j] / denom;
      if (mask.mask(i, j) != 0.0) {
        row_value += std::log(numer) - log_denom;
        numer_sum += numer;
        g -= inv_pos * e_cross[j] / numer;
      }
      out.g_cross(i, j) = inv_b_tau * g;
      if (s_intra != nullptr) {
        double gi = e_intra[j] / denom;
        if (mask.mask(i, j) != 0.0) gi -= inv_pos * e_intra[j] / numer;
        out.g_intra(i, j) = inv_b_tau * gi;
      }
    }
    out.value -= inv_pos * row_value / static_cast<double>(n);
    out.row_log_numer[i] = m + std::log(numer_sum);
    if (s_intra != nullptr && mask.mask(i, i) != 0.0) {
      out.row_log_diag[i] = (*s_intra)(i, i) / tau;
    }
  }

  // The loss depends on the similarities only through S/tau, so
  // dL/dtau = -(1/tau) sum_ij G_ij S_ij over every similarity matrix.
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) acc += out.g_cross(i, j) * s_cross(i, j);
  }
  if (s_intra != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) acc += out.g_intra(i, j) * (*s_intra)(i, j);
    }
  }
  out.grad_tau = -acc / tau;
  return out;
}

double logsumexp_of(const std::vector<const std::vector<double>*>& rows) {
  double m = -kInf;
  for (const auto* r : rows) {
    for (double v : *r) m = std::max(m, v);
  }
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (const auto* r : rows) {
    for (double v : *r) s += std::exp(v - m);
  }
  return m + std::log(s);
}

// Share of the total numerator mass carried by the diagonal intra terms,
// combined across directions in the log domain.
double diag_share(const std::vector<const DirectionOutcome*>& dirs) {
  std::vector<const std::vector<double>*> numer, diag;
  for (const auto* d : dirs) {
    numer.push_back(&d->row_log_numer);
    diag.push_back(&d->row_log_diag);
  }
  const double log_total = logsumexp_of(numer);
  const double log_diag = logsumexp_of(diag);
  if (log_diag == -kInf) return 0.0;
  return std::exp(log_diag - log_total);
}

// Accumulates y += (G + G^T) x, the pull-back of an intra-modal similarity
// gradient onto its embeddings.
void add_symmetrized_pullback(const Matrix& g, const Matrix& x, Matrix& y) {
  Matrix sym = g;
  const std::size_t n = g.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sym(i, j) += g(j, i);
  }
  axpy(1.0, matmul(sym, x), y);
}

}  // namespace

TemperedExponents compute_tempered_exponents(const SimilarityMatrix& s_it,
                                             const SimilarityMatrix& s_ii,
                                             const SimilarityMatrix& s_tt,
                                             const Temperature& temp) {
  require_temperature(temp);
  TemperedExponents out;
  out.tau_used = temp.tau;
  auto tempered = [&](const SimilarityMatrix& s) {
    Matrix e(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
      for (std::size_t j = 0; j < s.cols(); ++j) e(i, j) = std::exp(s(i, j) / temp.tau);
    }
    return e;
  };
  out.e_it = tempered(s_it);
  out.e_ii = tempered(s_ii);
  out.e_tt = tempered(s_tt);
  require_finite(out.e_it, "tempered exponents (cross)");
  require_finite(out.e_ii, "tempered exponents (image)");
  require_finite(out.e_tt, "tempered exponents (text)");
  return out;
}

PositiveMask PositiveMask::identity(std::size_t n) {
  PositiveMask p;
  p.mask = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) p.mask(i, i) = 1.0;
  p.lambda_used = -1.0;
  return p;
}

std::size_t PositiveMask::row_count(std::size_t i) const {
  std::size_t c = 0;
  for (std::size_t j = 0; j < mask.cols(); ++j) {
    if (mask(i, j) != 0.0) ++c;
  }
  return c;
}

double PositiveMask::mean_row_count() const {
  if (mask.rows() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < mask.rows(); ++i) s += static_cast<double>(row_count(i));
  return s / static_cast<double>(mask.rows());
}

PositiveMask positive_mask_from(const SimilarityMatrix& s, double lambda) {
  if (s.rows() != s.cols()) {
    throw ShapeMismatchError("positive mask needs a square similarity matrix, got " +
                             std::to_string(s.rows()) + "x" + std::to_string(s.cols()));
  }
  PositiveMask p;
  p.lambda_used = lambda;
  p.mask = Matrix(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      p.mask(i, j) = s(i, j) - lambda >= 0.0 ? 1.0 : 0.0;
    }
    if (lambda <= 1.0) p.mask(i, i) = 1.0;
  }
  return p;
}

std::pair<PositiveMask, PositiveMask> positive_masks(const SimilarityMatrix& s_ii,
                                                     const SimilarityMatrix& s_tt, double lambda) {
  return {positive_mask_from(s_ii, lambda), positive_mask_from(s_tt, lambda)};
}

PositiveMask joint_positive_mask(const SimilarityMatrix& s_11, const SimilarityMatrix& s_22,
                                 double lambda) {
  if (!s_11.same_shape(s_22)) {
    throw ShapeMismatchError("joint mask needs equally shaped view similarities");
  }
  Matrix pooled(s_11.rows(), s_11.cols());
  for (std::size_t i = 0; i < s_11.rows(); ++i) {
    for (std::size_t j = 0; j < s_11.cols(); ++j) pooled(i, j) = std::max(s_11(i, j), s_22(i, j));
  }
  return positive_mask_from(pooled, lambda);
}

double LossDiagnostics::term(const std::string& name) const {
  for (const auto& [key, value] : terms) {
    if (key == name) return value;
  }
  throw InvalidSpecError("no diagnostic term named " + name);
}

LossOutput info_nce(const EmbeddingBatch& z_i, const EmbeddingBatch& z_t,
                    const Temperature& temp) {
  require_temperature(temp);
  require_pair(z_i, z_t, "info_nce");
  const std::size_t n = z_i.batch_size();
  const PositiveMask id = PositiveMask::identity(n);

  const SimilarityMatrix s_it = cosine_similarity_matrix(z_i, z_t);
  const SimilarityMatrix s_ti = transpose(s_it);
  const DirectionOutcome d_it = simcon_direction(s_it, nullptr, id, temp.tau);
  const DirectionOutcome d_ti = simcon_direction(s_ti, nullptr, id, temp.tau);

  LossOutput out;
  out.value = d_it.value + d_ti.value;
  out.grad_tau = d_it.grad_tau + d_ti.grad_tau;

  // S_it = Z_i Z_t^T and the text direction differentiates its transpose.
  Matrix g_it = d_it.g_cross;
  const Matrix g_ti_t = transpose(d_ti.g_cross);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g_it(i, j) += g_ti_t(i, j);
  }
  out.grad["z_i"] = matmul(g_it, z_t.matrix);
  out.grad["z_t"] = matmul(transpose(g_it), z_i.matrix);

  out.diag.mean_positives_image = 1.0;
  out.diag.mean_positives_text = 1.0;
  out.diag.terms = {{"image_to_text", d_it.value}, {"text_to_image", d_ti.value}};
  if (!std::isfinite(out.value)) throw NonFiniteError("info_nce value");
  return out;
}

LossOutput simcon(const EmbeddingBatch& z_i, const EmbeddingBatch& z_t, const PositiveMask& p_i,
                  const PositiveMask& p_t, const Temperature& temp, bool drop_intra_modal) {
  require_temperature(temp);
  require_pair(z_i, z_t, "simcon");
  const std::size_t n = z_i.batch_size();
  require_mask(p_i, n, "simcon image mask");
  require_mask(p_t, n, "simcon text mask");

  const SimilarityMatrix s_it = cosine_similarity_matrix(z_i, z_t);
  const SimilarityMatrix s_ti = transpose(s_it);
  SimilarityMatrix s_ii, s_tt;
  const SimilarityMatrix* intra_i = nullptr;
  const SimilarityMatrix* intra_t = nullptr;
  if (!drop_intra_modal) {
    s_ii = cosine_similarity_matrix(z_i, z_i);
    s_tt = cosine_similarity_matrix(z_t, z_t);
    intra_i = &s_ii;
    intra_t = &s_tt;
  }

  const DirectionOutcome d_img = simcon_direction(s_it, intra_i, p_i, temp.tau);
  const DirectionOutcome d_txt = simcon_direction(s_ti, intra_t, p_t, temp.tau);

  LossOutput out;
  out.value = d_img.value + d_txt.value;
  out.grad_tau = d_img.grad_tau + d_txt.grad_tau;

  Matrix g_it = d_img.g_cross;
  const Matrix g_ti_t = transpose(d_txt.g_cross);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g_it(i, j) += g_ti_t(i, j);
  }
  Matrix dz_i = matmul(g_it, z_t.matrix);
  Matrix dz_t = matmul(transpose(g_it), z_i.matrix);
  if (!drop_intra_modal) {
    add_symmetrized_pullback(d_img.g_intra, z_i.matrix, dz_i);
    add_symmetrized_pullback(d_txt.g_intra, z_t.matrix, dz_t);
  }
  out.grad["z_i"] = std::move(dz_i);
  out.grad["z_t"] = std::move(dz_t);

  out.diag.mean_positives_image = p_i.mean_row_count();
  out.diag.mean_positives_text = p_t.mean_row_count();
  out.diag.diag_numerator_share = diag_share({&d_img, &d_txt});
  out.diag.terms = {{"image_to_text", d_img.value}, {"text_to_image", d_txt.value}};
  if (!std::isfinite(out.value)) throw NonFiniteError("simcon value");
  return out;
}

LossOutput mv_simcon_given_masks(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                                 const EmbeddingBatch& z_t, const Temperature& temp,
                                 const PositiveMask& mask_img1, const PositiveMask& mask_img2,
                                 const PositiveMask& mask_txt) {
  require_temperature(temp);
  require_pair(z_i1, z_t, "mv_simcon view 1");
  require_pair(z_i2, z_t, "mv_simcon view 2");
  const std::size_t n = z_t.batch_size();
  require_mask(mask_img1, n, "mv_simcon view-1 mask");
  require_mask(mask_img2, n, "mv_simcon view-2 mask");
  require_mask(mask_txt, n, "mv_simcon text mask");

  const SimilarityMatrix s_1t = cosine_similarity_matrix(z_i1, z_t);
  const SimilarityMatrix s_2t = cosine_similarity_matrix(z_i2, z_t);
  const SimilarityMatrix s_t1 = transpose(s_1t);
  const SimilarityMatrix s_t2 = transpose(s_2t);
  const SimilarityMatrix s_11 = cosine_similarity_matrix(z_i1, z_i1);
  const SimilarityMatrix s_22 = cosine_similarity_matrix(z_i2, z_i2);
  const SimilarityMatrix s_tt = cosine_similarity_matrix(z_t, z_t);

  const DirectionOutcome d_1t = simcon_direction(s_1t, &s_11, mask_img1, temp.tau);
  const DirectionOutcome d_2t = simcon_direction(s_2t, &s_22, mask_img2, temp.tau);
  const DirectionOutcome d_t1 = simcon_direction(s_t1, &s_tt, mask_txt, temp.tau);
  const DirectionOutcome d_t2 = simcon_direction(s_t2, &s_tt, mask_txt, temp.tau);

  LossOutput out;
  out.value = d_1t.value + d_2t.value + d_t1.value + d_t2.value;
  out.grad_tau = d_1t.grad_tau + d_2t.grad_tau + d_t1.grad_tau + d_t2.grad_tau;

  auto combined_cross = [n](const DirectionOutcome& img_dir, const DirectionOutcome& txt_dir) {
    Matrix g = img_dir.g_cross;
    const Matrix gt = transpose(txt_dir.g_cross);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) g(i, j) += gt(i, j);
    }
    return g;
  };
  const Matrix g_1t = combined_cross(d_1t, d_t1);
  const Matrix g_2t = combined_cross(d_2t, d_t2);

  Matrix dz_1 = matmul(g_1t, z_t.matrix);
  add_symmetrized_pullback(d_1t.g_intra, z_i1.matrix, dz_1);
  Matrix dz_2 = matmul(g_2t, z_t.matrix);
  add_symmetrized_pullback(d_2t.g_intra, z_i2.matrix, dz_2);
  Matrix dz_t = matmul(transpose(g_1t), z_i1.matrix);
  axpy(1.0, matmul(transpose(g_2t), z_i2.matrix), dz_t);
  add_symmetrized_pullback(d_t1.g_intra, z_t.matrix, dz_t);
  add_symmetrized_pullback(d_t2.g_intra, z_t.matrix, dz_t);

  out.grad["z_i1"] = std::move(dz_1);
  out.grad["z_i2"] = std::move(dz_2);
  out.grad["z_t"] = std::move(dz_t);

  out.diag.mean_positives_image =
      0.5 * (mask_img1.mean_row_count() + mask_img2.mean_row_count());
  out.diag.mean_positives_text = mask_txt.mean_row_count();
  out.diag.diag_numerator_share = diag_share({&d_1t, &d_2t, &d_t1, &d_t2});
  out.diag.terms = {{"view1_to_text", d_1t.value},
                    {"view2_to_text", d_2t.value},
                    {"text_to_view1", d_t1.value},
                    {"text_to_view2", d_t2.value}};
  if (!std::isfinite(out.value)) throw NonFiniteError("mv_simcon value");
  return out;
}

LossOutput mv_simcon(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                     const EmbeddingBatch& z_t, const Temperature& temp, double lambda) {
  require_pair(z_i1, z_i2, "mv_simcon views");
  const SimilarityMatrix s_11 = cosine_similarity_matrix(z_i1, z_i1);
  const SimilarityMatrix s_22 = cosine_similarity_matrix(z_i2, z_i2);
  const SimilarityMatrix s_tt = cosine_similarity_matrix(z_t, z_t);
  const PositiveMask joint = joint_positive_mask(s_11, s_22, lambda);
  const PositiveMask txt = positive_mask_from(s_tt, lambda);
  return mv_simcon_given_masks(z_i1, z_i2, z_t, temp, joint, joint, txt);
}

LossOutput ncs_loss_given_targets(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                                  const EmbeddingBatch& target_1, const EmbeddingBatch& target_2,
                                  const NcsSpec& spec) {
  if (spec.head == nullptr) throw InvalidSpecError("ncs_loss needs a projection head");
  require_pair(z_i1, z_i2, "ncs_loss views");
  require_pair(z_i1, target_1, "ncs_loss view-1 target");
  require_pair(z_i2, target_2, "ncs_loss view-2 target");
  const std::size_t n = z_i1.batch_size();

  const ForwardCache c1 = project_cached(*spec.head, z_i1);
  const ForwardCache c2 = project_cached(*spec.head, z_i2);
  const EmbeddingBatch& p1 = c1.output;
  const EmbeddingBatch& p2 = c2.output;

  // L = -(1/B) sum_i [ 1/2 p1_i . t2_i + 1/2 p2_i . t1_i ], so the upstream
  // gradient at each projection output is -(1/2B) times the opposite target.
  const double scale = -0.5 / static_cast<double>(n);
  double value = 0.0;
  Matrix dp1(n, p1.dim()), dp2(n, p2.dim());
  for (std::size_t i = 0; i < n; ++i) {
    double dot1 = 0.0, dot2 = 0.0;
    for (std::size_t k = 0; k < p1.dim(); ++k) {
      dot1 += p1.matrix(i, k) * target_2.matrix(i, k);
      dot2 += p2.matrix(i, k) * target_1.matrix(i, k);
      dp1(i, k) = scale * target_2.matrix(i, k);
      dp2(i, k) = scale * target_1.matrix(i, k);
    }
    value += scale * (dot1 + dot2);
  }

  LossOutput out;
  out.value = value;
  Matrix dz1, dz2;
  MlpGrads head_grad = encoder_backward(spec.head->net, c1, dp1, &dz1);
  accumulate(head_grad, encoder_backward(spec.head->net, c2, dp2, &dz2));
  out.grad["z_i1"] = std::move(dz1);
  out.grad["z_i2"] = std::move(dz2);
  out.head_grad = std::move(head_grad);
  out.diag.terms = {{"ncs", value}};
  if (!std::isfinite(out.value)) throw NonFiniteError("ncs value");
  return out;
}

LossOutput ncs_loss(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2, const NcsSpec& spec) {
  return ncs_loss_given_targets(z_i1, z_i2, z_i1, z_i2, spec);
}

LossOutput total_loss(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                      const EmbeddingBatch& z_t, const Temperature& temp, double lambda,
                      const NcsSpec& spec) {
  LossOutput mv = mv_simcon(z_i1, z_i2, z_t, temp, lambda);
  LossOutput ncs = ncs_loss(z_i1, z_i2, spec);

  LossOutput out;
  out.value = mv.value + ncs.value;
  out.grad_tau = mv.grad_tau;
  out.grad["z_t"] = std::move(mv.grad["z_t"]);
  Matrix dz1 = std::move(mv.grad["z_i1"]);
  axpy(1.0, ncs.grad["z_i1"], dz1);
  Matrix dz2 = std::move(mv.grad["z_i2"]);
  axpy(1.0, ncs.grad["z_i2"], dz2);
  out.grad["z_i1"] = std::move(dz1);
  out.grad["z_i2"] = std::move(dz2);
  out.head_grad = std::move(ncs.head_grad);

  out.diag = mv.diag;
  out.diag.terms.emplace_back("mv_simcon", mv.value);
  out.diag.terms.emplace_back("ncs", ncs.value);
  if (!std::isfinite(out.value)) throw NonFiniteError("total loss value");
  return out;
}

}  // namespace simcon
