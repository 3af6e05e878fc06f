#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simcon/encoders.hpp"
#include "simcon/numerics.hpp"

namespace simcon {

// Softmax temperature. Trainable through an unconstrained scale s with
// tau = exp(-s); the trainer clamps tau to [1e-3, 1] after each step.
struct Temperature {
  double tau = 0.07;
  bool learnable = true;
};

// Temperature-controlled exponents of the similarity matrices,
// E[i][j] = exp(S[i][j] / tau). The loss kernels work in the log domain and
// never materialize these; this representation exists for inspection and
// small-scale checks.
struct TemperedExponents {
  Matrix e_it;
  Matrix e_ii;
  Matrix e_tt;
  double tau_used = 0.0;
};

TemperedExponents compute_tempered_exponents(const SimilarityMatrix& s_it,
                                             const SimilarityMatrix& s_ii,
                                             const SimilarityMatrix& s_tt,
                                             const Temperature& temp);

// Binary positive-relation matrix obtained by thresholding intra-modal
// similarities: mask[i][j] = 1 iff S[i][j] - lambda >= 0 (ties count as
// positive). The diagonal is set explicitly whenever lambda <= 1: in exact
// arithmetic self-similarity is 1, and the rounding of computed dot products
// must not break the every-anchor-has-a-positive guarantee.
struct PositiveMask {
  Matrix mask;  // entries are exactly 0.0 or 1.0
  double lambda_used = -1.0;

  static PositiveMask identity(std::size_t n);
  std::size_t row_count(std::size_t i) const;
  double mean_row_count() const;
};

PositiveMask positive_mask_from(const SimilarityMatrix& s, double lambda);

std::pair<PositiveMask, PositiveMask> positive_masks(const SimilarityMatrix& s_ii,
                                                     const SimilarityMatrix& s_tt, double lambda);

// Joint mask across two views: H(max(S11, S22) - lambda) elementwise.
PositiveMask joint_positive_mask(const SimilarityMatrix& s_11, const SimilarityMatrix& s_22,
                                 double lambda);

struct LossDiagnostics {
  double mean_positives_image = 0.0;
  double mean_positives_text = 0.0;
  // Fraction of the total numerator mass contributed by the intra-modal
  // self terms E^{II}_{ii} / E^{TT}_{ii}. Those terms equal exp(1/tau)
  // regardless of the data; this reports how much of the numerator they are.
  double diag_numerator_share = 0.0;
  std::vector<std::pair<std::string, double>> terms;

  double term(const std::string& name) const;
};

struct LossOutput {
  double value = 0.0;                  // nats
  std::map<std::string, Matrix> grad;  // keyed by input name (z_i, z_t, z_i1, z_i2)
  double grad_tau = 0.0;
  std::optional<MlpGrads> head_grad;   // present for losses with a projection head
  LossDiagnostics diag;
};

// Symmetric InfoNCE: mean over anchors of -log(E_ii / sum_j E_ij) in both
// directions, summed with unit weights. Computed in the log domain.
LossOutput info_nce(const EmbeddingBatch& z_i, const EmbeddingBatch& z_t,
                    const Temperature& temp);

// Similarity-aware contrastive loss. For each anchor, averages
// -log((E^cross_ip + E^intra_ip) / (sum_j E^cross_ij + sum_j E^intra_ij))
// over the positives p of the anchor's mask, then over anchors; both
// directions summed. Masks are constants: no gradient flows through the
// thresholding. drop_intra_modal removes the intra-modal exponent terms
// entirely (test-only pathway; with identity masks this reduces the loss to
// InfoNCE).
LossOutput simcon(const EmbeddingBatch& z_i, const EmbeddingBatch& z_t, const PositiveMask& p_i,
                  const PositiveMask& p_t, const Temperature& temp,
                  bool drop_intra_modal = false);

// Two-view loss with explicit masks (mask_img1/mask_img2 for the image
// anchors of each view, mask_txt for the text anchors). This is the
// fixed-mask kernel behind mv_simcon; gradient checks and the ablation
// variants call it directly.
LossOutput mv_simcon_given_masks(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                                 const EmbeddingBatch& z_t, const Temperature& temp,
                                 const PositiveMask& mask_img1, const PositiveMask& mask_img2,
                                 const PositiveMask& mask_txt);

// Full multi-view loss: builds the joint image mask from the detached
// intra-view similarities, the text mask from S^TT, and sums the per-view
// image-to-text and text-to-image terms.
LossOutput mv_simcon(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                     const EmbeddingBatch& z_t, const Temperature& temp, double lambda);

// Projection head plus the (inherent) stop-gradient on the target branch.
struct NcsSpec {
  const ProjectionHead* head = nullptr;
  static constexpr bool stop_grad_target = true;
};

// Negative cosine similarity between the projected embedding of one view and
// the stop-gradient of the other view, symmetrized:
//   -(1/|B|) sum_i [ 1/2 p(z1_i) . sg(z2_i) + 1/2 p(z2_i) . sg(z1_i) ]
// Projection outputs are renormalized, so the value lies in [-1, 1].
// Gradients flow only through the projected branch of each term.
LossOutput ncs_loss(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2, const NcsSpec& spec);

// ncs_loss with the stop-gradient targets frozen at explicit values; the
// gradient of this function w.r.t. z_i1/z_i2 is what ncs_loss reports, which
// makes it the right scalar map for finite-difference checks.
LossOutput ncs_loss_given_targets(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                                  const EmbeddingBatch& target_1, const EmbeddingBatch& target_2,
                                  const NcsSpec& spec);

// mv_simcon + ncs_loss with unit weights. Diagnostics carry the constituent
// values separately.
LossOutput total_loss(const EmbeddingBatch& z_i1, const EmbeddingBatch& z_i2,
                      const EmbeddingBatch& z_t, const Temperature& temp, double lambda,
                      const NcsSpec& spec);

}  // namespace simcon
