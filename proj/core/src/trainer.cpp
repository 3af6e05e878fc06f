#include "simcon/trainer.hpp"

#include <chrono>
#include <cmath>

#include "simcon/errors.hpp"
#include "simcon/schedules.hpp"

namespace simcon {

namespace {

constexpr std::uint64_t kDataTag = 0x21;
constexpr std::uint64_t kImgEncTag = 0x22;
constexpr std::uint64_t kTxtEncTag = 0x23;
constexpr std::uint64_t kHeadTag = 0x24;
constexpr std::uint64_t kBatchTag = 0x25;
constexpr std::uint64_t kAugTag = 0x26;

// Temperature is optimized through an unconstrained scale s with
// tau = exp(-s); clamping s keeps tau within [1e-3, 1].
constexpr double kTauScaleMin = 0.0;
const double kTauScaleMax = std::log(1000.0);

struct ParamSlot {
  std::span<double> params;
  bool decay = false;
  AdamState state;
};

void append_mlp_slots(Mlp& net, std::vector<ParamSlot>& slots) {
  for (Layer& layer : net.layers) {
    slots.push_back({layer.weight.flat(), true, {}});
    slots.push_back({std::span<double>(layer.bias), false, {}});
  }
}

void append_mlp_grads(const MlpGrads& grads, std::vector<std::span<const double>>& out) {
  for (const LayerGrads& lg : grads.layers) {
    out.push_back(lg.weight.flat());
    out.push_back(std::span<const double>(lg.bias));
  }
}

EmbeddingBatch slice_rows(const EmbeddingBatch& z, std::size_t begin, std::size_t count) {
  Matrix m(count, z.dim());
  for (std::size_t r = 0; r < count; ++r) {
    const auto src = z.matrix.row(begin + r);
    for (std::size_t j = 0; j < z.dim(); ++j) m(r, j) = src[j];
  }
  return EmbeddingBatch::trusted(std::move(m));
}

// The eval split is round robin over classes, so consecutive blocks of K
// rows hold exactly one sample per class. Recall@1 over the full split would
// saturate at the class level (any same-class caption is an equally good
// match), so retrieval is scored within those one-per-class blocks and
// averaged; a trailing partial block is dropped.
std::pair<double, double> episode_recall(const EmbeddingBatch& z_images,
                                         const EmbeddingBatch& z_texts, std::size_t classes) {
  const std::size_t blocks = z_images.batch_size() / classes;
  double sum_i2t = 0.0, sum_t2i = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const EmbeddingBatch zi = slice_rows(z_images, b * classes, classes);
    const EmbeddingBatch zt = slice_rows(z_texts, b * classes, classes);
    const auto [r_i2t, r_t2i] = eval_retrieval(zi, zt);
    sum_i2t += r_i2t;
    sum_t2i += r_t2i;
  }
  return {sum_i2t / static_cast<double>(blocks), sum_t2i / static_cast<double>(blocks)};
}

double term_sum(const LossDiagnostics& diag, std::initializer_list<const char*> keys) {
  double s = 0.0;
  for (const auto& [name, value] : diag.terms) {
    for (const char* key : keys) {
      if (name == key) s += value;
    }
  }
  return s;
}

}  // namespace

void adamw_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                double lr, double weight_decay, const AdamParams& hp) {
  if (params.size() != grads.size()) {
    throw ShapeMismatchError("adamw_step: " + std::to_string(params.size()) + " params vs " +
                             std::to_string(grads.size()) + " grads");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  } else if (state.m.size() != params.size()) {
    throw ShapeMismatchError("adamw_step: optimizer state does not match parameter count");
  }
  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grads[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + hp.eps) + weight_decay * params[i]);
  }
}

std::pair<double, double> eval_retrieval(const EmbeddingBatch& z_images,
                                         const EmbeddingBatch& z_texts) {
  const SimilarityMatrix s = cosine_similarity_matrix(z_images, z_texts);
  const std::size_t n = s.rows();
  std::size_t hits_i2t = 0, hits_t2i = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (s(i, j) > s(i, best)) best = j;
    }
    if (best == i) ++hits_i2t;
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (s(i, j) > s(best, j)) best = i;
    }
    if (best == j) ++hits_t2i;
  }
  const auto dn = static_cast<double>(n);
  return {static_cast<double>(hits_i2t) / dn, static_cast<double>(hits_t2i) / dn};
}

double eval_alignment(const EmbeddingBatch& z_images, const std::vector<std::size_t>& class_ids,
                      const EmbeddingBatch& class_prototypes) {
  if (class_ids.size() != z_images.batch_size()) {
    throw ShapeMismatchError("eval_alignment: one class id per image required");
  }
  const SimilarityMatrix s = cosine_similarity_matrix(z_images, class_prototypes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < s.cols(); ++c) {
      if (s(i, c) > s(i, best)) best = c;
    }
    if (best == class_ids[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

DatasetSpec dataset_spec_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  DatasetSpec dspec;
  dspec.classes = cfg.classes;
  dspec.samples = cfg.train_samples;
  dspec.image_dim = cfg.image_dim;
  dspec.text_dim = cfg.text_dim;
  dspec.within_class_sigma = cfg.within_class_sigma;
  dspec.swap_prob = cfg.caption_swap_prob;
  dspec.seed = mix_seed(seed, kDataTag);
  return dspec;
}

TrainResult train(const ExperimentConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch) {
  ExperimentConfig c = cfg;
  validate(c);
  const bool mv = c.loss_kind == LossKind::kMvSimCon;
  const bool with_ncs = c.ncs_enabled();
  const bool joint = c.joint_positives();

  const DatasetSpec dspec = dataset_spec_for(c, seed);
  const Dataset train_data = generate_dataset(dspec);

  // Held-out clean split: same seed (hence the same prototypes), sample
  // indices past the training range, captions never swapped.
  DatasetSpec espec = dspec;
  espec.samples = c.train_samples + c.eval_samples;
  espec.swap_prob = 0.0;
  Dataset eval_data;
  {
    Dataset full = generate_dataset(espec);
    eval_data.spec = espec;
    eval_data.spec.samples = c.eval_samples;
    eval_data.image_prototypes = std::move(full.image_prototypes);
    eval_data.text_prototypes = std::move(full.text_prototypes);
    eval_data.pairs.assign(full.pairs.begin() + static_cast<std::ptrdiff_t>(c.train_samples),
                           full.pairs.end());
  }
  std::vector<std::size_t> eval_indices(eval_data.size());
  for (std::size_t i = 0; i < eval_indices.size(); ++i) eval_indices[i] = i;
  const Matrix eval_images_raw = gather_images(eval_data, eval_indices);
  const Matrix eval_texts_raw = gather_texts(eval_data, eval_indices);
  std::vector<std::size_t> eval_classes(eval_data.size());
  for (std::size_t i = 0; i < eval_data.size(); ++i) eval_classes[i] = eval_data.pairs[i].class_id;

  Mlp img_enc = init_encoder(mix_seed(seed, kImgEncTag), c.image_dim, c.image_hidden_dims,
                             c.embed_dim);
  Mlp txt_enc = init_encoder(mix_seed(seed, kTxtEncTag), c.text_dim, c.text_hidden_dims,
                             c.embed_dim);
  ProjectionHead head = with_ncs ? init_projection_head(mix_seed(seed, kHeadTag), c.embed_dim,
                                                        c.head_hidden_dim)
                                 : ProjectionHead::identity();
  double tau_scale = -std::log(c.tau_init);

  std::vector<ParamSlot> slots;
  append_mlp_slots(img_enc, slots);
  append_mlp_slots(txt_enc, slots);
  if (with_ncs) append_mlp_slots(head.net, slots);
  AdamState tau_state;

  const LambdaSchedule lsched{c.lambda_init, c.lambda_step, c.lambda_boundaries(), c.lambda_floor};
  const LrSchedule lrsched{c.init_lr, c.max_lr, c.warmup_epochs, c.epochs, c.min_lr};
  const std::size_t steps_per_epoch = c.train_samples / c.batch_size;
  const ViewConfig view_cfg{c.view_noise_sigma, c.view_drop_prob};

  TrainResult result;
  std::size_t global_step = 0;
  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lambda = lambda_at_epoch(lsched, epoch);
    const auto batches = sample_batches(c.train_samples, c.batch_size,
                                        mix_seed(seed, kBatchTag, epoch));
    const std::uint64_t aug_seed = mix_seed(seed, kAugTag, epoch);

    double sum_total = 0.0, sum_i2t = 0.0, sum_t2i = 0.0, sum_ncs = 0.0;
    double sum_pos_img = 0.0, sum_pos_txt = 0.0;
    double lr = 0.0;
    for (const auto& idx : batches) {
      ++global_step;
      lr = lr_at_step(lrsched, global_step, steps_per_epoch);
      const double tau = std::exp(-tau_scale);
      const Temperature temp{tau, c.learn_tau};
      const Matrix texts_raw = gather_texts(train_data, idx);

      LossOutput out;
      MlpGrads img_grads, txt_grads;
      std::optional<MlpGrads> head_grads;
      if (mv) {
        auto [v1_raw, v2_raw] = gather_views(train_data, idx, view_cfg, aug_seed);
        const ForwardCache c1 = encode_cached(img_enc, v1_raw);
        const ForwardCache c2 = encode_cached(img_enc, v2_raw);
        const ForwardCache ct = encode_cached(txt_enc, texts_raw);
        const EmbeddingBatch& z1 = c1.output;
        const EmbeddingBatch& z2 = c2.output;
        const EmbeddingBatch& zt = ct.output;

        const SimilarityMatrix s11 = cosine_similarity_matrix(z1, z1);
        const SimilarityMatrix s22 = cosine_similarity_matrix(z2, z2);
        const SimilarityMatrix stt = cosine_similarity_matrix(zt, zt);
        PositiveMask m1, m2;
        if (joint) {
          m1 = joint_positive_mask(s11, s22, lambda);
          m2 = m1;
        } else {
          m1 = positive_mask_from(s11, lambda);
          m2 = positive_mask_from(s22, lambda);
        }
        const PositiveMask mt = positive_mask_from(stt, lambda);
        out = mv_simcon_given_masks(z1, z2, zt, temp, m1, m2, mt);
        if (with_ncs) {
          const NcsSpec spec{&head};
          LossOutput ncs = ncs_loss(z1, z2, spec);
          out.value += ncs.value;
          axpy(1.0, ncs.grad["z_i1"], out.grad["z_i1"]);
          axpy(1.0, ncs.grad["z_i2"], out.grad["z_i2"]);
          head_grads = std::move(ncs.head_grad);
          out.diag.terms.emplace_back("ncs", ncs.value);
        }
        img_grads = encoder_backward(img_enc, c1, out.grad["z_i1"]);
        accumulate(img_grads, encoder_backward(img_enc, c2, out.grad["z_i2"]));
        txt_grads = encoder_backward(txt_enc, ct, out.grad["z_t"]);
      } else {
        const Matrix images_raw = gather_images(train_data, idx);
        const ForwardCache ci = encode_cached(img_enc, images_raw);
        const ForwardCache ct = encode_cached(txt_enc, texts_raw);
        const EmbeddingBatch& zi = ci.output;
        const EmbeddingBatch& zt = ct.output;
        if (c.loss_kind == LossKind::kInfoNce) {
          out = info_nce(zi, zt, temp);
        } else {
          const SimilarityMatrix sii = cosine_similarity_matrix(zi, zi);
          const SimilarityMatrix stt = cosine_similarity_matrix(zt, zt);
          const auto [pi, pt] = positive_masks(sii, stt, lambda);
          out = simcon(zi, zt, pi, pt, temp);
        }
        img_grads = encoder_backward(img_enc, ci, out.grad["z_i"]);
        txt_grads = encoder_backward(txt_enc, ct, out.grad["z_t"]);
      }

      if (!std::isfinite(out.value)) {
        throw NonFiniteLossError(global_step, "loss value is not finite");
      }
      std::vector<std::span<const double>> grad_spans;
      append_mlp_grads(img_grads, grad_spans);
      append_mlp_grads(txt_grads, grad_spans);
      if (with_ncs) append_mlp_grads(*head_grads, grad_spans);
      for (const auto& span : grad_spans) {
        for (double g : span) {
          if (!std::isfinite(g)) {
            throw NonFiniteLossError(global_step, "parameter gradient is not finite");
          }
        }
      }
      if (grad_spans.size() != slots.size()) {
        throw ShapeMismatchError("trainer: gradient tensors do not match parameter slots");
      }
      for (std::size_t k = 0; k < slots.size(); ++k) {
        adamw_step(slots[k].state, slots[k].params, grad_spans[k], lr,
                   slots[k].decay ? c.weight_decay : 0.0);
      }
      if (c.learn_tau) {
        // dL/ds for tau = exp(-s); no weight decay on the temperature.
        double ds = -tau * out.grad_tau;
        if (!std::isfinite(ds)) {
          throw NonFiniteLossError(global_step, "temperature gradient is not finite");
        }
        adamw_step(tau_state, std::span<double>(&tau_scale, 1),
                   std::span<const double>(&ds, 1), lr, 0.0);
        tau_scale = std::clamp(tau_scale, kTauScaleMin, kTauScaleMax);
      }

      sum_total += out.value;
      sum_i2t += term_sum(out.diag, {"image_to_text", "view1_to_text", "view2_to_text"});
      sum_t2i += term_sum(out.diag, {"text_to_image", "text_to_view1", "text_to_view2"});
      sum_ncs += term_sum(out.diag, {"ncs"});
      sum_pos_img += out.diag.mean_positives_image;
      sum_pos_txt += out.diag.mean_positives_text;
    }

    const EmbeddingBatch z_eval_img = encode(img_enc, eval_images_raw);
    const EmbeddingBatch z_eval_txt = encode(txt_enc, eval_texts_raw);
    const EmbeddingBatch z_protos = encode(txt_enc, eval_data.text_prototypes);
    const auto [recall_i2t, recall_t2i] = episode_recall(z_eval_img, z_eval_txt, c.classes);

    EpochMetrics em;
    em.epoch = epoch;
    em.lambda = lambda;
    em.tau = std::exp(-tau_scale);
    em.lr = lr;
    const auto steps = static_cast<double>(batches.size());
    em.loss_total = sum_total / steps;
    em.loss_i2t = sum_i2t / steps;
    em.loss_t2i = sum_t2i / steps;
    em.loss_ncs = sum_ncs / steps;
    em.pos_per_image = sum_pos_img / steps;
    em.pos_per_text = sum_pos_txt / steps;
    em.recall_i2t = recall_i2t;
    em.recall_t2i = recall_t2i;
    em.alignment_acc = eval_alignment(z_eval_img, eval_classes, z_protos);
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(em);
    if (on_epoch) on_epoch(em);
  }

  result.image_encoder = std::move(img_enc);
  result.text_encoder = std::move(txt_enc);
  result.head = std::move(head);
  result.tau = std::exp(-tau_scale);
  return result;
}

}  // namespace simcon
