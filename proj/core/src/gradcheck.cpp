#include "simcon/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "simcon/encoders.hpp"
#include "simcon/losses.hpp"
#include "simcon/numerics.hpp"
#include "simcon/rng.hpp"

namespace simcon {

namespace {

constexpr double kStep = 1e-5;

// dL/dU for Z = l2_normalize_rows(U), given dL/dZ.
Matrix normalize_pullback(const Matrix& raw, const Matrix& grad_z) {
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < raw.cols(); ++j) sq += raw(i, j) * raw(i, j);
    const double norm = std::sqrt(sq);
    double dot = 0.0;
    for (std::size_t j = 0; j < raw.cols(); ++j) dot += grad_z(i, j) * raw(i, j) / norm;
    for (std::size_t j = 0; j < raw.cols(); ++j) {
      out(i, j) = (grad_z(i, j) - dot * raw(i, j) / norm) / norm;
    }
  }
  return out;
}

void append_flat(std::vector<double>& into, const Matrix& m) {
  const auto span = m.flat();
  into.insert(into.end(), span.begin(), span.end());
}

void append_flat(std::vector<double>& into, const std::vector<double>& v) {
  into.insert(into.end(), v.begin(), v.end());
}

Matrix random_raw(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

struct InstanceShape {
  std::size_t batch = 0;
  std::size_t dim = 0;
  double tau = 0.0;
  double lambda = 0.0;
};

InstanceShape draw_shape(Rng& rng, std::size_t instance) {
  InstanceShape s;
  s.batch = instance == 0 ? 1 : 1 + rng.uniform_below(8);
  s.dim = 2 + rng.uniform_below(15);
  s.tau = rng.uniform_below(2) == 0 ? 0.07 : 0.5;
  const std::size_t lam = rng.uniform_below(3);
  s.lambda = lam == 0 ? -1.0 : (lam == 1 ? 0.5 : 0.95);
  return s;
}

std::vector<Matrix> unpack(std::span<const double> flat,
                           const std::vector<const Matrix*>& like) {
  std::vector<Matrix> mats;
  std::size_t pos = 0;
  for (const Matrix* m : like) {
    Matrix out(m->rows(), m->cols());
    auto dst = out.flat();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = flat[pos + k];
    pos += dst.size();
    mats.push_back(std::move(out));
  }
  return mats;
}

// Runs the central-difference comparison for one instance. value_fn gets the
// raw matrices plus tau (when with_tau the last flat coordinate is tau).
void check_instance(const std::vector<const Matrix*>& raws, bool with_tau, double tau,
                    const std::function<double(const std::vector<Matrix>&, double)>& value_fn,
                    const std::vector<double>& analytic, GradSuiteResult& suite) {
  std::vector<double> x0;
  for (const Matrix* m : raws) append_flat(x0, *m);
  if (with_tau) x0.push_back(tau);

  const auto f = [&](std::span<const double> x) {
    const std::vector<Matrix> mats = unpack(x, raws);
    return value_fn(mats, with_tau ? x.back() : tau);
  };
  const std::vector<double> numeric = finite_difference_gradient(f, x0, kStep);
  const GradCompareResult cmp = compare_gradients(analytic, numeric);
  suite.instances += 1;
  suite.coordinates += cmp.count;
  suite.worst_rel = std::max(suite.worst_rel, cmp.worst_rel);
  suite.worst_abs = std::max(suite.worst_abs, cmp.worst_abs);
  suite.pass = suite.pass && cmp.pass;
}

GradSuiteResult suite_info_nce(std::uint64_t seed, std::size_t instances) {
  GradSuiteResult suite{.name = "info_nce"};
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng(mix_seed(seed, 0x31, k));
    const InstanceShape s = draw_shape(rng, k);
    const Matrix u_i = random_raw(rng, s.batch, s.dim);
    const Matrix u_t = random_raw(rng, s.batch, s.dim);

    const LossOutput out = info_nce(l2_normalize_rows(u_i), l2_normalize_rows(u_t),
                                    {s.tau, true});
    std::vector<double> analytic;
    append_flat(analytic, normalize_pullback(u_i, out.grad.at("z_i")));
    append_flat(analytic, normalize_pullback(u_t, out.grad.at("z_t")));
    analytic.push_back(out.grad_tau);

    check_instance({&u_i, &u_t}, true, s.tau,
                   [](const std::vector<Matrix>& m, double tau) {
                     return info_nce(l2_normalize_rows(m[0]), l2_normalize_rows(m[1]),
                                     {tau, true})
                         .value;
                   },
                   analytic, suite);
  }
  return suite;
}

GradSuiteResult suite_simcon(std::uint64_t seed, std::size_t instances, bool inject_fault) {
  GradSuiteResult suite{.name = "simcon"};
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng(mix_seed(seed, 0x32, k));
    const InstanceShape s = draw_shape(rng, k);
    const Matrix u_i = random_raw(rng, s.batch, s.dim);
    const Matrix u_t = random_raw(rng, s.batch, s.dim);
    const EmbeddingBatch z_i = l2_normalize_rows(u_i);
    const EmbeddingBatch z_t = l2_normalize_rows(u_t);
    const auto [p_i, p_t] = positive_masks(cosine_similarity_matrix(z_i, z_i),
                                           cosine_similarity_matrix(z_t, z_t), s.lambda);

    const LossOutput out = simcon(z_i, z_t, p_i, p_t, {s.tau, true});
    std::vector<double> analytic;
    append_flat(analytic, normalize_pullback(u_i, out.grad.at("z_i")));
    append_flat(analytic, normalize_pullback(u_t, out.grad.at("z_t")));
    analytic.push_back(out.grad_tau);
    if (inject_fault) analytic[0] += 1e-2;

    check_instance({&u_i, &u_t}, true, s.tau,
                   [&p_i = p_i, &p_t = p_t](const std::vector<Matrix>& m, double tau) {
                     return simcon(l2_normalize_rows(m[0]), l2_normalize_rows(m[1]), p_i, p_t,
                                   {tau, true})
                         .value;
                   },
                   analytic, suite);
  }
  return suite;
}

GradSuiteResult suite_mv_simcon(std::uint64_t seed, std::size_t instances) {
  GradSuiteResult suite{.name = "mv_simcon"};
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng(mix_seed(seed, 0x33, k));
    const InstanceShape s = draw_shape(rng, k);
    const Matrix u_1 = random_raw(rng, s.batch, s.dim);
    const Matrix u_2 = random_raw(rng, s.batch, s.dim);
    const Matrix u_t = random_raw(rng, s.batch, s.dim);
    const EmbeddingBatch z_1 = l2_normalize_rows(u_1);
    const EmbeddingBatch z_2 = l2_normalize_rows(u_2);
    const EmbeddingBatch z_t = l2_normalize_rows(u_t);
    const PositiveMask joint = joint_positive_mask(cosine_similarity_matrix(z_1, z_1),
                                                   cosine_similarity_matrix(z_2, z_2), s.lambda);
    const PositiveMask txt = positive_mask_from(cosine_similarity_matrix(z_t, z_t), s.lambda);

    const LossOutput out = mv_simcon_given_masks(z_1, z_2, z_t, {s.tau, true}, joint, joint, txt);
    std::vector<double> analytic;
    append_flat(analytic, normalize_pullback(u_1, out.grad.at("z_i1")));
    append_flat(analytic, normalize_pullback(u_2, out.grad.at("z_i2")));
    append_flat(analytic, normalize_pullback(u_t, out.grad.at("z_t")));
    analytic.push_back(out.grad_tau);

    check_instance({&u_1, &u_2, &u_t}, true, s.tau,
                   [&joint = joint, &txt = txt](const std::vector<Matrix>& m, double tau) {
                     return mv_simcon_given_masks(l2_normalize_rows(m[0]), l2_normalize_rows(m[1]),
                                                  l2_normalize_rows(m[2]), {tau, true}, joint,
                                                  joint, txt)
                         .value;
                   },
                   analytic, suite);
  }
  return suite;
}

GradSuiteResult suite_ncs(std::uint64_t seed, std::size_t instances) {
  GradSuiteResult suite{.name = "ncs_loss"};
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng(mix_seed(seed, 0x34, k));
    const InstanceShape s = draw_shape(rng, k);
    const std::size_t hidden = 2 + rng.uniform_below(7);
    const ProjectionHead head = init_projection_head(mix_seed(seed, 0x44, k), s.dim, hidden);
    const NcsSpec spec{&head};
    const Matrix u_1 = random_raw(rng, s.batch, s.dim);
    const Matrix u_2 = random_raw(rng, s.batch, s.dim);
    const EmbeddingBatch t_1 = l2_normalize_rows(u_1);
    const EmbeddingBatch t_2 = l2_normalize_rows(u_2);

    const LossOutput out = ncs_loss(t_1, t_2, spec);
    std::vector<double> analytic;
    append_flat(analytic, normalize_pullback(u_1, out.grad.at("z_i1")));
    append_flat(analytic, normalize_pullback(u_2, out.grad.at("z_i2")));

    check_instance({&u_1, &u_2}, false, 0.0,
                   [&t_1 = t_1, &t_2 = t_2, &spec = spec](const std::vector<Matrix>& m, double) {
                     return ncs_loss_given_targets(l2_normalize_rows(m[0]),
                                                   l2_normalize_rows(m[1]), t_1, t_2, spec)
                         .value;
                   },
                   analytic, suite);
  }
  return suite;
}

GradSuiteResult suite_total(std::uint64_t seed, std::size_t instances) {
  GradSuiteResult suite{.name = "total_loss"};
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng(mix_seed(seed, 0x35, k));
    const InstanceShape s = draw_shape(rng, k);
    const std::size_t hidden = 2 + rng.uniform_below(7);
    const ProjectionHead head = init_projection_head(mix_seed(seed, 0x45, k), s.dim, hidden);
    const NcsSpec spec{&head};
    const Matrix u_1 = random_raw(rng, s.batch, s.dim);
    const Matrix u_2 = random_raw(rng, s.batch, s.dim);
    const Matrix u_t = random_raw(rng, s.batch, s.dim);
    const EmbeddingBatch z_1 = l2_normalize_rows(u_1);
    const EmbeddingBatch z_2 = l2_normalize_rows(u_2);
    const EmbeddingBatch z_t = l2_normalize_rows(u_t);
    const PositiveMask joint = joint_positive_mask(cosine_similarity_matrix(z_1, z_1),
                                                   cosine_similarity_matrix(z_2, z_2), s.lambda);
    const PositiveMask txt = positive_mask_from(cosine_similarity_matrix(z_t, z_t), s.lambda);

    // total_loss recomputes masks and targets, which coincide with the
    // frozen ones at the base point, so its gradients are the ones to test.
    const LossOutput out = total_loss(z_1, z_2, z_t, {s.tau, true}, s.lambda, spec);
    std::vector<double> analytic;
    append_flat(analytic, normalize_pullback(u_1, out.grad.at("z_i1")));
    append_flat(analytic, normalize_pullback(u_2, out.grad.at("z_i2")));
    append_flat(analytic, normalize_pullback(u_t, out.grad.at("z_t")));
    analytic.push_back(out.grad_tau);

    check_instance(
        {&u_1, &u_2, &u_t}, true, s.tau,
        [&](const std::vector<Matrix>& m, double tau) {
          const EmbeddingBatch w_1 = l2_normalize_rows(m[0]);
          const EmbeddingBatch w_2 = l2_normalize_rows(m[1]);
          const EmbeddingBatch w_t = l2_normalize_rows(m[2]);
          return mv_simcon_given_masks(w_1, w_2, w_t, {tau, true}, joint, joint, txt).value +
                 ncs_loss_given_targets(w_1, w_2, z_1, z_2, spec).value;
        },
        analytic, suite);
  }
  return suite;
}

GradSuiteResult suite_encoder(std::uint64_t seed, std::size_t instances) {
  GradSuiteResult suite{.name = "encoder_composition"};
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng(mix_seed(seed, 0x36, k));
    const std::size_t batch = k == 0 ? 1 : 2 + rng.uniform_below(5);
    const std::size_t img_in = 3 + rng.uniform_below(4);
    const std::size_t txt_in = 3 + rng.uniform_below(4);
    const std::size_t embed = 2 + rng.uniform_below(4);
    const std::vector<std::size_t> img_hidden = {3 + rng.uniform_below(4)};
    const std::vector<std::size_t> txt_hidden =
        rng.uniform_below(2) == 0 ? std::vector<std::size_t>{} : std::vector<std::size_t>{4};
    const std::size_t head_hidden = 2 + rng.uniform_below(4);
    const double tau = rng.uniform_below(2) == 0 ? 0.07 : 0.5;
    const std::size_t lam = rng.uniform_below(3);
    const double lambda = lam == 0 ? -1.0 : (lam == 1 ? 0.5 : 0.95);

    Mlp img_enc = init_encoder(mix_seed(seed, 0x46, k), img_in, img_hidden, embed);
    Mlp txt_enc = init_encoder(mix_seed(seed, 0x47, k), txt_in, txt_hidden, embed);
    ProjectionHead head = init_projection_head(mix_seed(seed, 0x48, k), embed, head_hidden);
    const Matrix v1 = random_raw(rng, batch, img_in);
    const Matrix v2 = random_raw(rng, batch, img_in);
    const Matrix tx = random_raw(rng, batch, txt_in);

    const ForwardCache c1 = encode_cached(img_enc, v1);
    const ForwardCache c2 = encode_cached(img_enc, v2);
    const ForwardCache ct = encode_cached(txt_enc, tx);
    const EmbeddingBatch& z_1 = c1.output;
    const EmbeddingBatch& z_2 = c2.output;
    const EmbeddingBatch& z_t = ct.output;
    const PositiveMask joint = joint_positive_mask(cosine_similarity_matrix(z_1, z_1),
                                                   cosine_similarity_matrix(z_2, z_2), lambda);
    const PositiveMask txt_mask = positive_mask_from(cosine_similarity_matrix(z_t, z_t), lambda);
    const NcsSpec spec{&head};

    const LossOutput mv = mv_simcon_given_masks(z_1, z_2, z_t, {tau, true}, joint, joint,
                                                txt_mask);
    const LossOutput nc = ncs_loss(z_1, z_2, spec);
    Matrix dz1 = mv.grad.at("z_i1");
    axpy(1.0, nc.grad.at("z_i1"), dz1);
    Matrix dz2 = mv.grad.at("z_i2");
    axpy(1.0, nc.grad.at("z_i2"), dz2);
    MlpGrads img_grads = encoder_backward(img_enc, c1, dz1);
    accumulate(img_grads, encoder_backward(img_enc, c2, dz2));
    const MlpGrads txt_grads = encoder_backward(txt_enc, ct, mv.grad.at("z_t"));

    std::vector<double> analytic;
    append_flat(analytic, flatten_grads(img_grads));
    append_flat(analytic, flatten_grads(txt_grads));
    append_flat(analytic, flatten_grads(*nc.head_grad));

    std::vector<double> x0;
    append_flat(x0, flatten_parameters(img_enc));
    append_flat(x0, flatten_parameters(txt_enc));
    append_flat(x0, flatten_parameters(head.net));
    const std::size_t img_count = flatten_parameters(img_enc).size();
    const std::size_t txt_count = flatten_parameters(txt_enc).size();

    const auto f = [&](std::span<const double> x) {
      Mlp img = img_enc;
      Mlp txt = txt_enc;
      ProjectionHead hd = head;
      load_parameters(img, x.subspan(0, img_count));
      load_parameters(txt, x.subspan(img_count, txt_count));
      load_parameters(hd.net, x.subspan(img_count + txt_count));
      const EmbeddingBatch w_1 = encode(img, v1);
      const EmbeddingBatch w_2 = encode(img, v2);
      const EmbeddingBatch w_t = encode(txt, tx);
      const NcsSpec sp{&hd};
      return mv_simcon_given_masks(w_1, w_2, w_t, {tau, true}, joint, joint, txt_mask).value +
             ncs_loss_given_targets(w_1, w_2, z_1, z_2, sp).value;
    };
    const std::vector<double> numeric = finite_difference_gradient(f, x0, kStep);
    const GradCompareResult cmp = compare_gradients(analytic, numeric);
    suite.instances += 1;
    suite.coordinates += cmp.count;
    suite.worst_rel = std::max(suite.worst_rel, cmp.worst_rel);
    suite.worst_abs = std::max(suite.worst_abs, cmp.worst_abs);
    suite.pass = suite.pass && cmp.pass;
  }
  return suite;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t instances_per_loss,
                              bool inject_fault) {
  GradCheckReport report;
  report.suites.push_back(suite_info_nce(seed, instances_per_loss));
  report.suites.push_back(suite_simcon(seed, instances_per_loss, inject_fault));
  report.suites.push_back(suite_mv_simcon(seed, instances_per_loss));
  report.suites.push_back(suite_ncs(seed, instances_per_loss));
  report.suites.push_back(suite_total(seed, instances_per_loss));
  report.suites.push_back(suite_encoder(seed, instances_per_loss));
  for (const auto& s : report.suites) report.pass = report.pass && s.pass;
  return report;
}

}  // namespace simcon
