#include "simcon/synthdata.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "simcon/errors.hpp"

namespace simcon {

namespace {

// Stream tags keep the per-purpose RNG streams disjoint under one seed.
constexpr std::uint64_t kImageProtoTag = 0x11;
constexpr std::uint64_t kTextProtoTag = 0x12;
constexpr std::uint64_t kSampleTag = 0x13;
constexpr std::uint64_t kViewTag = 0x14;
constexpr std::uint64_t kShuffleTag = 0x15;

Matrix draw_prototypes(std::uint64_t seed, std::uint64_t tag, std::size_t classes,
                       std::size_t dim) {
  Rng rng(mix_seed(seed, tag));
  Matrix protos(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < dim; ++j) protos(c, j) = rng.normal();
  }
  return protos;
}

void validate(const DatasetSpec& spec) {
  if (spec.classes < 2) throw InvalidSpecError("dataset needs at least 2 classes");
  if (spec.samples < spec.classes) {
    throw InvalidSpecError("dataset needs at least one sample per class");
  }
  if (spec.image_dim == 0 || spec.text_dim == 0) throw InvalidSpecError("raw dims must be >= 1");
  if (!(spec.within_class_sigma >= 0.0)) throw InvalidSpecError("within_class_sigma must be >= 0");
  if (!(spec.swap_prob >= 0.0) || spec.swap_prob >= 1.0) {
    throw InvalidSpecError("swap_prob must lie in [0, 1)");
  }
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  validate(spec);
  Dataset data;
  data.spec = spec;
  data.image_prototypes = draw_prototypes(spec.seed, kImageProtoTag, spec.classes, spec.image_dim);
  data.text_prototypes = draw_prototypes(spec.seed, kTextProtoTag, spec.classes, spec.text_dim);

  data.pairs.resize(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    SyntheticPair& pair = data.pairs[i];
    pair.class_id = i % spec.classes;
    Rng rng(mix_seed(spec.seed, kSampleTag, i));

    pair.image_raw.resize(spec.image_dim);
    const auto img_proto = data.image_prototypes.row(pair.class_id);
    for (std::size_t j = 0; j < spec.image_dim; ++j) {
      pair.image_raw[j] = img_proto[j] + spec.within_class_sigma * rng.normal();
    }

    std::size_t text_class = pair.class_id;
    if (rng.bernoulli(spec.swap_prob)) {
      // Uniform over the other classes: skip past class_id.
      std::size_t offset = rng.uniform_below(spec.classes - 1);
      text_class = offset >= pair.class_id ? offset + 1 : offset;
      pair.caption_noisy = true;
      pair.noisy_source_class = text_class;
    }
    pair.text_raw.resize(spec.text_dim);
    const auto txt_proto = data.text_prototypes.row(text_class);
    for (std::size_t j = 0; j < spec.text_dim; ++j) {
      pair.text_raw[j] = txt_proto[j] + spec.within_class_sigma * rng.normal();
    }
  }
  return data;
}

std::pair<std::vector<double>, std::vector<double>> augment_views(const SyntheticPair& pair,
                                                                  const ViewConfig& cfg,
                                                                  std::uint64_t seed,
                                                                  std::size_t pair_index) {
  Rng rng(mix_seed(seed, kViewTag, pair_index));
  const std::size_t dim = pair.image_raw.size();
  auto one_view = [&]() {
    std::vector<double> v(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      v[j] = pair.image_raw[j] + cfg.noise_sigma * rng.normal();
    }
    for (std::size_t j = 0; j < dim; ++j) {
      if (rng.bernoulli(cfg.coordinate_drop_prob)) v[j] = 0.0;
    }
    return v;
  };
  std::vector<double> view1 = one_view();
  std::vector<double> view2 = one_view();
  return {std::move(view1), std::move(view2)};
}

std::vector<std::vector<std::size_t>> sample_batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t epoch_seed) {
  if (batch_size == 0 || batch_size > n) {
    throw InvalidSpecError("batch_size must lie in [1, n]");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(epoch_seed, kShuffleTag));
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(n / batch_size);
  for (std::size_t start = 0; start + batch_size <= n; start += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
  }
  return batches;
}

Matrix gather_images(const Dataset& data, const std::vector<std::size_t>& indices) {
  Matrix out(indices.size(), data.spec.image_dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& src = data.pairs[indices[r]].image_raw;
    for (std::size_t j = 0; j < src.size(); ++j) out(r, j) = src[j];
  }
  return out;
}

Matrix gather_texts(const Dataset& data, const std::vector<std::size_t>& indices) {
  Matrix out(indices.size(), data.spec.text_dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& src = data.pairs[indices[r]].text_raw;
    for (std::size_t j = 0; j < src.size(); ++j) out(r, j) = src[j];
  }
  return out;
}

std::pair<Matrix, Matrix> gather_views(const Dataset& data,
                                       const std::vector<std::size_t>& indices,
                                       const ViewConfig& cfg, std::uint64_t seed) {
  Matrix v1(indices.size(), data.spec.image_dim);
  Matrix v2(indices.size(), data.spec.image_dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto [a, b] = augment_views(data.pairs[indices[r]], cfg, seed, indices[r]);
    for (std::size_t j = 0; j < a.size(); ++j) v1(r, j) = a[j];
    for (std::size_t j = 0; j < b.size(); ++j) v2(r, j) = b[j];
  }
  return {std::move(v1), std::move(v2)};
}

void export_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& pair : data.pairs) {
    nlohmann::json rec;
    rec["class_id"] = pair.class_id;
    rec["caption_noisy"] = pair.caption_noisy;
    if (pair.noisy_source_class) {
      rec["noisy_source_class"] = *pair.noisy_source_class;
    } else {
      rec["noisy_source_class"] = nullptr;
    }
    rec["image_raw"] = pair.image_raw;
    rec["text_raw"] = pair.text_raw;
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace simcon
