#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "simcon/errors.hpp"
#include "simcon/synthdata.hpp"

using namespace simcon;

namespace {

DatasetSpec small_spec() {
  DatasetSpec spec;
  spec.classes = 5;
  spec.samples = 200;
  spec.image_dim = 8;
  spec.text_dim = 6;
  spec.seed = 7;
  return spec;
}

std::size_t nearest_prototype(const Matrix& protos, const std::vector<double>& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < protos.rows(); ++c) {
    double d = 0.0;
    for (std::size_t j = 0; j < protos.cols(); ++j) {
      const double diff = protos(c, j) - x[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("classes are assigned round robin and clean data has no noisy captions") {
  const Dataset data = generate_dataset(small_spec());
  REQUIRE(data.size() == 200);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(data.pairs[i].class_id == i % 5);
    CHECK_FALSE(data.pairs[i].caption_noisy);
    CHECK_FALSE(data.pairs[i].noisy_source_class.has_value());
  }
  CHECK(data.image_prototypes.rows() == 5);
  CHECK(data.image_prototypes.cols() == 8);
  CHECK(data.text_prototypes.cols() == 6);
}

TEST_CASE("zero sigma reproduces the prototypes exactly") {
  DatasetSpec spec = small_spec();
  spec.within_class_sigma = 0.0;
  const Dataset data = generate_dataset(spec);
  for (const SyntheticPair& p : data.pairs) {
    for (std::size_t j = 0; j < spec.image_dim; ++j) {
      CHECK(p.image_raw[j] == data.image_prototypes(p.class_id, j));
    }
    for (std::size_t j = 0; j < spec.text_dim; ++j) {
      CHECK(p.text_raw[j] == data.text_prototypes(p.class_id, j));
    }
  }
}

TEST_CASE("swap probability controls the observed noisy-caption fraction") {
  DatasetSpec spec = small_spec();
  spec.samples = 10000;
  spec.swap_prob = 0.4;
  const Dataset data = generate_dataset(spec);
  std::size_t noisy = 0;
  for (const SyntheticPair& p : data.pairs) {
    if (!p.caption_noisy) {
      CHECK_FALSE(p.noisy_source_class.has_value());
      continue;
    }
    ++noisy;
    REQUIRE(p.noisy_source_class.has_value());
    CHECK(*p.noisy_source_class != p.class_id);
    CHECK(*p.noisy_source_class < spec.classes);
  }
  const double frac = static_cast<double>(noisy) / static_cast<double>(spec.samples);
  CHECK(frac > 0.38);
  CHECK(frac < 0.42);
}

TEST_CASE("noisy captions are generated from the recorded source prototype") {
  DatasetSpec spec = small_spec();
  spec.samples = 2000;
  spec.swap_prob = 0.5;
  spec.within_class_sigma = 0.05;
  const Dataset data = generate_dataset(spec);
  std::size_t checked = 0;
  for (const SyntheticPair& p : data.pairs) {
    const std::size_t near = nearest_prototype(data.text_prototypes, p.text_raw);
    if (p.caption_noisy) {
      CHECK(near == *p.noisy_source_class);
      ++checked;
    } else {
      CHECK(near == p.class_id);
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("images stay recoverable by nearest prototype at moderate sigma") {
  DatasetSpec spec = small_spec();
  spec.samples = 1000;
  spec.within_class_sigma = 0.05;
  const Dataset data = generate_dataset(spec);
  std::size_t hits = 0;
  for (const SyntheticPair& p : data.pairs) {
    if (nearest_prototype(data.image_prototypes, p.image_raw) == p.class_id) ++hits;
  }
  CHECK(static_cast<double>(hits) / 1000.0 >= 0.99);
}

TEST_CASE("sample i is independent of the total sample count") {
  DatasetSpec spec = small_spec();
  spec.swap_prob = 0.3;
  DatasetSpec longer = spec;
  longer.samples = 350;
  const Dataset a = generate_dataset(spec);
  const Dataset b = generate_dataset(longer);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.pairs[i].image_raw == b.pairs[i].image_raw);
    CHECK(a.pairs[i].text_raw == b.pairs[i].text_raw);
    CHECK(a.pairs[i].caption_noisy == b.pairs[i].caption_noisy);
  }
  for (std::size_t k = 0; k < a.image_prototypes.size(); ++k) {
    CHECK(a.image_prototypes.flat()[k] == b.image_prototypes.flat()[k]);
  }
}

TEST_CASE("generation is deterministic per seed and differs across seeds") {
  DatasetSpec spec = small_spec();
  const Dataset a = generate_dataset(spec);
  const Dataset b = generate_dataset(spec);
  CHECK(a.pairs[17].image_raw == b.pairs[17].image_raw);

  spec.seed = 8;
  const Dataset c = generate_dataset(spec);
  CHECK(a.pairs[17].image_raw != c.pairs[17].image_raw);
}

TEST_CASE("generate_dataset validates its spec") {
  DatasetSpec spec = small_spec();
  spec.classes = 0;
  CHECK_THROWS_AS(generate_dataset(spec), InvalidSpecError);
  spec = small_spec();
  spec.swap_prob = 1.5;
  CHECK_THROWS_AS(generate_dataset(spec), InvalidSpecError);
  spec = small_spec();
  spec.classes = 1;
  spec.swap_prob = 0.2;  // no wrong class to draw from
  CHECK_THROWS_AS(generate_dataset(spec), InvalidSpecError);
}

TEST_CASE("augmented views are distinct, deterministic, and honor zero settings") {
  const Dataset data = generate_dataset(small_spec());
  const SyntheticPair& p = data.pairs[3];

  ViewConfig off;
  off.noise_sigma = 0.0;
  off.coordinate_drop_prob = 0.0;
  const auto [v1, v2] = augment_views(p, off, 99, 3);
  CHECK(v1 == p.image_raw);
  CHECK(v2 == p.image_raw);

  ViewConfig cfg;
  const auto [a1, a2] = augment_views(p, cfg, 99, 3);
  const auto [b1, b2] = augment_views(p, cfg, 99, 3);
  CHECK(a1 == b1);
  CHECK(a2 == b2);
  CHECK(a1 != a2);

  const auto [c1, c2] = augment_views(p, cfg, 100, 3);
  CHECK(a1 != c1);
  const auto [d1, d2] = augment_views(p, cfg, 99, 4);
  CHECK(a1 != d1);
}

TEST_CASE("coordinate dropout zeroes close to the requested fraction") {
  SyntheticPair p;
  p.image_raw.assign(10000, 1.0);
  p.text_raw.assign(4, 0.0);
  ViewConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.coordinate_drop_prob = 0.5;
  const auto [v1, v2] = augment_views(p, cfg, 5, 0);
  const auto count_zeros = [](const std::vector<double>& v) {
    return static_cast<double>(std::count(v.begin(), v.end(), 0.0)) /
           static_cast<double>(v.size());
  };
  CHECK(count_zeros(v1) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(count_zeros(v2) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(v1 != v2);
}

TEST_CASE("sample_batches yields a seeded permutation in fixed-size chunks") {
  const auto batches = sample_batches(10, 3, 42);
  REQUIRE(batches.size() == 3);  // 10 = 3*3 + 1 dropped
  std::set<std::size_t> seen;
  for (const auto& b : batches) {
    CHECK(b.size() == 3);
    for (std::size_t idx : b) {
      CHECK(idx < 10);
      CHECK(seen.insert(idx).second);
    }
  }

  CHECK(sample_batches(10, 3, 42) == batches);
  CHECK(sample_batches(10, 3, 43) != batches);
  CHECK(sample_batches(9, 3, 1).size() == 3);
  CHECK_THROWS_AS(sample_batches(2, 3, 1), InvalidSpecError);
  CHECK_THROWS_AS(sample_batches(4, 0, 1), InvalidSpecError);
}

TEST_CASE("gather helpers stack the requested rows in order") {
  const Dataset data = generate_dataset(small_spec());
  const std::vector<std::size_t> idx{5, 0, 11};
  const Matrix imgs = gather_images(data, idx);
  const Matrix txts = gather_texts(data, idx);
  REQUIRE(imgs.rows() == 3);
  REQUIRE(txts.rows() == 3);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t j = 0; j < imgs.cols(); ++j) {
      CHECK(imgs(r, j) == data.pairs[idx[r]].image_raw[j]);
    }
    for (std::size_t j = 0; j < txts.cols(); ++j) {
      CHECK(txts(r, j) == data.pairs[idx[r]].text_raw[j]);
    }
  }

  ViewConfig cfg;
  const auto [m1, m2] = gather_views(data, idx, cfg, 77);
  REQUIRE(m1.rows() == 3);
  REQUIRE(m2.rows() == 3);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto [v1, v2] = augment_views(data.pairs[idx[r]], cfg, 77, idx[r]);
    for (std::size_t j = 0; j < m1.cols(); ++j) {
      CHECK(m1(r, j) == v1[j]);
      CHECK(m2(r, j) == v2[j]);
    }
  }
}

TEST_CASE("export_jsonl writes one faithful record per pair") {
  DatasetSpec spec = small_spec();
  spec.samples = 40;
  spec.swap_prob = 0.5;
  const Dataset data = generate_dataset(spec);
  const std::string path = "synthdata_export_test.jsonl";
  export_jsonl(data, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    const SyntheticPair& p = data.pairs[rows];
    CHECK(rec.at("class_id").get<std::size_t>() == p.class_id);
    CHECK(rec.at("caption_noisy").get<bool>() == p.caption_noisy);
    if (p.caption_noisy) {
      CHECK(rec.at("noisy_source_class").get<std::size_t>() == *p.noisy_source_class);
    } else {
      CHECK(rec.at("noisy_source_class").is_null());
    }
    CHECK(rec.at("image_raw").get<std::vector<double>>() == p.image_raw);
    CHECK(rec.at("text_raw").get<std::vector<double>>() == p.text_raw);
    ++rows;
  }
  CHECK(rows == data.size());
  std::remove(path.c_str());
}
