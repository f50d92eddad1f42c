#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "epmine/data.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace epmine;

namespace {

std::map<Label, std::size_t> label_counts(std::span<const Label> labels) {
  std::map<Label, std::size_t> c;
  for (Label l : labels) ++c[l];
  return c;
}

// Run lengths of consecutive equal labels: the group sizes of a batch.
std::vector<std::size_t> group_sizes(const GroupBatch& b) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    if (i == 0 || b.labels[i] != b.labels[i - 1]) out.push_back(0);
    ++out.back();
  }
  return out;
}

LabeledDataset dataset_with_sizes(const std::vector<std::size_t>& sizes) {
  std::vector<Label> labels;
  for (std::size_t c = 0; c < sizes.size(); ++c) labels.insert(labels.end(), sizes[c], Label(c));
  Matrix f(labels.size(), 2);
  for (std::size_t i = 0; i < labels.size(); ++i) f(i, 0) = double(i), f(i, 1) = 1.0;
  return LabeledDataset(std::move(f), std::move(labels));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("generate_synthetic counting and round-robin contracts") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.modes_per_class = 1;
  spec.samples_per_class = 4;
  spec.input_dim = 2;
  spec.seed = 7;
  const auto ds = generate_synthetic(spec);
  CHECK(ds.size() == 8);
  CHECK(ds.dim() == 2);
  CHECK(label_counts(ds.labels()) == std::map<Label, std::size_t>{{0, 4}, {1, 4}});

  SUBCASE("two modes split 5/5") {
    spec.modes_per_class = 2;
    spec.samples_per_class = 10;
    spec.input_dim = 8;
    spec.mode_separation = 20.0;
    spec.noise_std = 0.1;
    const auto ds2 = generate_synthetic(spec);
    for (const auto& [label, idx] : ds2.class_index()) {
      // Even positions belong to mode 0, odd to mode 1; the modes are far
      // apart relative to noise, so each point is nearest its own mode's mean.
      Matrix mean(2, 8);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        for (std::size_t d = 0; d < 8; ++d) mean(k % 2, d) += ds2.features()(idx[k], d) / 5.0;
      }
      std::size_t count[2] = {0, 0};
      for (std::size_t k = 0; k < idx.size(); ++k) {
        double d0 = 0, d1 = 0;
        for (std::size_t d = 0; d < 8; ++d) {
          const double v = ds2.features()(idx[k], d);
          d0 += (v - mean(0, d)) * (v - mean(0, d));
          d1 += (v - mean(1, d)) * (v - mean(1, d));
        }
        ++count[d0 < d1 ? 0 : 1];
        CHECK((d0 < d1) == (k % 2 == 0));
      }
      CHECK(count[0] == 5);
      CHECK(count[1] == 5);
    }
  }

  SUBCASE("deterministic given seed") {
    spec.modes_per_class = 2;
    spec.samples_per_class = 6;
    CHECK(generate_synthetic(spec).features() == generate_synthetic(spec).features());
    auto other = spec;
    other.seed = 8;
    CHECK_FALSE(generate_synthetic(other).features() == generate_synthetic(spec).features());
  }
}

TEST_CASE("generate_synthetic validates and can fail placement") {
  SyntheticSpec spec;
  spec.samples_per_class = 1;
  spec.modes_per_class = 2;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  spec = {};
  spec.noise_std = -1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  // 40 classes on a line, each center >= 1000 sigma from the rest: infeasible.
  spec = {};
  spec.input_dim = 1;
  spec.num_classes = 40;
  spec.class_separation = 1.0;
  spec.modes_per_class = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), GenerationFailure);
}

TEST_CASE("load_features CSV") {
  TempDir dir;
  SUBCASE("three lines") {
    write_text(dir / "a.csv", "0,1.0,0.0\n0,0.9,0.1\n1,0.0,1.0\n");
    const auto ds = load_features(dir / "a.csv", FeatureFormat::Csv);
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 2);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.features()(1, 1) == 0.1);
    CHECK(ds.class_index().at(0) == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("errors") {
    write_text(dir / "bad.csv", "0,1.0,0.0\n0,x,0.1\n");
    CHECK_THROWS_AS(load_features(dir / "bad.csv", FeatureFormat::Csv), ParseError);
    write_text(dir / "dim.csv", "0,1.0,0.0\n0,1.0\n");
    CHECK_THROWS_AS(load_features(dir / "dim.csv", FeatureFormat::Csv), DimensionMismatch);
    write_text(dir / "empty.csv", "\n");
    CHECK_THROWS_AS(load_features(dir / "empty.csv", FeatureFormat::Csv), EmptyDataset);
    CHECK_THROWS_AS(load_features(dir / "missing.csv", FeatureFormat::Csv), IoError);
  }
  SUBCASE("parse error names the line") {
    write_text(dir / "bad.csv", "0,1.0\n1,2.0\n1,oops\n");
    try {
      load_features(dir / "bad.csv", FeatureFormat::Csv);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
  }
}

TEST_CASE("load_features EMB1") {
  TempDir dir;
  SUBCASE("count = 0 is EmptyDataset") {
    write_text(dir / "z.emb1", std::string("EMB1\0\0\0\0\x02\0\0\0", 12));
    CHECK_THROWS_AS(load_features(dir / "z.emb1", FeatureFormat::Emb1), EmptyDataset);
  }
  SUBCASE("hand-built file") {
    // count=1 dim=2 label=5 features 1.0f, -2.0f
    const std::string bytes("EMB1\x01\0\0\0\x02\0\0\0\x05\0\0\0\0\0\x80\x3f\0\0\0\xc0", 24);
    write_text(dir / "one.emb1", bytes);
    const auto ds = load_features(dir / "one.emb1", FeatureFormat::Emb1);
    CHECK(ds.labels() == std::vector<Label>{5});
    CHECK(ds.features() == Matrix(1, 2, {1.0, -2.0}));
  }
  SUBCASE("bad magic and truncation") {
    write_text(dir / "m.emb1", "EMB2xxxxxxxx");
    CHECK_THROWS_AS(load_features(dir / "m.emb1", FeatureFormat::Emb1), ParseError);
    write_text(dir / "t.emb1", std::string("EMB1\x02\0\0\0\x02\0\0\0\0\0\0\0", 16));
    CHECK_THROWS_AS(load_features(dir / "t.emb1", FeatureFormat::Emb1), ParseError);
  }
}

TEST_CASE("save_features round-trips through load_features") {
  TempDir dir;
  std::mt19937_64 rng(5);
  const Matrix f = oracle::random_matrix(17, 6, rng);
  const auto labels = oracle::random_labels(17, 4, rng);
  for (auto fmt : {FeatureFormat::Csv, FeatureFormat::Emb1}) {
    const auto path = dir / (fmt == FeatureFormat::Csv ? "r.csv" : "r.emb1");
    save_features(f, labels, path, fmt);
    const auto back = load_features(path, fmt);
    CHECK(back.labels() == labels);
    REQUIRE(back.features().rows() == 17);
    for (std::size_t i = 0; i < f.data().size(); ++i) {
      const double a = f.data()[i], b = back.features().data()[i];
      if (fmt == FeatureFormat::Emb1) {
        CHECK(b == double(float(a)));
      } else {
        CHECK(std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(a)));
      }
    }
  }
  CHECK_THROWS_AS(save_features(Matrix(), {}, dir / "e.csv", FeatureFormat::Csv), EmptyDataset);
}

TEST_CASE("split_by_class partitions classes") {
  SUBCASE("10 classes at 0.5") {
    const auto ds = dataset_with_sizes(std::vector<std::size_t>(10, 3));
    const auto [train, test] = split_by_class(ds, 0.5, 1);
    CHECK(train.num_classes() == 5);
    CHECK(test.num_classes() == 5);
    for (const auto& [l, _] : train.class_index()) CHECK(test.class_index().count(l) == 0);
    CHECK(train.size() + test.size() == ds.size());
  }
  SUBCASE("3 classes at 0.5 floors train") {
    const auto [train, test] = split_by_class(dataset_with_sizes({2, 2, 2}), 0.5, 1);
    CHECK(train.num_classes() == 1);
    CHECK(test.num_classes() == 2);
  }
  SUBCASE("2 classes at 0.9") {
    const auto [train, test] = split_by_class(dataset_with_sizes({2, 2}), 0.9, 1);
    CHECK(train.num_classes() == 1);
    CHECK(test.num_classes() == 1);
  }
  SUBCASE("deterministic and seed-dependent") {
    const auto ds = dataset_with_sizes(std::vector<std::size_t>(20, 2));
    CHECK(split_by_class(ds, 0.5, 3).first == split_by_class(ds, 0.5, 3).first);
    bool differs = false;
    for (std::uint64_t s = 4; s < 10; ++s) {
      differs = differs || !(split_by_class(ds, 0.5, s).first == split_by_class(ds, 0.5, 3).first);
    }
    CHECK(differs);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(split_by_class(dataset_with_sizes({4}), 0.5, 0), TooFewClasses);
    CHECK_THROWS_AS(split_by_class(dataset_with_sizes({2, 2}), 1.0, 0), ConfigError);
  }
}

TEST_CASE("sample_group_batch group structure") {
  SUBCASE("N=8 n=4 with large classes: two full groups") {
    const auto ds = dataset_with_sizes({10, 10, 10, 10});
    Rng rng(1);
    const auto b = sample_group_batch(ds, {8, 4, 0}, rng);
    CHECK(group_sizes(b) == std::vector<std::size_t>{4, 4});
  }
  SUBCASE("N=8 n=4, small first class: groups 3,4,1") {
    const auto ds = dataset_with_sizes({3, 10, 10, 10});
    bool seen = false;
    for (std::uint64_t seed = 0; seed < 64 && !seen; ++seed) {
      Rng rng(seed);
      const auto b = sample_group_batch(ds, {8, 4, 0}, rng);
      if (b.labels.front() != 0) continue;
      seen = true;
      CHECK(group_sizes(b) == std::vector<std::size_t>{3, 4, 1});
    }
    CHECK(seen);
  }
  SUBCASE("N=128 n=16 uses 8 classes") {
    const auto ds = dataset_with_sizes(std::vector<std::size_t>(20, 30));
    Rng rng(2);
    const auto b = sample_group_batch(ds, {128, 16, 0}, rng);
    CHECK(b.size() == 128);
    CHECK(label_counts(b.labels).size() == 8);
  }
  SUBCASE("stops when classes run out") {
    const auto ds = dataset_with_sizes({5, 5, 5});
    Rng rng(3);
    const auto b = sample_group_batch(ds, {12, 2, 0}, rng);
    CHECK(b.size() == 6);
  }
  SUBCASE("NoPositivePair") {
    Rng rng(4);
    CHECK_THROWS_AS(sample_group_batch(dataset_with_sizes({6}), {4, 2, 0}, rng), NoPositivePair);
    CHECK_THROWS_AS(sample_group_batch(dataset_with_sizes({1, 1, 1}), {4, 2, 0}, rng),
                    NoPositivePair);
  }
  SUBCASE("config validation") {
    Rng rng(5);
    const auto ds = dataset_with_sizes({4, 4});
    CHECK_THROWS_AS(sample_group_batch(ds, {8, 1, 0}, rng), ConfigError);
    CHECK_THROWS_AS(sample_group_batch(ds, {4, 8, 0}, rng), ConfigError);
  }
}

TEST_CASE("property: batches respect group size, are duplicate-free, and deterministic") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> n_classes(2, 12), size(1, 9), group(2, 6),
        batch(4, 40);
    std::vector<std::size_t> sizes(n_classes(gen));
    for (auto& s : sizes) s = size(gen);
    sizes[0] = std::max<std::size_t>(sizes[0], 2);
    const auto ds = dataset_with_sizes(sizes);
    SamplerConfig cfg{batch(gen), group(gen), gen()};
    if (cfg.group_size > cfg.batch_size) continue;

    Rng a(cfg.seed), b(cfg.seed);
    GroupBatch first;
    try {
      first = sample_group_batch(ds, cfg, a);
    } catch (const NoPositivePair&) {
      continue;
    }
    const auto again = sample_group_batch(ds, cfg, b);
    CHECK(first.indices == again.indices);
    CHECK(first.size() <= std::min(cfg.batch_size, ds.size()));
    for (const auto& [l, c] : label_counts(first.labels)) CHECK(c <= cfg.group_size);
    std::set<std::size_t> uniq(first.indices.begin(), first.indices.end());
    CHECK(uniq.size() == first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      CHECK(ds.labels()[first.indices[i]] == first.labels[i]);
    }
  }
}

TEST_CASE("GroupSampler epoch length") {
  const auto ds = dataset_with_sizes({10, 10, 10});
  GroupSampler s(ds, {8, 2, 1});
  CHECK(s.batches_per_epoch() == 4);
  const auto b1 = s.next();
  const auto b2 = s.next();
  CHECK(b1.size() == 6);
  CHECK_FALSE(b1.indices == b2.indices);
}
