#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "epmine/linalg.hpp"

namespace epmine {

using Label = std::int32_t;

/// Parameters of the multimodal Gaussian generator.
///
/// Class centers are drawn from N(0, class_separation^2 I) and rejected until
/// pairwise at least class_separation apart. Each class owns modes_per_class
/// mode centers at distance mode_separation from the class center, rejected
/// until pairwise at least mode_separation apart within the class. Samples are
/// mode center + N(0, noise_std^2 I), assigned round-robin across modes.
struct SyntheticSpec {
  std::size_t num_classes = 8;
  std::size_t modes_per_class = 2;
  std::size_t samples_per_class = 32;
  std::size_t input_dim = 16;
  double mode_separation = 2.0;
  double class_separation = 1.0;
  double noise_std = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Matrix features, std::vector<Label> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return features_.cols(); }
  std::size_t num_classes() const noexcept { return class_index_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  const Matrix& features() const noexcept { return features_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  const std::map<Label, std::vector<std::size_t>>& class_index() const noexcept {
    return class_index_;
  }

  /// Rows at `indices`, in that order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  Matrix gather_features(std::span<const std::size_t> indices) const;

  bool operator==(const LabeledDataset& o) const {
    return features_ == o.features_ && labels_ == o.labels_;
  }

 private:
  Matrix features_;
  std::vector<Label> labels_;
  std::map<Label, std::vector<std::size_t>> class_index_;
};

enum class FeatureFormat { Csv, Emb1 };

FeatureFormat parse_feature_format(std::string_view name);
/// Picks by extension: ".emb1" is binary, anything else CSV.
FeatureFormat feature_format_for_path(const std::filesystem::path& path);

LabeledDataset generate_synthetic(const SyntheticSpec& spec);

LabeledDataset load_features(const std::filesystem::path& path, FeatureFormat format);

/// CSV values are written with 9 significant digits, EMB1 values as f32.
void save_features(const Matrix& features, std::span<const Label> labels,
                   const std::filesystem::path& path, FeatureFormat format);

/// Class-disjoint split. Train receives floor(train_fraction * C) classes,
/// clamped to [1, C-1]; the rest go to test.
std::pair<LabeledDataset, LabeledDataset> split_by_class(const LabeledDataset& ds,
                                                         double train_fraction,
                                                         std::uint64_t seed);

struct SamplerConfig {
  std::size_t batch_size = 128;
  std::size_t group_size = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroupBatch {
  std::vector<std::size_t> indices;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return indices.size(); }
};

using Rng = std::mt19937_64;

/// Independent stream seed for sub-component `stream` of a run seeded by `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// One batch of up to batch_size items, built group by group: classes in random
/// order, min(group_size, class size) items per class without replacement, the
/// final group truncated to fill the batch. Stops early once every class has
/// been used. Throws NoPositivePair if the result has a single class or no
/// class with two items.
GroupBatch sample_group_batch(const LabeledDataset& ds, const SamplerConfig& cfg, Rng& rng);

/// Sampler bound to a dataset with its own RNG stream seeded from cfg.seed.
class GroupSampler {
 public:
  GroupSampler(const LabeledDataset& ds, SamplerConfig cfg);

  GroupBatch next() { return sample_group_batch(*ds_, cfg_, rng_); }
  /// Batches per epoch: ceil(dataset size / batch size).
  std::size_t batches_per_epoch() const noexcept;
  Rng& rng() noexcept { return rng_; }

 private:
  const LabeledDataset* ds_;
  SamplerConfig cfg_;
  Rng rng_;
};

}  // namespace epmine
