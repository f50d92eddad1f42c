#include "epmine/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace epmine {

namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr std::array<char, 4> kEmb1Magic{'E', 'M', 'B', '1'};

std::vector<double> gaussian_vector(std::size_t dim, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng) * scale;
  return v;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

bool far_from_all(const std::vector<double>& c, const std::vector<std::vector<double>>& placed,
                  double min_dist) {
  return std::all_of(placed.begin(), placed.end(),
                     [&](const auto& p) { return distance(c, p) >= min_dist; });
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), b.size());
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  const auto offset = static_cast<long long>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw ParseError("offset " + std::to_string(offset), std::string("truncated ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in, "feature");
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::size_t fields = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      const char* first = line.data() + pos;
      const char* last = line.data() + end;
      while (first < last && *first == ' ') ++first;
      while (last > first && last[-1] == ' ') --last;
      if (fields == 0) {
        Label label{};
        auto [p, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || p != last) throw ParseError(where, "bad label");
        labels.push_back(label);
      } else {
        double v{};
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || p != last) {
          throw ParseError(where, "bad value in field " + std::to_string(fields + 1));
        }
        values.push_back(v);
      }
      ++fields;
      pos = end + 1;
    }
    const std::size_t row_dim = fields - 1;
    if (row_dim == 0) throw ParseError(where, "row has no feature values");
    if (labels.size() == 1) {
      dim = row_dim;
    } else if (row_dim != dim) {
      throw DimensionMismatch(where + ": expected " + std::to_string(dim) + " values, got " +
                              std::to_string(row_dim));
    }
  }
  if (labels.empty()) throw EmptyDataset();
  Matrix features(labels.size(), dim, std::move(values));
  return LabeledDataset(std::move(features), std::move(labels));
}

LabeledDataset load_emb1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kEmb1Magic) {
    throw ParseError("offset 0", "missing EMB1 magic");
  }
  const std::uint32_t count = get_u32(in, "count");
  const std::uint32_t dim = get_u32(in, "dim");
  if (count == 0) throw EmptyDataset();
  if (dim == 0) throw DimensionMismatch("EMB1 dim is zero");
  std::vector<Label> labels(count);
  for (auto& l : labels) l = static_cast<Label>(get_u32(in, "label"));
  std::vector<double> values(static_cast<std::size_t>(count) * dim);
  for (auto& v : values) v = get_f32(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("offset " + std::to_string(static_cast<long long>(in.tellg())),
                     "trailing bytes after EMB1 payload");
  }
  return LabeledDataset(Matrix(count, dim, std::move(values)), std::move(labels));
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 1 || modes_per_class < 1 || samples_per_class < 1 || input_dim < 1) {
    throw ConfigError("synthetic counts must all be >= 1");
  }
  if (samples_per_class < modes_per_class) {
    throw ConfigError("samples_per_class must be >= modes_per_class");
  }
  if (!(mode_separation > 0.0) || !(class_separation > 0.0)) {
    throw ConfigError("mode_separation and class_separation must be > 0");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
}

LabeledDataset::LabeledDataset(Matrix features, std::vector<Label> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() != labels_.size()) {
    throw DimensionMismatch("feature rows " + std::to_string(features_.rows()) + " != labels " +
                            std::to_string(labels_.size()));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) class_index_[labels_[i]].push_back(i);
}

Matrix LabeledDataset::gather_features(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = features_.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Label> labels;
  labels.reserve(indices.size());
  for (auto i : indices) labels.push_back(labels_[i]);
  return LabeledDataset(gather_features(indices), std::move(labels));
}

FeatureFormat parse_feature_format(std::string_view name) {
  if (name == "csv") return FeatureFormat::Csv;
  if (name == "emb1") return FeatureFormat::Emb1;
  throw ConfigError("unknown feature format '" + std::string(name) + "'");
}

FeatureFormat feature_format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".emb1" ? FeatureFormat::Emb1 : FeatureFormat::Csv;
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  std::vector<std::vector<double>> class_centers;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt == kMaxPlacementAttempts) {
        throw GenerationFailure("could not place class center " + std::to_string(k));
      }
      auto c = gaussian_vector(spec.input_dim, spec.class_separation, rng);
      if (far_from_all(c, class_centers, spec.class_separation)) {
        class_centers.push_back(std::move(c));
        break;
      }
    }
  }

  const std::size_t n = spec.num_classes * spec.samples_per_class;
  Matrix features(n, spec.input_dim);
  std::vector<Label> labels(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t row = 0;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    std::vector<std::vector<double>> modes;
    if (spec.modes_per_class == 1) modes.push_back(class_centers[k]);
    for (std::size_t m = modes.size(); m < spec.modes_per_class; ++m) {
      int attempt = 0;
      for (;; ++attempt) {
        if (attempt == kMaxPlacementAttempts) {
          throw GenerationFailure("could not place mode " + std::to_string(m) + " of class " +
                                  std::to_string(k));
        }
        auto dir = gaussian_vector(spec.input_dim, 1.0, rng);
        double norm = 0.0;
        for (double x : dir) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) continue;
        std::vector<double> c = class_centers[k];
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += spec.mode_separation * dir[d] / norm;
        if (far_from_all(c, modes, spec.mode_separation)) {
          modes.push_back(std::move(c));
          break;
        }
      }
    }
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      const auto& c = modes[s % spec.modes_per_class];
      auto out = features.row(row);
      for (std::size_t d = 0; d < spec.input_dim; ++d) {
        out[d] = c[d] + spec.noise_std * normal(rng);
      }
      labels[row] = static_cast<Label>(k);
    }
  }
  return LabeledDataset(std::move(features), std::move(labels));
}

LabeledDataset load_features(const std::filesystem::path& path, FeatureFormat format) {
  return format == FeatureFormat::Csv ? load_csv(path) : load_emb1(path);
}

void save_features(const Matrix& features, std::span<const Label> labels,
                   const std::filesystem::path& path, FeatureFormat format) {
  if (features.rows() == 0 || labels.empty()) throw EmptyDataset();
  if (features.rows() != labels.size()) {
    throw DimensionMismatch("feature rows and label count differ");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (format == FeatureFormat::Csv) {
    std::array<char, 64> buf{};
    for (std::size_t r = 0; r < features.rows(); ++r) {
      out << labels[r];
      for (double v : features.row(r)) {
        auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                     std::chars_format::general, 9);
        out << ',';
        out.write(buf.data(), p - buf.data());
      }
      out << '\n';
    }
  } else {
    out.write(kEmb1Magic.data(), kEmb1Magic.size());
    put_u32(out, static_cast<std::uint32_t>(features.rows()));
    put_u32(out, static_cast<std::uint32_t>(features.cols()));
    for (Label l : labels) put_u32(out, static_cast<std::uint32_t>(l));
    for (double v : features.data()) put_f32(out, static_cast<float>(v));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::pair<LabeledDataset, LabeledDataset> split_by_class(const LabeledDataset& ds,
                                                         double train_fraction,
                                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  const std::size_t c = ds.num_classes();
  if (c < 2) throw TooFewClasses("split_by_class needs >= 2 classes, got " + std::to_string(c));

  std::vector<Label> classes;
  for (const auto& [label, _] : ds.class_index()) classes.push_back(label);
  Rng rng(seed);
  std::shuffle(classes.begin(), classes.end(), rng);

  auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(c)));
  n_train = std::clamp<std::size_t>(n_train, 1, c - 1);
  const std::set<Label> train_classes(classes.begin(), classes.begin() + n_train);

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (train_classes.count(ds.labels()[i]) ? train_idx : test_idx).push_back(i);
  }
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

void SamplerConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (group_size > batch_size) throw ConfigError("group_size must be <= batch_size");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined state
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

GroupBatch sample_group_batch(const LabeledDataset& ds, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (ds.empty()) throw EmptyDataset();

  std::vector<Label> classes;
  classes.reserve(ds.num_classes());
  for (const auto& [label, _] : ds.class_index()) classes.push_back(label);
  std::shuffle(classes.begin(), classes.end(), rng);

  const std::size_t target = std::min(cfg.batch_size, ds.size());
  GroupBatch batch;
  batch.indices.reserve(target);
  std::size_t classes_used = 0;
  bool has_pair = false;
  for (Label label : classes) {
    if (batch.size() == target) break;
    std::vector<std::size_t> pool = ds.class_index().at(label);
    const std::size_t take =
        std::min({cfg.group_size, pool.size(), target - batch.size()});
    // Partial Fisher-Yates: the first `take` slots become a uniform sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      batch.indices.push_back(pool[i]);
      batch.labels.push_back(label);
    }
    ++classes_used;
    has_pair = has_pair || take >= 2;
  }
  if (classes_used < 2 || !has_pair) throw NoPositivePair();
  return batch;
}

GroupSampler::GroupSampler(const LabeledDataset& ds, SamplerConfig cfg)
    : ds_(&ds), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
}

std::size_t GroupSampler::batches_per_epoch() const noexcept {
  return (ds_->size() + cfg_.batch_size - 1) / cfg_.batch_size;
}

}  // namespace epmine
