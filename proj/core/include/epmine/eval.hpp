#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epmine/data.hpp"
#include "epmine/linalg.hpp"

namespace epmine {

enum class RetrievalMode {
  SelfQuery,     // query set is the gallery; the query itself is never retrieved
  QueryGallery,  // disjoint query and gallery sets
};

RetrievalMode parse_retrieval_mode(std::string_view name);
std::string_view to_string(RetrievalMode m);

struct RetrievalConfig {
  std::vector<std::size_t> k_values{1, 2, 4, 8};
  RetrievalMode mode = RetrievalMode::SelfQuery;
  /// Ignored in SelfQuery mode, where it is always on.
  bool exclude_self = true;

  void validate() const;
};

struct RetrievalReport {
  std::map<std::size_t, double> recall_at_k;
  std::size_t num_queries = 0;
};

/// Fraction of queries with at least one same-label item among the K most
/// similar gallery items. Similarity ties rank the lower gallery index first.
/// Throws KTooLarge when the largest K is >= the gallery size available to a
/// query (gallery size - 1 in SelfQuery mode).
RetrievalReport recall_at_k(const EmbeddingMatrix& query, std::span<const Label> query_labels,
                            const EmbeddingMatrix& gallery, std::span<const Label> gallery_labels,
                            const RetrievalConfig& cfg);

struct NeighborRow {
  std::size_t index = 0;
  Label label = 0;
  std::optional<double> nearest_pos_sim;
  std::optional<double> nearest_neg_sim;
  /// nearest_pos_sim > nearest_neg_sim; ties and missing values count as wrong.
  bool correct_at_1 = false;
};

struct NeighborStats {
  std::vector<NeighborRow> rows;

  /// Mean correct_at_1 over rows that have a positive.
  double accuracy() const;
};

NeighborStats neighbor_stats(const EmbeddingMatrix& e, std::span<const Label> labels);

struct SpreadSummary {
  std::optional<Label> label;  // empty for the pooled summary
  std::size_t pair_count = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  /// 0%, 10%, ..., 100% quantiles with linear interpolation.
  std::array<double, 11> deciles{};
};

struct ClassSpread {
  std::vector<SpreadSummary> per_class;
  SpreadSummary pooled;
};

/// Summaries of all same-class pairwise similarities (i < j). Classes with a
/// single item are left out.
ClassSpread intra_class_spread(const EmbeddingMatrix& e, std::span<const Label> labels);

/// Summary of an arbitrary sample of values, with the same conventions.
SpreadSummary summarize(std::vector<double> values);

struct Projection2d {
  Matrix coords;      // B x 2
  Matrix components;  // 2 x D, unit rows, first nonzero loading positive
  std::array<double, 2> variance{};
  std::vector<double> mean;
};

/// Projection of the centered rows onto the top two principal components.
/// Throws DegenerateCovariance when the centered data has rank < 2.
Projection2d pca_project_2d(const Matrix& e);
inline Projection2d pca_project_2d(const EmbeddingMatrix& e) { return pca_project_2d(e.matrix()); }

void export_embeddings(const EmbeddingMatrix& e, std::span<const Label> labels,
                       const std::filesystem::path& path, FeatureFormat format);

/// key=value block: num_queries, then recall@K per K.
std::string format_report(const RetrievalReport& report);
/// index,label,nearest_pos_sim,nearest_neg_sim,correct_at_1 (empty field when absent)
void write_neighbor_stats_csv(const NeighborStats& stats, const std::filesystem::path& path);
/// label,pairs,mean,std,d0..d10; pooled row has label "all"
void write_spread_csv(const ClassSpread& spread, const std::filesystem::path& path);

/// Shortest-round-trip-safe 9 significant digit rendering used by all writers.
std::string format_real(double v);

}  // namespace epmine
