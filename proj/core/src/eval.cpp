#include "epmine/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace epmine {

RetrievalMode parse_retrieval_mode(std::string_view name) {
  if (name == "self_query") return RetrievalMode::SelfQuery;
  if (name == "query_gallery") return RetrievalMode::QueryGallery;
  throw ConfigError("unknown retrieval mode '" + std::string(name) + "'");
}

std::string_view to_string(RetrievalMode m) {
  return m == RetrievalMode::SelfQuery ? "self_query" : "query_gallery";
}

void RetrievalConfig::validate() const {
  if (k_values.empty()) throw ConfigError("k_values must not be empty");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] < 1) throw ConfigError("k_values must be >= 1");
    if (i > 0 && k_values[i] <= k_values[i - 1]) {
      throw ConfigError("k_values must be strictly increasing");
    }
  }
}

RetrievalReport recall_at_k(const EmbeddingMatrix& query, std::span<const Label> query_labels,
                            const EmbeddingMatrix& gallery, std::span<const Label> gallery_labels,
                            const RetrievalConfig& cfg) {
  cfg.validate();
  if (query.rows() != query_labels.size() || gallery.rows() != gallery_labels.size()) {
    throw ShapeMismatch("embedding rows and label counts differ");
  }
  const bool self = cfg.mode == RetrievalMode::SelfQuery;
  if (self && query.rows() != gallery.rows()) {
    throw ShapeMismatch("self_query mode needs query and gallery to be the same set");
  }
  const bool exclude = self || cfg.exclude_self;
  const std::size_t effective = gallery.rows() - ((self && gallery.rows() > 0) ? 1 : 0);
  const std::size_t k_max = cfg.k_values.back();
  if (k_max >= effective) {
    throw KTooLarge("K=" + std::to_string(k_max) + " needs a gallery larger than " +
                    std::to_string(effective));
  }

  const Matrix sims = cross_similarity(query, gallery);
  std::vector<std::size_t> hits(cfg.k_values.size(), 0);
  std::vector<std::size_t> order;
  for (std::size_t q = 0; q < query.rows(); ++q) {
    const auto row = sims.row(q);
    order.clear();
    for (std::size_t g = 0; g < gallery.rows(); ++g) {
      if (!(exclude && self && g == q)) order.push_back(g);
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_max),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        return row[a] > row[b] || (row[a] == row[b] && a < b);
                      });
    // rank of the first same-label hit
    std::size_t first = k_max;
    for (std::size_t r = 0; r < k_max; ++r) {
      if (gallery_labels[order[r]] == query_labels[q]) {
        first = r;
        break;
      }
    }
    for (std::size_t i = 0; i < cfg.k_values.size(); ++i) {
      if (first < cfg.k_values[i]) ++hits[i];
    }
  }

  RetrievalReport report;
  report.num_queries = query.rows();
  for (std::size_t i = 0; i < cfg.k_values.size(); ++i) {
    report.recall_at_k[cfg.k_values[i]] =
        query.rows() ? static_cast<double>(hits[i]) / static_cast<double>(query.rows()) : 0.0;
  }
  return report;
}

double NeighborStats::accuracy() const {
  std::size_t eligible = 0, correct = 0;
  for (const auto& r : rows) {
    if (!r.nearest_pos_sim) continue;
    ++eligible;
    if (r.correct_at_1) ++correct;
  }
  return eligible ? static_cast<double>(correct) / static_cast<double>(eligible) : 0.0;
}

NeighborStats neighbor_stats(const EmbeddingMatrix& e, std::span<const Label> labels) {
  if (e.rows() != labels.size()) throw ShapeMismatch("embedding rows != label count");
  const auto s = cosine_similarity_matrix(e);
  NeighborStats stats;
  stats.rows.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    NeighborRow row{i, labels[i], std::nullopt, std::nullopt, false};
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i) continue;
      auto& slot = labels[j] == labels[i] ? row.nearest_pos_sim : row.nearest_neg_sim;
      if (!slot || s(i, j) > *slot) slot = s(i, j);
    }
    row.correct_at_1 =
        row.nearest_pos_sim && (!row.nearest_neg_sim || *row.nearest_pos_sim > *row.nearest_neg_sim);
    stats.rows.push_back(row);
  }
  return stats;
}

SpreadSummary summarize(std::vector<double> values) {
  SpreadSummary out;
  out.pair_count = values.size();
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / n);
  std::sort(values.begin(), values.end());
  for (std::size_t q = 0; q < out.deciles.size(); ++q) {
    const double pos = static_cast<double>(q) / 10.0 * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.deciles[q] = values[lo] + (values[hi] - values[lo]) * frac;
  }
  return out;
}

ClassSpread intra_class_spread(const EmbeddingMatrix& e, std::span<const Label> labels) {
  if (e.rows() != labels.size()) throw ShapeMismatch("embedding rows != label count");
  std::map<Label, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  ClassSpread spread;
  std::vector<double> pooled;
  for (const auto& [label, idx] : members) {
    if (idx.size() < 2) continue;
    std::vector<double> sims;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        sims.push_back(dot<double>(e.row(idx[a]), e.row(idx[b])));
      }
    }
    pooled.insert(pooled.end(), sims.begin(), sims.end());
    auto summary = summarize(std::move(sims));
    summary.label = label;
    spread.per_class.push_back(summary);
  }
  spread.pooled = summarize(std::move(pooled));
  return spread;
}

Projection2d pca_project_2d(const Matrix& e) {
  const std::size_t n = e.rows(), d = e.cols();
  if (n < 3) throw DegenerateCovariance("PCA needs at least 3 rows");
  if (d < 2) throw DegenerateCovariance("PCA needs at least 2 columns");

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = e(i, j);
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateCovariance("eigen solver failed");
  // eigenvalues ascend
  const double l1 = solver.eigenvalues()(d - 1);
  const double l2 = solver.eigenvalues()(d - 2);
  if (!(l1 > 1e-15) || !(l2 > 1e-12 * l1)) {
    throw DegenerateCovariance("centered data has rank < 2");
  }

  Projection2d out;
  out.mean.assign(mu.data(), mu.data() + d);
  out.variance = {l1, l2};
  out.components = Matrix(2, d);
  for (std::size_t c = 0; c < 2; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
    for (std::size_t j = 0; j < d; ++j) {
      if (std::abs(v(j)) > 1e-12) {
        if (v(j) < 0) v = -v;
        break;
      }
    }
    for (std::size_t j = 0; j < d; ++j) out.components(c, j) = v(j);
  }
  out.coords = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += x(i, j) * out.components(c, j);
      out.coords(i, c) = acc;
    }
  }
  return out;
}

void export_embeddings(const EmbeddingMatrix& e, std::span<const Label> labels,
                       const std::filesystem::path& path, FeatureFormat format) {
  save_features(e.matrix(), labels, path, format);
}

std::string format_real(double v) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                               std::chars_format::general, 9);
  return std::string(buf.data(), p);
}

std::string format_report(const RetrievalReport& report) {
  std::ostringstream out;
  out << "num_queries=" << report.num_queries << '\n';
  for (const auto& [k, r] : report.recall_at_k) out << "recall@" << k << '=' << format_real(r) << '\n';
  return out.str();
}

void write_neighbor_stats_csv(const NeighborStats& stats, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index,label,nearest_pos_sim,nearest_neg_sim,correct_at_1\n";
  for (const auto& r : stats.rows) {
    out << r.index << ',' << r.label << ','
        << (r.nearest_pos_sim ? format_real(*r.nearest_pos_sim) : "") << ','
        << (r.nearest_neg_sim ? format_real(*r.nearest_neg_sim) : "") << ','
        << (r.correct_at_1 ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_spread_csv(const ClassSpread& spread, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "label,pairs,mean,std";
  for (int q = 0; q <= 10; ++q) out << ",d" << q;
  out << '\n';
  auto row = [&](const SpreadSummary& s) {
    out << (s.label ? std::to_string(*s.label) : std::string("all")) << ',' << s.pair_count
        << ',' << format_real(s.mean) << ',' << format_real(s.std);
    for (double q : s.deciles) out << ',' << format_real(q);
    out << '\n';
  };
  for (const auto& s : spread.per_class) row(s);
  row(spread.pooled);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace epmine
