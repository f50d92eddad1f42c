#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "epmine/data.hpp"
#include "epmine/linalg.hpp"

namespace epmine {

enum class LossStrategy { EP, EPHN, EPSHN, HP, HPHN, NPair, BatchAll, TripletMargin };

/// What to do when an anchor has no negative less similar than its positive.
enum class ShnFallback { Hardest, Skip };

LossStrategy parse_loss_strategy(std::string_view name);
std::string_view to_string(LossStrategy s);
ShnFallback parse_shn_fallback(std::string_view name);
std::string_view to_string(ShnFallback f);

struct LossConfig {
  LossStrategy strategy = LossStrategy::EPSHN;
  double temperature = 0.1;
  /// TripletMargin only.
  double margin = 0.1;
  ShnFallback shn_fallback = ShnFallback::Hardest;
  /// Seeds the random positive of TripletMargin.
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossOutput {
  double loss = 0.0;
  /// d loss / d embedding, same shape as the input batch.
  Matrix grad;
  std::size_t num_anchors = 0;
};

struct NcaTerm {
  double loss = 0.0;
  double d_pos = 0.0;
  std::vector<double> d_negs;
};

/// -log(e^{s_pos/t} / (e^{s_pos/t} + sum_i e^{s_neg_i/t})), evaluated with the
/// max scaled similarity subtracted, plus its partials in every similarity.
NcaTerm nca_term(double s_pos, std::span<const double> s_negs, double temperature);

/// One anchor's selected pair set. compute_loss evaluates a list of these;
/// tests compare plans to detect selection changes under perturbation.
struct LossTerm {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;

  bool operator==(const LossTerm&) const = default;
};

/// Mines the batch per cfg.strategy and lists the resulting terms. Mined
/// indices are treated as constants by the gradient.
std::vector<LossTerm> plan_loss_terms(const SimilarityMatrix& s, std::span<const Label> labels,
                                      const LossConfig& cfg);

/// Mean loss over terms and its gradient with respect to the rows of `e`.
/// Rows are expected to be unit norm but this is not enforced, which keeps the
/// function usable at finite-difference probe points.
LossOutput compute_loss(const Matrix& e, std::span<const Label> labels, const LossConfig& cfg);

inline LossOutput compute_loss(const EmbeddingMatrix& e, std::span<const Label> labels,
                               const LossConfig& cfg) {
  return compute_loss(e.matrix(), labels, cfg);
}

/// max(0, d_ap - d_an + margin) with a random positive and a semi-hard
/// negative per anchor, averaged over anchors. Distances are taken as
/// |e_a - e_b|, which is sqrt(2 - 2 s_ab) for unit rows.
LossOutput triplet_margin_loss(const Matrix& e, std::span<const Label> labels,
                               const LossConfig& cfg);

}  // namespace epmine
