#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "epmine/data.hpp"
#include "epmine/linalg.hpp"

namespace epmine {

// In-batch example selection. Everything works on similarities: for unit
// vectors d^2 = 2 - 2s, so the closest item by distance is the most similar
// one. Ties go to the lowest index.

std::optional<std::size_t> mine_easy_positive(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor);
std::optional<std::size_t> mine_hard_positive(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor);
std::optional<std::size_t> mine_hard_negative(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor);
std::optional<std::size_t> mine_easy_negative(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor);

/// Most similar different-label item that is strictly less similar than the
/// chosen positive. Absent when every negative is at least as similar.
std::optional<std::size_t> mine_semi_hard_negative(const SimilarityMatrix& s,
                                                   std::span<const Label> labels,
                                                   std::size_t anchor, double positive_sim);

enum class PositiveRule { Easy, Hard };
enum class NegativeRule { All, Hard, SemiHard };

struct MiningStrategy {
  PositiveRule positive = PositiveRule::Easy;
  NegativeRule negative = NegativeRule::All;
};

struct MiningSelection {
  std::size_t anchor = 0;
  std::optional<std::size_t> positive;
  /// Absent for NegativeRule::All, and for SemiHard when infeasible.
  std::optional<std::size_t> negative;
  double positive_sim = 0.0;
  double negative_sim = 0.0;

  bool operator==(const MiningSelection&) const = default;
};

/// One selection per anchor that has an in-batch positive; others are skipped.
std::vector<MiningSelection> mine_batch(const SimilarityMatrix& s, std::span<const Label> labels,
                                        MiningStrategy strategy);

}  // namespace epmine
