#include "epmine/mining.hpp"

namespace epmine {

namespace {

void check_batch(const SimilarityMatrix& s, std::span<const Label> labels, std::size_t anchor) {
  if (s.size() != labels.size()) throw ShapeMismatch("similarity size != label count");
  if (anchor >= labels.size()) throw ShapeMismatch("anchor index out of range");
}

// Scans candidates passing `keep` and returns the extremum under `better`.
// Strict comparison keeps the first (lowest) index among ties.
template <typename Keep, typename Better>
std::optional<std::size_t> scan(const SimilarityMatrix& s, std::size_t anchor, Keep keep,
                                Better better) {
  std::optional<std::size_t> best;
  const auto row = s.row(anchor);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!keep(j)) continue;
    if (!best || better(row[j], row[*best])) best = j;
  }
  return best;
}

constexpr auto kGreater = [](double a, double b) { return a > b; };
constexpr auto kLess = [](double a, double b) { return a < b; };

}  // namespace

std::optional<std::size_t> mine_easy_positive(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor) {
  check_batch(s, labels, anchor);
  return scan(
      s, anchor, [&](std::size_t j) { return j != anchor && labels[j] == labels[anchor]; },
      kGreater);
}

std::optional<std::size_t> mine_hard_positive(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor) {
  check_batch(s, labels, anchor);
  return scan(
      s, anchor, [&](std::size_t j) { return j != anchor && labels[j] == labels[anchor]; },
      kLess);
}

std::optional<std::size_t> mine_hard_negative(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor) {
  check_batch(s, labels, anchor);
  return scan(
      s, anchor, [&](std::size_t j) { return labels[j] != labels[anchor]; }, kGreater);
}

std::optional<std::size_t> mine_easy_negative(const SimilarityMatrix& s,
                                              std::span<const Label> labels, std::size_t anchor) {
  check_batch(s, labels, anchor);
  return scan(
      s, anchor, [&](std::size_t j) { return labels[j] != labels[anchor]; }, kLess);
}

std::optional<std::size_t> mine_semi_hard_negative(const SimilarityMatrix& s,
                                                   std::span<const Label> labels,
                                                   std::size_t anchor, double positive_sim) {
  check_batch(s, labels, anchor);
  const auto row = s.row(anchor);
  return scan(
      s, anchor,
      [&](std::size_t j) { return labels[j] != labels[anchor] && row[j] < positive_sim; },
      kGreater);
}

std::vector<MiningSelection> mine_batch(const SimilarityMatrix& s, std::span<const Label> labels,
                                        MiningStrategy strategy) {
  if (s.size() != labels.size()) throw ShapeMismatch("similarity size != label count");
  std::vector<MiningSelection> out;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    const auto pos = strategy.positive == PositiveRule::Easy ? mine_easy_positive(s, labels, a)
                                                             : mine_hard_positive(s, labels, a);
    if (!pos) continue;
    MiningSelection sel;
    sel.anchor = a;
    sel.positive = pos;
    sel.positive_sim = s(a, *pos);
    switch (strategy.negative) {
      case NegativeRule::All:
        break;
      case NegativeRule::Hard:
        sel.negative = mine_hard_negative(s, labels, a);
        break;
      case NegativeRule::SemiHard:
        sel.negative = mine_semi_hard_negative(s, labels, a, sel.positive_sim);
        break;
    }
    if (sel.negative) sel.negative_sim = s(a, *sel.negative);
    out.push_back(sel);
  }
  return out;
}

}  // namespace epmine
