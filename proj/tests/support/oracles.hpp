#pragma once

// Independent reference implementations used by the tests. These take the
// slow, obvious route (enumerate, sort, evaluate formulas directly) and share
// no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "epmine/data.hpp"
#include "epmine/linalg.hpp"

namespace oracle {

using epmine::Label;
using epmine::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = normal(rng);
  return m;
}

inline Matrix random_unit_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix m = random_matrix(rows, cols, rng);
  for (std::size_t r = 0; r < rows; ++r) {
    double n = 0.0;
    for (double v : m.row(r)) n += v * v;
    n = std::sqrt(n);
    for (auto& v : m.row(r)) v /= n;
  }
  return m;
}

/// Random symmetric similarity matrix with unit diagonal, entries in [-1, 1].
/// Values are drawn from a coarse grid with probability `tie_rate` to exercise
/// tie-breaking.
inline Matrix random_similarity(std::size_t n, std::mt19937_64& rng, double tie_rate = 0.2) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::bernoulli_distribution coarse(tie_rate);
  std::uniform_int_distribution<int> grid(-4, 4);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = coarse(rng) ? grid(rng) / 4.0 : uni(rng);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

inline std::vector<Label> random_labels(std::size_t n, int num_classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, num_classes - 1);
  std::vector<Label> labels(n);
  for (auto& l : labels) l = pick(rng);
  return labels;
}

/// Labels 0,0,..,1,1,.. with `group` items per class.
inline std::vector<Label> grouped_labels(std::size_t n, std::size_t group) {
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<Label>(i / group);
  return labels;
}

enum class Pick { MostSimilar, LeastSimilar };

/// Collect (sim, index) over candidates, sort, take the first. Sorting orders
/// by similarity then by index, which realizes lowest-index tie breaking.
template <typename Pred>
std::optional<std::size_t> select(const Matrix& s, std::size_t anchor, Pred candidate, Pick pick) {
  std::vector<std::pair<double, std::size_t>> c;
  for (std::size_t j = 0; j < s.cols(); ++j) {
    if (candidate(j)) c.emplace_back(s(anchor, j), j);
  }
  if (c.empty()) return std::nullopt;
  std::sort(c.begin(), c.end(), [pick](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return pick == Pick::MostSimilar ? a.first > b.first : a.first < b.first;
    }
    return a.second < b.second;
  });
  return c.front().second;
}

inline std::optional<std::size_t> easy_positive(const Matrix& s, std::span<const Label> l,
                                                std::size_t a) {
  return select(s, a, [&](std::size_t j) { return j != a && l[j] == l[a]; }, Pick::MostSimilar);
}
inline std::optional<std::size_t> hard_positive(const Matrix& s, std::span<const Label> l,
                                                std::size_t a) {
  return select(s, a, [&](std::size_t j) { return j != a && l[j] == l[a]; }, Pick::LeastSimilar);
}
inline std::optional<std::size_t> hard_negative(const Matrix& s, std::span<const Label> l,
                                                std::size_t a) {
  return select(s, a, [&](std::size_t j) { return l[j] != l[a]; }, Pick::MostSimilar);
}
inline std::optional<std::size_t> easy_negative(const Matrix& s, std::span<const Label> l,
                                                std::size_t a) {
  return select(s, a, [&](std::size_t j) { return l[j] != l[a]; }, Pick::LeastSimilar);
}
inline std::optional<std::size_t> semi_hard_negative(const Matrix& s, std::span<const Label> l,
                                                     std::size_t a, double pos_sim) {
  return select(
      s, a, [&](std::size_t j) { return l[j] != l[a] && s(a, j) < pos_sim; }, Pick::MostSimilar);
}

/// -log softmax evaluated literally in long double (no max subtraction).
inline double nca_literal(double s_pos, const std::vector<double>& s_negs, double t) {
  long double num = std::exp(static_cast<long double>(s_pos) / t);
  long double den = num;
  for (double s : s_negs) den += std::exp(static_cast<long double>(s) / t);
  return static_cast<double>(-std::log(num / den));
}

inline double sim(const Matrix& e, std::size_t i, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < e.cols(); ++d) acc += e(i, d) * e(j, d);
  return acc;
}

inline double distance(const Matrix& e, std::size_t i, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < e.cols(); ++d) acc += (e(i, d) - e(j, d)) * (e(i, d) - e(j, d));
  return std::sqrt(acc);
}

enum class Positive { Easy, Hard, Each };
enum class Negative { All, Hard, SemiHardOrHardest };

/// Straight-line loss: per anchor pick the positive(s) and negatives via the
/// oracle miners above, evaluate the displayed formula, average.
inline std::optional<double> nca_loss(const Matrix& e, std::span<const Label> l, Positive pos_rule,
                                      Negative neg_rule, double t) {
  const std::size_t n = e.rows();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) s(i, j) = sim(e, i, j);
  }
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> positives;
    if (pos_rule == Positive::Each) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != a && l[j] == l[a]) positives.push_back(j);
      }
    } else {
      auto p = pos_rule == Positive::Easy ? easy_positive(s, l, a) : hard_positive(s, l, a);
      if (p) positives.push_back(*p);
    }
    for (std::size_t p : positives) {
      std::vector<double> negs;
      if (neg_rule == Negative::All) {
        for (std::size_t j = 0; j < n; ++j) {
          if (l[j] != l[a]) negs.push_back(s(a, j));
        }
      } else {
        auto ng = neg_rule == Negative::Hard ? hard_negative(s, l, a)
                                             : semi_hard_negative(s, l, a, s(a, p));
        if (!ng) ng = hard_negative(s, l, a);
        if (ng) negs.push_back(s(a, *ng));
      }
      if (negs.empty()) continue;
      total += nca_literal(s(a, p), negs, t);
      ++terms;
    }
  }
  if (terms == 0) return std::nullopt;
  return total / static_cast<double>(terms);
}

/// Recall@K by fully sorting every query's gallery row.
inline std::vector<double> recall_at_k(const Matrix& q, std::span<const Label> ql, const Matrix& g,
                                       std::span<const Label> gl, std::span<const std::size_t> ks,
                                       bool self) {
  std::vector<double> hits(ks.size(), 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j = 0; j < g.rows(); ++j) {
      if (self && i == j) continue;
      double acc = 0.0;
      for (std::size_t d = 0; d < q.cols(); ++d) acc += q(i, d) * g(j, d);
      ranked.emplace_back(acc, j);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; k < ks.size(); ++k) {
      for (std::size_t r = 0; r < ks[k] && r < ranked.size(); ++r) {
        if (gl[ranked[r].second] == ql[i]) {
          hits[k] += 1.0;
          break;
        }
      }
    }
  }
  for (auto& h : hits) h /= static_cast<double>(q.rows());
  return hits;
}

/// |a - b| within `rel` relative or `abs_tol` absolute.
inline bool close(double a, double b, double rel, double abs_tol) {
  const double diff = std::abs(a - b);
  return diff <= abs_tol || diff <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace oracle
