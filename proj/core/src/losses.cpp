#include "epmine/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "epmine/mining.hpp"

namespace epmine {

namespace {

struct NamedStrategy {
  std::string_view name;
  LossStrategy value;
};

constexpr NamedStrategy kStrategies[] = {
    {"EP", LossStrategy::EP},         {"EPHN", LossStrategy::EPHN},
    {"EPSHN", LossStrategy::EPSHN},   {"HP", LossStrategy::HP},
    {"HPHN", LossStrategy::HPHN},     {"NPAIR", LossStrategy::NPair},
    {"BATCH_ALL", LossStrategy::BatchAll}, {"TRIPLET_MARGIN", LossStrategy::TripletMargin},
};

std::vector<std::size_t> negatives_of(std::span<const Label> labels, std::size_t anchor) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] != labels[anchor]) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> positives_of(std::span<const Label> labels, std::size_t anchor) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (j != anchor && labels[j] == labels[anchor]) out.push_back(j);
  }
  return out;
}

// grad_a += g * e_j and grad_j += g * e_a for s_aj = e_a . e_j
void accumulate_pair(Matrix& grad, const Matrix& e, std::size_t a, std::size_t j, double g) {
  auto ga = grad.row(a);
  auto gj = grad.row(j);
  const auto ea = e.row(a);
  const auto ej = e.row(j);
  for (std::size_t d = 0; d < ea.size(); ++d) {
    ga[d] += g * ej[d];
    gj[d] += g * ea[d];
  }
}

// Equals sqrt(2 - 2 s_ij) on unit rows, without the cancellation as s_ij -> 1.
double pair_distance(const Matrix& e, std::size_t i, std::size_t j) {
  const auto ei = e.row(i);
  const auto ej = e.row(j);
  double sq = 0.0;
  for (std::size_t d = 0; d < ei.size(); ++d) sq += (ei[d] - ej[d]) * (ei[d] - ej[d]);
  return std::sqrt(sq);
}

// grad_i += g (e_i - e_j) / d, grad_j -= the same.
void accumulate_distance(Matrix& grad, const Matrix& e, std::size_t i, std::size_t j, double d,
                         double g) {
  auto gi = grad.row(i);
  auto gj = grad.row(j);
  const auto ei = e.row(i);
  const auto ej = e.row(j);
  for (std::size_t k = 0; k < ei.size(); ++k) {
    const double v = g * (ei[k] - ej[k]) / d;
    gi[k] += v;
    gj[k] -= v;
  }
}

std::vector<LossTerm> plan_triplet_terms(const SimilarityMatrix& s, std::span<const Label> labels,
                                         const LossConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<LossTerm> terms;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    const auto pos = positives_of(labels, a);
    if (pos.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, pos.size() - 1);
    const std::size_t p = pos[pick(rng)];
    auto neg = mine_semi_hard_negative(s, labels, a, s(a, p));
    if (!neg && cfg.shn_fallback == ShnFallback::Hardest) neg = mine_hard_negative(s, labels, a);
    if (!neg) continue;
    terms.push_back({a, p, {*neg}});
  }
  return terms;
}

}  // namespace

LossStrategy parse_loss_strategy(std::string_view name) {
  for (const auto& s : kStrategies) {
    if (s.name == name) return s.value;
  }
  throw ConfigError("unknown loss strategy '" + std::string(name) + "'");
}

std::string_view to_string(LossStrategy s) {
  for (const auto& n : kStrategies) {
    if (n.value == s) return n.name;
  }
  return "?";
}

ShnFallback parse_shn_fallback(std::string_view name) {
  if (name == "hardest") return ShnFallback::Hardest;
  if (name == "skip") return ShnFallback::Skip;
  throw ConfigError("unknown shn_fallback '" + std::string(name) + "'");
}

std::string_view to_string(ShnFallback f) {
  return f == ShnFallback::Hardest ? "hardest" : "skip";
}

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
}

NcaTerm nca_term(double s_pos, std::span<const double> s_negs, double temperature) {
  if (s_negs.empty()) throw EmptyNegatives();
  const double inv_t = 1.0 / temperature;
  const double z_pos = s_pos * inv_t;
  double z_max = z_pos;
  for (double s : s_negs) z_max = std::max(z_max, s * inv_t);
  double sum = std::exp(z_pos - z_max);
  for (double s : s_negs) sum += std::exp(s * inv_t - z_max);
  const double lse = z_max + std::log(sum);

  NcaTerm out;
  out.loss = lse - z_pos;
  const double p_pos = std::exp(z_pos - lse);
  out.d_pos = -(1.0 - p_pos) * inv_t;
  out.d_negs.reserve(s_negs.size());
  for (double s : s_negs) out.d_negs.push_back(std::exp(s * inv_t - lse) * inv_t);
  return out;
}

std::vector<LossTerm> plan_loss_terms(const SimilarityMatrix& s, std::span<const Label> labels,
                                      const LossConfig& cfg) {
  if (s.size() != labels.size()) throw ShapeMismatch("similarity size != label count");
  std::vector<LossTerm> terms;
  switch (cfg.strategy) {
    case LossStrategy::TripletMargin:
      return plan_triplet_terms(s, labels, cfg);

    case LossStrategy::BatchAll:
      for (std::size_t a = 0; a < labels.size(); ++a) {
        const auto neg = negatives_of(labels, a);
        if (neg.empty()) continue;
        for (std::size_t p : positives_of(labels, a)) terms.push_back({a, p, neg});
      }
      return terms;

    case LossStrategy::NPair:
      for (std::size_t a = 0; a < labels.size(); ++a) {
        const auto pos = positives_of(labels, a);
        if (pos.empty()) continue;
        if (pos.size() > 1) {
          throw ConfigError("NPAIR needs exactly one positive per anchor (group size 2)");
        }
        auto neg = negatives_of(labels, a);
        if (neg.empty()) continue;
        terms.push_back({a, pos.front(), std::move(neg)});
      }
      return terms;

    default:
      break;
  }

  MiningStrategy mining;
  switch (cfg.strategy) {
    case LossStrategy::EP: mining = {PositiveRule::Easy, NegativeRule::All}; break;
    case LossStrategy::EPHN: mining = {PositiveRule::Easy, NegativeRule::Hard}; break;
    case LossStrategy::EPSHN: mining = {PositiveRule::Easy, NegativeRule::SemiHard}; break;
    case LossStrategy::HP: mining = {PositiveRule::Hard, NegativeRule::All}; break;
    case LossStrategy::HPHN: mining = {PositiveRule::Hard, NegativeRule::Hard}; break;
    default: break;
  }
  for (const auto& sel : mine_batch(s, labels, mining)) {
    LossTerm term{sel.anchor, *sel.positive, {}};
    if (mining.negative == NegativeRule::All) {
      term.negatives = negatives_of(labels, sel.anchor);
    } else if (sel.negative) {
      term.negatives = {*sel.negative};
    } else if (mining.negative == NegativeRule::SemiHard &&
               cfg.shn_fallback == ShnFallback::Hardest) {
      if (auto hn = mine_hard_negative(s, labels, sel.anchor)) term.negatives = {*hn};
    }
    if (term.negatives.empty()) continue;
    terms.push_back(std::move(term));
  }
  return terms;
}

LossOutput compute_loss(const Matrix& e, std::span<const Label> labels, const LossConfig& cfg) {
  cfg.validate();
  if (cfg.strategy == LossStrategy::TripletMargin) return triplet_margin_loss(e, labels, cfg);
  if (e.rows() != labels.size()) throw ShapeMismatch("embedding rows != label count");

  const auto s = gram_matrix(e);
  const auto terms = plan_loss_terms(s, labels, cfg);
  if (terms.empty()) throw NoValidTriplet();

  LossOutput out;
  out.grad = Matrix(e.rows(), e.cols());
  out.num_anchors = terms.size();
  const double w = 1.0 / static_cast<double>(terms.size());
  double total = 0.0;
  std::vector<double> s_negs;
  for (const auto& t : terms) {
    s_negs.clear();
    for (std::size_t n : t.negatives) s_negs.push_back(s(t.anchor, n));
    const auto nca = nca_term(s(t.anchor, t.positive), s_negs, cfg.temperature);
    total += nca.loss;
    accumulate_pair(out.grad, e, t.anchor, t.positive, w * nca.d_pos);
    for (std::size_t i = 0; i < t.negatives.size(); ++i) {
      accumulate_pair(out.grad, e, t.anchor, t.negatives[i], w * nca.d_negs[i]);
    }
  }
  out.loss = total * w;
  return out;
}

LossOutput triplet_margin_loss(const Matrix& e, std::span<const Label> labels,
                               const LossConfig& cfg) {
  cfg.validate();
  if (e.rows() != labels.size()) throw ShapeMismatch("embedding rows != label count");
  const auto s = gram_matrix(e);
  const auto terms = plan_triplet_terms(s, labels, cfg);
  if (terms.empty()) throw NoValidTriplet();

  LossOutput out;
  out.grad = Matrix(e.rows(), e.cols());
  out.num_anchors = terms.size();
  const double w = 1.0 / static_cast<double>(terms.size());
  double total = 0.0;
  for (const auto& t : terms) {
    const std::size_t n = t.negatives.front();
    const double d_ap = pair_distance(e, t.anchor, t.positive);
    const double d_an = pair_distance(e, t.anchor, n);
    const double hinge = d_ap - d_an + cfg.margin;
    if (!(hinge > 0.0)) continue;
    total += hinge;
    // zero where a distance vanishes (subgradient)
    if (d_ap > kZeroNormThreshold) accumulate_distance(out.grad, e, t.anchor, t.positive, d_ap, w);
    if (d_an > kZeroNormThreshold) accumulate_distance(out.grad, e, t.anchor, n, d_an, -w);
  }
  out.loss = total * w;
  return out;
}

}  // namespace epmine
