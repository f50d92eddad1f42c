#pragma once

// Central finite-difference checks for the loss and the full network. A probe
// whose perturbation changes any mined selection (or ReLU pattern, or active
// hinge) is rejected: the analytic gradient treats those as constants.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "epmine/encoder.hpp"
#include "epmine/losses.hpp"
#include "oracles.hpp"

namespace gradcheck {

using namespace epmine;

struct Result {
  std::size_t checked = 0;
  std::size_t rejected = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;  // over entries above the absolute tolerance
  double max_abs_error = 0.0;
};

inline constexpr double kStep = 1e-6;
inline constexpr double kRelTol = 1e-4;
inline constexpr double kAbsTol = 1e-7;

/// Selection fingerprint of a batch: mined terms plus, for the margin loss,
/// which hinges are active.
struct Fingerprint {
  std::vector<LossTerm> terms;
  std::vector<bool> active;
  bool operator==(const Fingerprint&) const = default;
};

inline Fingerprint fingerprint(const Matrix& e, std::span<const Label> labels,
                               const LossConfig& cfg) {
  Fingerprint f;
  f.terms = plan_loss_terms(gram_matrix(e), labels, cfg);
  if (cfg.strategy == LossStrategy::TripletMargin) {
    for (const auto& t : f.terms) {
      const double dap = oracle::distance(e, t.anchor, t.positive);
      const double dan = oracle::distance(e, t.anchor, t.negatives.front());
      f.active.push_back(dap - dan + cfg.margin > 0.0);
    }
  }
  return f;
}

inline void record(Result& r, double analytic, double numeric) {
  ++r.checked;
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  r.max_abs_error = std::max(r.max_abs_error, diff);
  if (diff > kAbsTol) r.max_rel_error = std::max(r.max_rel_error, diff / scale);
  if (!oracle::close(analytic, numeric, kRelTol, kAbsTol)) ++r.failures;
}

/// d loss / d embedding vs central differences, every entry.
inline Result check_embedding_gradient(const Matrix& e, std::span<const Label> labels,
                                       const LossConfig& cfg) {
  Result r;
  const auto base = compute_loss(e, labels, cfg);
  const auto fp = fingerprint(e, labels, cfg);
  Matrix probe = e;
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t d = 0; d < e.cols(); ++d) {
      const double orig = probe(i, d);
      probe(i, d) = orig + kStep;
      const bool stable_plus = fingerprint(probe, labels, cfg) == fp;
      const double lp = compute_loss(probe, labels, cfg).loss;
      probe(i, d) = orig - kStep;
      const bool stable_minus = fingerprint(probe, labels, cfg) == fp;
      const double lm = compute_loss(probe, labels, cfg).loss;
      probe(i, d) = orig;
      if (!stable_plus || !stable_minus) {
        ++r.rejected;
        continue;
      }
      record(r, base.grad(i, d), (lp - lm) / (2.0 * kStep));
    }
  }
  return r;
}

inline std::vector<bool> relu_pattern(const ForwardCache& cache) {
  std::vector<bool> out;
  for (std::size_t l = 0; l + 1 < cache.pre_activations.size(); ++l) {
    for (double v : cache.pre_activations[l].data()) out.push_back(v > 0.0);
  }
  return out;
}

/// d loss / d parameter through loss . normalize . MLP vs central differences.
inline Result check_parameter_gradient(const MlpParams& params, const Matrix& x,
                                       std::span<const Label> labels, const LossConfig& cfg) {
  Result r;
  auto [e, cache] = forward(params, x);
  const auto out = compute_loss(e, labels, cfg);
  const auto grads = backward(params, cache, out.grad);
  const auto fp = fingerprint(e.matrix(), labels, cfg);
  const auto mask = relu_pattern(cache);

  MlpParams probe = params;
  auto eval = [&](bool& stable) {
    auto [pe, pc] = forward(probe, x);
    stable = stable && fingerprint(pe.matrix(), labels, cfg) == fp && relu_pattern(pc) == mask;
    return compute_loss(pe, labels, cfg).loss;
  };
  auto check = [&](std::vector<double>& values, const std::vector<double>& analytic) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double orig = values[k];
      bool stable = true;
      values[k] = orig + kStep;
      const double lp = eval(stable);
      values[k] = orig - kStep;
      const double lm = eval(stable);
      values[k] = orig;
      if (!stable) {
        ++r.rejected;
        continue;
      }
      record(r, analytic[k], (lp - lm) / (2.0 * kStep));
    }
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    check(probe.layers[l].weight.data(), grads.layers[l].weight.data());
    check(probe.layers[l].bias, grads.layers[l].bias);
  }
  return r;
}

}  // namespace gradcheck
