#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "epmine/data.hpp"
#include "epmine/linalg.hpp"
#include "epmine/losses.hpp"

namespace epmine {

/// ReLU multilayer perceptron whose output rows are projected onto the unit
/// sphere. Stands in for the convolutional backbone.
struct MlpConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t embed_dim = 64;
  /// Weights ~ N(0, 1) * init_scale / sqrt(fan_in). sqrt(2) is He scaling.
  double init_scale = std::sqrt(2.0);
  std::uint64_t seed = 0;

  void validate() const;
};

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  std::vector<double> bias;

  std::size_t fan_in() const noexcept { return weight.rows(); }
  std::size_t fan_out() const noexcept { return weight.cols(); }
  bool operator==(const DenseLayer&) const = default;
};

/// Network weights. Also used as the container for their gradients and for
/// momentum velocity, since all three share shapes.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().fan_in(); }
  std::size_t embed_dim() const { return layers.back().fan_out(); }
  std::size_t num_parameters() const;
  /// Same shapes, all zeros.
  MlpParams zeros_like() const;

  bool operator==(const MlpParams&) const = default;
};

using MlpGrads = MlpParams;

MlpParams init_params(const MlpConfig& cfg);

struct ForwardCache {
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_activations;
  std::vector<double> output_norms;  // ||v|| of each unnormalized output row
  Matrix embeddings;                 // v / ||v||
};

/// Throws ZeroRow when an output row cannot be normalized.
std::pair<EmbeddingMatrix, ForwardCache> forward(const MlpParams& params, const Matrix& x);

/// Gradients of the loss with respect to every weight and bias, given
/// d loss / d embedding. Backpropagates through the normalization Jacobian
/// (I - e e^T) / ||v||.
MlpGrads backward(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_e);

/// Momentum buffer, lazily shaped on first use.
struct MomentumState {
  MlpParams velocity;
};

/// v <- momentum * v + g; p <- p - lr * v.
void sgd_step(MlpParams& params, const MlpGrads& grads, double lr, double momentum,
              MomentumState& state);

struct TrainConfig {
  std::size_t epochs = 40;
  double base_lr = 0.0005;
  std::vector<std::size_t> lr_decay_epochs{20, 30};
  double lr_decay_factor = 0.1;
  double momentum = 0.0;

  void validate() const;
};

/// base_lr * decay_factor^(number of decay epochs <= epoch)
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  double lr = 0.0;

  bool operator==(const BatchRecord&) const = default;
};

struct TrainingLog {
  std::string backbone;
  std::vector<BatchRecord> batches;
  std::vector<double> epoch_mean_loss;  // NaN for an epoch with no usable batch
  std::size_t skipped_batches = 0;
};

struct TrainResult {
  MlpParams initial;
  MlpParams params;
  TrainingLog log;
};

/// SGD over group batches. `seed` fixes initialization (mlp_cfg.seed is
/// ignored), batch sampling (sampler_cfg.seed is ignored) and any loss-side
/// randomness, so the result is a pure function of its arguments.
TrainResult train(const LabeledDataset& ds, const MlpConfig& mlp_cfg,
                  const SamplerConfig& sampler_cfg, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, std::uint64_t seed);

/// "MLP1" checkpoint: magic, u32 layer count, (u32 fan_in, u32 fan_out) per
/// layer, then per layer the row-major weights and the bias as little-endian f64.
void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace epmine
