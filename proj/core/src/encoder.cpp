#include "epmine/encoder.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace epmine {

namespace {

constexpr std::array<char, 4> kMlp1Magic{'M', 'L', 'P', '1'};
constexpr int kMaxBatchResamples = 100;
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSamplerStream = 2;
constexpr std::uint64_t kLossStream = 3;

// out = a * w + bias (bias broadcast over rows)
Matrix affine(const Matrix& a, const DenseLayer& layer) {
  Matrix out(a.rows(), layer.fan_out());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto o = out.row(r);
    std::copy(layer.bias.begin(), layer.bias.end(), o.begin());
    const auto in = a.row(r);
    for (std::size_t k = 0; k < in.size(); ++k) {
      const double v = in[k];
      if (v == 0.0) continue;
      const auto w = layer.weight.row(k);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] += v * w[c];
    }
  }
  return out;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& in, int bytes, const std::filesystem::path& path) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), bytes)) {
    throw ParseError(path.string(), "truncated MLP1 checkpoint");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in, const std::filesystem::path& path) {
  const std::uint64_t bits = get_le(in, 8, path);
  double d;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

}  // namespace

void MlpConfig::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (embed_dim < 2) throw ConfigError("embed_dim must be >= 2");
  for (auto h : hidden_dims) {
    if (h < 1) throw ConfigError("hidden dims must be >= 1");
  }
  if (!std::isfinite(init_scale)) throw ConfigError("init_scale must be finite");
}

std::size_t MlpParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.data().size() + l.bias.size();
  return n;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  for (const auto& l : layers) {
    z.layers.push_back({Matrix(l.fan_in(), l.fan_out()), std::vector<double>(l.bias.size())});
  }
  return z;
}

MlpParams init_params(const MlpConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> dims{cfg.input_dim};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embed_dim);

  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{Matrix(dims[l], dims[l + 1]), std::vector<double>(dims[l + 1], 0.0)};
    const double scale = cfg.init_scale / std::sqrt(static_cast<double>(dims[l]));
    for (auto& w : layer.weight.data()) w = normal(rng) * scale;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::pair<EmbeddingMatrix, ForwardCache> forward(const MlpParams& params, const Matrix& x) {
  if (params.layers.empty()) throw ShapeMismatch("network has no layers");
  if (x.cols() != params.input_dim()) {
    throw ShapeMismatch("input has " + std::to_string(x.cols()) + " columns, network expects " +
                        std::to_string(params.input_dim()));
  }
  ForwardCache cache;
  Matrix h = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix z = affine(h, params.layers[l]);
    cache.layer_inputs.push_back(std::move(h));
    if (l + 1 < params.layers.size()) {
      h = z;
      for (auto& v : h.data()) v = std::max(v, 0.0);
    } else {
      h = z;
    }
    cache.pre_activations.push_back(std::move(z));
  }
  cache.output_norms.resize(h.rows());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    cache.output_norms[r] = std::sqrt(squared_norm<double>(h.row(r)));
  }
  auto e = l2_normalize_rows(std::move(h));
  cache.embeddings = e.matrix();
  return {std::move(e), std::move(cache)};
}

MlpGrads backward(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_e) {
  const std::size_t n_layers = params.layers.size();
  if (cache.pre_activations.size() != n_layers || grad_e.rows() != cache.embeddings.rows() ||
      grad_e.cols() != cache.embeddings.cols()) {
    throw ShapeMismatch("gradient/cache shapes do not match the network");
  }

  // Through the normalization: (g - (g . e) e) / ||v||
  Matrix delta(grad_e.rows(), grad_e.cols());
  for (std::size_t r = 0; r < grad_e.rows(); ++r) {
    const auto g = grad_e.row(r);
    const auto e = cache.embeddings.row(r);
    const double ge = dot<double>(g, e);
    const double inv = 1.0 / cache.output_norms[r];
    auto d = delta.row(r);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] = (g[c] - ge * e[c]) * inv;
  }

  MlpGrads grads = params.zeros_like();
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    const Matrix& in = cache.layer_inputs[l];
    auto& gl = grads.layers[l];
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto d = delta.row(r);
      const auto a = in.row(r);
      for (std::size_t c = 0; c < d.size(); ++c) gl.bias[c] += d[c];
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double av = a[k];
        if (av == 0.0) continue;
        auto gw = gl.weight.row(k);
        for (std::size_t c = 0; c < d.size(); ++c) gw[c] += av * d[c];
      }
    }
    if (l == 0) break;
    // delta_prev = (delta * W^T) masked by relu'(z_prev)
    const Matrix& z_prev = cache.pre_activations[l - 1];
    Matrix prev(delta.rows(), layer.fan_in());
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto d = delta.row(r);
      auto p = prev.row(r);
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (!(z_prev(r, k) > 0.0)) continue;
        p[k] = dot<double>(d, layer.weight.row(k));
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

void sgd_step(MlpParams& params, const MlpGrads& grads, double lr, double momentum,
              MomentumState& state) {
  if (grads.layers.size() != params.layers.size()) throw ShapeMismatch("gradient layer count");
  if (state.velocity.layers.size() != params.layers.size()) state.velocity = params.zeros_like();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    auto& v = state.velocity.layers[l];
    if (g.weight.data().size() != p.weight.data().size() || g.bias.size() != p.bias.size()) {
      throw ShapeMismatch("gradient shape differs from parameter shape in layer " +
                          std::to_string(l));
    }
    auto update = [&](std::vector<double>& pv, const std::vector<double>& gv,
                      std::vector<double>& vv) {
      for (std::size_t i = 0; i < pv.size(); ++i) {
        vv[i] = momentum * vv[i] + gv[i];
        pv[i] -= lr * vv[i];
      }
    };
    update(p.weight.data(), g.weight.data(), v.weight.data());
    update(p.bias, g.bias, v.bias);
  }
}

void TrainConfig::validate() const {
  // base_lr = 0 is accepted: a frozen run is a useful baseline.
  if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be >= 0");
  for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
    if (lr_decay_epochs[i] >= epochs) throw ConfigError("lr decay epochs must be < epochs");
    if (i > 0 && lr_decay_epochs[i] <= lr_decay_epochs[i - 1]) {
      throw ConfigError("lr decay epochs must be strictly increasing");
    }
  }
  if (!(lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.base_lr;
  for (auto e : cfg.lr_decay_epochs) {
    if (e <= epoch) lr *= cfg.lr_decay_factor;
  }
  return lr;
}

TrainResult train(const LabeledDataset& ds, const MlpConfig& mlp_cfg,
                  const SamplerConfig& sampler_cfg, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, std::uint64_t seed) {
  train_cfg.validate();
  loss_cfg.validate();
  if (ds.empty()) throw EmptyDataset();
  if (ds.dim() != mlp_cfg.input_dim) {
    throw DimensionMismatch("dataset dim " + std::to_string(ds.dim()) + " != input_dim " +
                            std::to_string(mlp_cfg.input_dim));
  }

  MlpConfig net_cfg = mlp_cfg;
  net_cfg.seed = derive_seed(seed, kInitStream);
  SamplerConfig batch_cfg = sampler_cfg;
  batch_cfg.seed = derive_seed(seed, kSamplerStream);

  TrainResult result;
  result.initial = init_params(net_cfg);
  result.params = result.initial;
  result.log.backbone = "mlp";
  GroupSampler sampler(ds, batch_cfg);
  MomentumState momentum;
  LossConfig step_loss = loss_cfg;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(train_cfg, epoch);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < sampler.batches_per_epoch(); ++b, ++step) {
      GroupBatch batch;
      for (int attempt = 0;; ++attempt) {
        try {
          batch = sampler.next();
          break;
        } catch (const NoPositivePair&) {
          if (attempt + 1 == kMaxBatchResamples) throw;
        }
      }
      step_loss.seed = derive_seed(seed, kLossStream + step);
      try {
        auto [e, cache] = forward(result.params, ds.gather_features(batch.indices));
        const auto out = compute_loss(e, batch.labels, step_loss);
        const auto grads = backward(result.params, cache, out.grad);
        sgd_step(result.params, grads, lr, train_cfg.momentum, momentum);
        result.log.batches.push_back({epoch, b, out.loss, lr});
        sum += out.loss;
        ++used;
      } catch (const ZeroRow&) {
        ++result.log.skipped_batches;
      } catch (const NoValidTriplet&) {
        ++result.log.skipped_batches;
      }
    }
    result.log.epoch_mean_loss.push_back(
        used ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMlp1Magic.data(), kMlp1Magic.size());
  put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.fan_in()));
    put_u32(out, static_cast<std::uint32_t>(l.fan_out()));
  }
  for (const auto& l : params.layers) {
    for (double w : l.weight.data()) put_f64(out, w);
    for (double b : l.bias) put_f64(out, b);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMlp1Magic) {
    throw ParseError(path.string(), "missing MLP1 magic");
  }
  const auto n_layers = static_cast<std::size_t>(get_le(in, 4, path));
  if (n_layers == 0) throw ParseError(path.string(), "checkpoint has no layers");
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto fan_in = static_cast<std::size_t>(get_le(in, 4, path));
    const auto fan_out = static_cast<std::size_t>(get_le(in, 4, path));
    if (l > 0 && dims.back().second != fan_in) {
      throw ParseError(path.string(), "layer dims do not chain at layer " + std::to_string(l));
    }
    dims.emplace_back(fan_in, fan_out);
  }
  MlpParams p;
  for (auto [fan_in, fan_out] : dims) {
    DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out)};
    for (auto& w : layer.weight.data()) w = get_f64(in, path);
    for (auto& b : layer.bias) b = get_f64(in, path);
    p.layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(path.string(), "trailing bytes after MLP1 payload");
  }
  return p;
}

}  // namespace epmine
