#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "epmine/data.hpp"
#include "epmine/encoder.hpp"
#include "epmine/eval.hpp"
#include "epmine/losses.hpp"

namespace epmine::cli {

enum class EvalSplit { Train, Test, All };

/// Everything a command needs, loaded from a flat `key = value` file.
struct ExperimentConfig {
  // Empty: generate the synthetic dataset described below.
  std::filesystem::path dataset;
  FeatureFormat data_format = FeatureFormat::Csv;
  SyntheticSpec synthetic;
  double train_fraction = 0.5;

  SamplerConfig sampler;
  MlpConfig mlp;
  TrainConfig training;
  LossConfig loss;
  RetrievalConfig retrieval;
  EvalSplit eval_split = EvalSplit::Test;

  // Empty: <out_dir>/model.mlp1
  std::filesystem::path checkpoint;

  std::vector<std::size_t> sweep_group_sizes{2, 4, 8};
  std::vector<LossStrategy> sweep_strategies{LossStrategy::EP,   LossStrategy::HP,
                                             LossStrategy::BatchAll, LossStrategy::EPHN,
                                             LossStrategy::HPHN, LossStrategy::EPSHN};

  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";

  /// Re-checks every component invariant.
  void validate() const;
  std::filesystem::path checkpoint_path() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// are ConfigErrors naming the key. Keys not present keep their defaults.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every recognized key, in file order.
const std::vector<std::string>& config_keys();

}  // namespace epmine::cli
