#pragma once

#include <iosfwd>
#include <utility>

#include "config.hpp"

namespace epmine::cli {

/// The dataset file if configured, else the synthetic one.
LabeledDataset load_or_generate(const ExperimentConfig& cfg);
/// Class-disjoint (train, test) split of `ds` under the config's seed.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const ExperimentConfig& cfg,
                                                        const LabeledDataset& ds);
TrainResult train_model(const ExperimentConfig& cfg, const LabeledDataset& train_set);
EmbeddingMatrix embed(const MlpParams& params, const LabeledDataset& ds);
/// Recall@K of `params` on the configured split(s).
RetrievalReport evaluate(const ExperimentConfig& cfg, const MlpParams& params,
                         const LabeledDataset& train_set, const LabeledDataset& test_set);

void write_training_log(const TrainingLog& log, const std::filesystem::path& path);

// One per subcommand. Artifacts go to cfg.out_dir; the summary to `out`.
void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& out);
void cmd_train(const ExperimentConfig& cfg, std::ostream& out);
void cmd_eval(const ExperimentConfig& cfg, std::ostream& out);
void cmd_sweep(const ExperimentConfig& cfg, std::ostream& out);
void cmd_mine_debug(const ExperimentConfig& cfg, std::ostream& out);

/// 0 success, 2 config error, 3 data error, 4 numeric failure.
int exit_code_for(ErrorKind kind);

}  // namespace epmine::cli
