#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "epmine/mining.hpp"

namespace epmine::cli {

namespace {

constexpr std::uint64_t kSyntheticStream = 11;
constexpr std::uint64_t kSplitStream = 12;
constexpr std::uint64_t kDebugBatchStream = 13;

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir.string() + ": " + ec.message());
}

std::string extension_for(FeatureFormat f) { return f == FeatureFormat::Csv ? ".csv" : ".emb1"; }

ExperimentConfig with_input_dim(ExperimentConfig cfg, const LabeledDataset& ds) {
  cfg.mlp.input_dim = ds.dim();
  return cfg;
}

std::string fmt_opt_index(const std::optional<std::size_t>& i) {
  return i ? std::to_string(*i) : std::string("-");
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Numeric: return 4;
  }
  return 4;
}

LabeledDataset load_or_generate(const ExperimentConfig& cfg) {
  if (!cfg.dataset.empty()) {
    const auto fmt = cfg.dataset.extension() == ".emb1" || cfg.dataset.extension() == ".csv"
                         ? feature_format_for_path(cfg.dataset)
                         : cfg.data_format;
    return load_features(cfg.dataset, fmt);
  }
  SyntheticSpec spec = cfg.synthetic;
  spec.seed = derive_seed(cfg.seed, kSyntheticStream);
  return generate_synthetic(spec);
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const ExperimentConfig& cfg,
                                                        const LabeledDataset& ds) {
  return split_by_class(ds, cfg.train_fraction, derive_seed(cfg.seed, kSplitStream));
}

TrainResult train_model(const ExperimentConfig& cfg, const LabeledDataset& train_set) {
  const auto c = with_input_dim(cfg, train_set);
  return train(train_set, c.mlp, c.sampler, c.loss, c.training, c.seed);
}

EmbeddingMatrix embed(const MlpParams& params, const LabeledDataset& ds) {
  if (params.input_dim() != ds.dim()) {
    throw DimensionMismatch("checkpoint expects " + std::to_string(params.input_dim()) +
                            " inputs, dataset has " + std::to_string(ds.dim()));
  }
  return forward(params, ds.features()).first;
}

RetrievalReport evaluate(const ExperimentConfig& cfg, const MlpParams& params,
                         const LabeledDataset& train_set, const LabeledDataset& test_set) {
  if (cfg.retrieval.mode == RetrievalMode::QueryGallery) {
    const auto q = embed(params, test_set);
    const auto g = embed(params, train_set);
    return recall_at_k(q, test_set.labels(), g, train_set.labels(), cfg.retrieval);
  }
  const LabeledDataset& ds = cfg.eval_split == EvalSplit::Train ? train_set : test_set;
  const auto e = embed(params, ds);
  return recall_at_k(e, ds.labels(), e, ds.labels(), cfg.retrieval);
}

void write_training_log(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,batch,loss,lr\n";
  for (const auto& b : log.batches) {
    out << b.epoch << ',' << b.batch << ',' << format_real(b.loss) << ',' << format_real(b.lr)
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& out) {
  SyntheticSpec spec = cfg.synthetic;
  spec.seed = derive_seed(cfg.seed, kSyntheticStream);
  const auto ds = generate_synthetic(spec);
  ensure_out_dir(cfg);
  const auto path = cfg.out_dir / ("dataset" + extension_for(cfg.data_format));
  save_features(ds.features(), ds.labels(), path, cfg.data_format);
  out << "wrote=" << path.string() << '\n'
      << "N=" << ds.size() << '\n'
      << "D=" << ds.dim() << '\n'
      << "classes=" << ds.num_classes() << '\n'
      << "modes_per_class=" << spec.modes_per_class << '\n';
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  const auto ds = load_or_generate(cfg);
  const auto [train_set, test_set] = split_dataset(cfg, ds);
  const auto result = train_model(cfg, train_set);
  ensure_out_dir(cfg);
  save_checkpoint(result.params, cfg.checkpoint_path());
  write_training_log(result.log, cfg.out_dir / "train_log.csv");

  out << "backbone=" << result.log.backbone << '\n'
      << "strategy=" << to_string(cfg.loss.strategy) << '\n'
      << "train_items=" << train_set.size() << '\n'
      << "train_classes=" << train_set.num_classes() << '\n'
      << "batches=" << result.log.batches.size() << '\n'
      << "skipped_batches=" << result.log.skipped_batches << '\n';
  if (!result.log.epoch_mean_loss.empty()) {
    out << "first_epoch_loss=" << format_real(result.log.epoch_mean_loss.front()) << '\n'
        << "last_epoch_loss=" << format_real(result.log.epoch_mean_loss.back()) << '\n';
  }
  out << "checkpoint=" << cfg.checkpoint_path().string() << '\n';
}

void cmd_eval(const ExperimentConfig& cfg, std::ostream& out) {
  const auto params = load_checkpoint(cfg.checkpoint_path());
  const auto ds = load_or_generate(cfg);
  const auto [train_set, test_set] = split_dataset(cfg, ds);
  const auto report = evaluate(cfg, params, train_set, test_set);

  const LabeledDataset& diag_set = cfg.eval_split == EvalSplit::Train  ? train_set
                                   : cfg.eval_split == EvalSplit::Test ? test_set
                                                                       : ds;
  const auto e = embed(params, diag_set);
  ensure_out_dir(cfg);
  const std::string text = format_report(report);
  {
    std::ofstream f(cfg.out_dir / "report.txt", std::ios::trunc);
    if (!f) throw IoError("cannot write report.txt");
    f << text;
  }
  write_neighbor_stats_csv(neighbor_stats(e, diag_set.labels()), cfg.out_dir / "neighbors.csv");
  write_spread_csv(intra_class_spread(e, diag_set.labels()), cfg.out_dir / "spread.csv");
  export_embeddings(e, diag_set.labels(), cfg.out_dir / "embeddings.csv", FeatureFormat::Csv);
  if (e.rows() >= 3) {
    const auto proj = pca_project_2d(e);
    save_features(proj.coords, diag_set.labels(), cfg.out_dir / "pca2d.csv", FeatureFormat::Csv);
  }
  out << text;
}

void cmd_sweep(const ExperimentConfig& cfg, std::ostream& out) {
  const auto ds = load_or_generate(cfg);
  const auto [train_set, test_set] = split_dataset(cfg, ds);
  ensure_out_dir(cfg);
  std::ostringstream table;
  table << "strategy,n,recall_at_1\n";
  for (LossStrategy strategy : cfg.sweep_strategies) {
    for (std::size_t n : cfg.sweep_group_sizes) {
      ExperimentConfig cell = cfg;
      cell.loss.strategy = strategy;
      cell.sampler.group_size = n;
      cell.retrieval.k_values = {1};
      const auto result = train_model(cell, train_set);
      const auto report = evaluate(cell, result.params, train_set, test_set);
      table << to_string(strategy) << ',' << n << ',' << format_real(report.recall_at_k.at(1))
            << '\n';
    }
  }
  std::ofstream f(cfg.out_dir / "sweep.csv", std::ios::trunc);
  if (!f) throw IoError("cannot write sweep.csv");
  f << table.str();
  out << table.str();
}

void cmd_mine_debug(const ExperimentConfig& cfg, std::ostream& out) {
  const auto ds = load_or_generate(cfg);
  SamplerConfig sc = cfg.sampler;
  Rng rng(derive_seed(cfg.seed, kDebugBatchStream));
  const auto batch = sample_group_batch(ds, sc, rng);
  const Matrix x = ds.gather_features(batch.indices);

  // Without a checkpoint, mine over the normalized raw features.
  const bool have_ckpt = !cfg.checkpoint.empty() || std::filesystem::exists(cfg.checkpoint_path());
  const EmbeddingMatrix e = have_ckpt ? forward(load_checkpoint(cfg.checkpoint_path()), x).first
                                      : l2_normalize_rows(x);
  const auto s = cosine_similarity_matrix(e);
  const auto& labels = batch.labels;

  out << "batch_size=" << batch.size() << '\n';
  out << "embedding=" << (have_ckpt ? cfg.checkpoint_path().string() : "raw") << '\n';
  out << "# similarity matrix (row: batch position, dataset index, label)\n";
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << std::setw(3) << i << ' ' << std::setw(6) << batch.indices[i] << ' ' << std::setw(4)
        << labels[i] << " |";
    for (double v : s.row(i)) out << ' ' << std::setw(7) << v;
    out << '\n';
  }
  out << "# anchor label EP ep_sim HP hp_sim HN hn_sim SHN shn_sim EN en_sim\n";
  auto sim_of = [&](std::size_t a, const std::optional<std::size_t>& j) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(4);
    if (j) o << s(a, *j);
    else o << '-';
    return o.str();
  };
  for (std::size_t a = 0; a < labels.size(); ++a) {
    const auto ep = mine_easy_positive(s, labels, a);
    const auto hp = mine_hard_positive(s, labels, a);
    const auto hn = mine_hard_negative(s, labels, a);
    const auto en = mine_easy_negative(s, labels, a);
    std::optional<std::size_t> shn;
    if (ep) shn = mine_semi_hard_negative(s, labels, a, s(a, *ep));
    out << a << ' ' << labels[a] << ' ' << fmt_opt_index(ep) << ' ' << sim_of(a, ep) << ' '
        << fmt_opt_index(hp) << ' ' << sim_of(a, hp) << ' ' << fmt_opt_index(hn) << ' '
        << sim_of(a, hn) << ' ';
    if (ep && !shn) {
      out << "fallback(" << fmt_opt_index(hn) << ") " << sim_of(a, hn);
    } else {
      out << fmt_opt_index(shn) << ' ' << sim_of(a, shn);
    }
    out << ' ' << fmt_opt_index(en) << ' ' << sim_of(a, en) << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace epmine::cli
