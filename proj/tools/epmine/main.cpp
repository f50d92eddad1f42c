#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace epmine::cli;

  CLI::App app{"Online triplet-mining metric learning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const ExperimentConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"gen-data", "Generate a synthetic multimodal dataset", cmd_gen_data},
      {"train", "Train an embedding network", cmd_train},
      {"eval", "Evaluate a checkpoint: Recall@K, neighbor stats, spread", cmd_eval},
      {"sweep", "Train and evaluate over strategies x group sizes", cmd_sweep},
      {"mine-debug", "Dump one batch's similarities and mined selections", cmd_mine_debug},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key = value config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides out_dir)");
    sub->add_option("--seed", seed, "run seed (overrides seed)");
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    for (const auto& [sub, cmd] : subs) {
      if (!sub->parsed()) continue;
      if (sub->count("--out")) cfg.out_dir = out_dir;
      if (sub->count("--seed")) cfg.seed = seed;
      cmd->run(cfg, std::cout);
    }
  } catch (const epmine::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
