#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace epmine::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last) bad_value(key, value);
  return out;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_counts(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string&)>;

template <typename T>
Setter number(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.*field = parse_number<T>(k, v);
  };
}

template <typename Owner, typename T>
Setter nested(Owner ExperimentConfig::*owner, T Owner::*field) {
  return [owner, field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    (c.*owner).*field = parse_number<T>(k, v);
  };
}

template <typename Fn>
Setter wrap(Fn fn) {
  return [fn](ExperimentConfig& c, const std::string& k, const std::string& v) {
    try {
      fn(c, v);
    } catch (const ConfigError&) {
      bad_value(k, v);
    }
  };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"dataset", [](C& c, const std::string&, const std::string& v) { c.dataset = v; }},
      {"data_format", wrap([](C& c, const std::string& v) { c.data_format = parse_feature_format(v); })},
      {"num_classes", nested(&C::synthetic, &SyntheticSpec::num_classes)},
      {"modes_per_class", nested(&C::synthetic, &SyntheticSpec::modes_per_class)},
      {"samples_per_class", nested(&C::synthetic, &SyntheticSpec::samples_per_class)},
      {"input_dim", nested(&C::synthetic, &SyntheticSpec::input_dim)},
      {"mode_separation", nested(&C::synthetic, &SyntheticSpec::mode_separation)},
      {"class_separation", nested(&C::synthetic, &SyntheticSpec::class_separation)},
      {"noise_std", nested(&C::synthetic, &SyntheticSpec::noise_std)},
      {"train_fraction", number(&C::train_fraction)},
      {"batch_size", nested(&C::sampler, &SamplerConfig::batch_size)},
      {"group_size", nested(&C::sampler, &SamplerConfig::group_size)},
      {"hidden_dims", [](C& c, const std::string& k, const std::string& v) { c.mlp.hidden_dims = parse_counts(k, v); }},
      {"embed_dim", nested(&C::mlp, &MlpConfig::embed_dim)},
      {"init_scale", nested(&C::mlp, &MlpConfig::init_scale)},
      {"epochs", nested(&C::training, &TrainConfig::epochs)},
      {"base_lr", nested(&C::training, &TrainConfig::base_lr)},
      {"lr_decay_epochs", [](C& c, const std::string& k, const std::string& v) { c.training.lr_decay_epochs = parse_counts(k, v); }},
      {"lr_decay_factor", nested(&C::training, &TrainConfig::lr_decay_factor)},
      {"momentum", nested(&C::training, &TrainConfig::momentum)},
      {"strategy", wrap([](C& c, const std::string& v) { c.loss.strategy = parse_loss_strategy(v); })},
      {"temperature", nested(&C::loss, &LossConfig::temperature)},
      {"margin", nested(&C::loss, &LossConfig::margin)},
      {"shn_fallback", wrap([](C& c, const std::string& v) { c.loss.shn_fallback = parse_shn_fallback(v); })},
      {"k_values", [](C& c, const std::string& k, const std::string& v) { c.retrieval.k_values = parse_counts(k, v); }},
      {"retrieval_mode", wrap([](C& c, const std::string& v) { c.retrieval.mode = parse_retrieval_mode(v); })},
      {"eval_split", [](C& c, const std::string& k, const std::string& v) {
         if (v == "train") c.eval_split = EvalSplit::Train;
         else if (v == "test") c.eval_split = EvalSplit::Test;
         else if (v == "all") c.eval_split = EvalSplit::All;
         else bad_value(k, v);
       }},
      {"checkpoint", [](C& c, const std::string&, const std::string& v) { c.checkpoint = v; }},
      {"sweep_group_sizes", [](C& c, const std::string& k, const std::string& v) { c.sweep_group_sizes = parse_counts(k, v); }},
      {"sweep_strategies", wrap([](C& c, const std::string& v) {
         c.sweep_strategies.clear();
         for (const auto& s : split_list(v)) c.sweep_strategies.push_back(parse_loss_strategy(s));
       })},
      {"seed", number(&C::seed)},
      {"out_dir", [](C& c, const std::string&, const std::string& v) { c.out_dir = v; }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) synthetic.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  sampler.validate();
  MlpConfig m = mlp;
  m.input_dim = std::max<std::size_t>(m.input_dim, 1);
  m.validate();
  training.validate();
  loss.validate();
  retrieval.validate();
  for (auto n : sweep_group_sizes) {
    SamplerConfig s = sampler;
    s.group_size = n;
    s.validate();
  }
}

std::filesystem::path ExperimentConfig::checkpoint_path() const {
  return checkpoint.empty() ? out_dir / "model.mlp1" : checkpoint;
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  static const std::map<std::string, Setter> lookup(setters().begin(), setters().end());
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const auto it = lookup.find(key);
    if (it == lookup.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    it->second(cfg, key, value);
  }
  cfg.mlp.input_dim = cfg.synthetic.input_dim;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace epmine::cli
