#ifndef METAGCD_CONFIG_HPP
#define METAGCD_CONFIG_HPP

// Flat experiment configuration. File syntax: one `key = value` per line,
// `#` starts a comment, blank lines ignored. Unknown keys are rejected.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "metagcd/data.hpp"
#include "metagcd/evaluation.hpp"
#include "metagcd/protocol.hpp"
#include "metagcd/trainer.hpp"

namespace metagcd {

struct ExperimentConfig {
  // Paths.
  std::string dataset;
  std::string output_dir = "runs";
  std::string run_name;
  std::uint64_t seed = 1;

  SyntheticSpec data;
  bool data_seed_set = false;
  StreamConfig stream;
  TrainConfig train;
  std::string ablation = "meta";
  Widths encoder_hidden = {128, 64};
  Widths projection_hidden = {64, 32};

  /// Applies one `key = value` setting.
  void set(const std::string& key, const std::string& value);

  /// Re-derives dependent fields and checks every module precondition.
  /// Throws ValidationError or CapacityError.
  void finalize();

  /// Canonical string form of every key, for report provenance.
  std::map<std::string, std::string> to_map() const;

  static std::vector<std::string> keys();
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline Widths parse_widths(const std::string& key, const std::string& v) {
  Widths w;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) w.push_back(parse_number<std::size_t>(key, trim(tok)));
  if (w.empty()) throw ValidationError("config key '" + key + "': empty width list");
  return w;
}

inline std::string join_widths(const Widths& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

inline std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct KeyHandler {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename M>
KeyHandler numeric(M member) {
  return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_number<T>(k, v);
          },
          [member](const ExperimentConfig& c) {
            auto& field = std::invoke(member, const_cast<ExperimentConfig&>(c));
            if constexpr (std::is_floating_point_v<T>)
              return num(field);
            else
              return std::to_string(field);
          }};
}

template <typename M>
KeyHandler boolean(M member) {
  return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_bool(k, v);
          },
          [member](const ExperimentConfig& c) {
            return std::string(std::invoke(member, const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          }};
}

inline const std::map<std::string, KeyHandler>& key_table() {
  using C = ExperimentConfig;
  static const std::map<std::string, KeyHandler> table = {
      {"dataset", {[](C& c, auto&, const std::string& v) { c.dataset = v; }, [](const C& c) { return c.dataset; }}},
      {"output_dir", {[](C& c, auto&, const std::string& v) { c.output_dir = v; }, [](const C& c) { return c.output_dir; }}},
      {"run_name", {[](C& c, auto&, const std::string& v) { c.run_name = v; }, [](const C& c) { return c.run_name; }}},
      {"seed", numeric<std::uint64_t>([](C& c) -> auto& { return c.seed; })},
      {"num_classes", numeric<std::size_t>([](C& c) -> auto& { return c.data.num_classes; })},
      {"dim", numeric<std::size_t>([](C& c) -> auto& { return c.data.dim; })},
      {"samples_per_class", numeric<std::size_t>([](C& c) -> auto& { return c.data.samples_per_class; })},
      {"separation", numeric<double>([](C& c) -> auto& { return c.data.class_separation; })},
      {"data_seed",
       {[](C& c, const std::string& k, const std::string& v) {
          c.data.seed = parse_number<std::uint64_t>(k, v);
          c.data_seed_set = true;
        },
        [](const C& c) { return std::to_string(c.data.seed); }}},
      {"offline_classes", numeric<std::size_t>([](C& c) -> auto& { return c.stream.offline_classes; })},
      {"sessions", numeric<std::size_t>([](C& c) -> auto& { return c.stream.sessions; })},
      {"novel_per_session", numeric<std::size_t>([](C& c) -> auto& { return c.stream.novel_per_session; })},
      {"train_per_class", numeric<std::size_t>([](C& c) -> auto& { return c.stream.train_per_class; })},
      {"test_per_class", numeric<std::size_t>([](C& c) -> auto& { return c.stream.test_per_class; })},
      {"offline_fraction", numeric<double>([](C& c) -> auto& { return c.stream.offline_fraction; })},
      {"debut_fraction", numeric<double>([](C& c) -> auto& { return c.stream.debut_fraction; })},
      {"gamma", numeric<double>([](C& c) -> auto& { return c.train.gamma; })},
      {"alpha", numeric<double>([](C& c) -> auto& { return c.train.alpha; })},
      {"beta", numeric<double>([](C& c) -> auto& { return c.train.beta; })},
      {"warmup_epochs", numeric<std::size_t>([](C& c) -> auto& { return c.train.warmup_epochs; })},
      {"inner_steps", numeric<std::size_t>([](C& c) -> auto& { return c.train.inner_steps; })},
      {"outer_steps", numeric<std::size_t>([](C& c) -> auto& { return c.train.outer_steps; })},
      {"metatest_steps", numeric<std::size_t>([](C& c) -> auto& { return c.train.metatest_steps; })},
      {"batch_size", numeric<std::size_t>([](C& c) -> auto& { return c.train.batch_size; })},
      {"episodes", numeric<std::size_t>([](C& c) -> auto& { return c.train.episodes; })},
      {"ablation", {[](C& c, auto&, const std::string& v) {
                      ablation_flags(v);
                      c.ablation = v == "full" ? "meta" : v;
                    },
                    [](const C& c) { return c.ablation; }}},
      {"tau", numeric<double>([](C& c) -> auto& { return c.train.loss.tau; })},
      {"lambda", numeric<double>([](C& c) -> auto& { return c.train.loss.lambda; })},
      {"epsilon", numeric<double>([](C& c) -> auto& { return c.train.loss.epsilon; })},
      {"attention",
       {[](C& c, const std::string& k, const std::string& v) {
          if (v == "identity") c.train.loss.attention = AttentionMode::kIdentity;
          else if (v == "learned") c.train.loss.attention = AttentionMode::kLearned;
          else throw ValidationError("config key '" + k + "': expected identity|learned, got '" + v + "'");
        },
        [](const C& c) { return std::string(c.train.loss.attention == AttentionMode::kLearned ? "learned" : "identity"); }}},
      {"stop_gradient_on_w", boolean([](C& c) -> auto& { return c.train.loss.stop_gradient_on_w; })},
      {"meta_loss",
       {[](C& c, const std::string& k, const std::string& v) {
          if (v == "supervised") c.train.meta_loss = MetaLoss::kSupervised;
          else if (v == "unsupervised") c.train.meta_loss = MetaLoss::kUnsupervised;
          else throw ValidationError("config key '" + k + "': expected supervised|unsupervised, got '" + v + "'");
        },
        [](const C& c) { return std::string(c.train.meta_loss == MetaLoss::kSupervised ? "supervised" : "unsupervised"); }}},
      {"augment_strength", numeric<double>([](C& c) -> auto& { return c.train.augment_strength; })},
      {"mask_prob", numeric<double>([](C& c) -> auto& { return c.train.mask_prob; })},
      {"kmeans_restarts", numeric<std::size_t>([](C& c) -> auto& { return c.train.kmeans_restarts; })},
      {"encoder_hidden", {[](C& c, const std::string& k, const std::string& v) { c.encoder_hidden = parse_widths(k, v); },
                          [](const C& c) { return join_widths(c.encoder_hidden); }}},
      {"projection_hidden", {[](C& c, const std::string& k, const std::string& v) { c.projection_hidden = parse_widths(k, v); },
                             [](const C& c) { return join_widths(c.projection_hidden); }}},
      {"episode_novel_per_session", numeric<std::size_t>([](C& c) -> auto& { return c.train.episode.novel_per_session; })},
      {"episode_unlabeled_known", numeric<std::size_t>([](C& c) -> auto& { return c.train.episode.unlabeled_known_count; })},
      {"episode_unlabeled_novel", numeric<std::size_t>([](C& c) -> auto& { return c.train.episode.unlabeled_novel_count; })},
      {"episode_test_per_class", numeric<std::size_t>([](C& c) -> auto& { return c.train.episode.test_per_class; })},
  };
  return table;
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto& table = detail::key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ValidationError("unknown config key '" + key + "'");
  it->second.set(*this, key, detail::trim(value));
}

inline std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> k;
  for (const auto& [name, h] : detail::key_table()) k.push_back(name);
  return k;
}

inline std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> m;
  for (const auto& [name, h] : detail::key_table()) m[name] = h.get(*this);
  return m;
}

inline void ExperimentConfig::finalize() {
  if (!data_seed_set) data.seed = seed;
  train.ablation = ablation_flags(ablation);
  train.episode.sessions = stream.sessions;
  train.encoder_widths = {data.dim};
  train.encoder_widths.insert(train.encoder_widths.end(), encoder_hidden.begin(), encoder_hidden.end());
  train.projection_widths = {train.encoder_widths.back()};
  train.projection_widths.insert(train.projection_widths.end(), projection_hidden.begin(), projection_hidden.end());

  data.validate();
  stream.validate();
  train.validate();
  const std::size_t needed = stream.offline_classes + stream.sessions * stream.novel_per_session;
  if (data.num_classes < needed)
    throw CapacityError("stream needs " + std::to_string(needed) + " classes, config generates " +
                        std::to_string(data.num_classes));
  if (data.samples_per_class < stream.train_per_class + stream.test_per_class)
    throw CapacityError("samples_per_class " + std::to_string(data.samples_per_class) + " < train + test per class " +
                        std::to_string(stream.train_per_class + stream.test_per_class));
  if (train.ablation.use_meta && train.episodes > 0 &&
      stream.sessions * train.episode.novel_per_session >= stream.offline_classes)
    throw CapacityError("episodes need " + std::to_string(stream.sessions * train.episode.novel_per_session) +
                        " pseudo-novel classes but only " + std::to_string(stream.offline_classes) +
                        " offline classes exist (at least one must stay pseudo-labeled)");
}

/// Reads `key = value` lines into `cfg`.
inline void read_config(std::istream& is, ExperimentConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline void load_config(const std::filesystem::path& path, ExperimentConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  read_config(is, cfg);
}

/// Applies a `key=value` override string.
inline void apply_override(ExperimentConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ValidationError("override '" + kv + "' is not key=value");
  cfg.set(detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
}

/// Output directory, resolved against $METAGCD_OUTPUT_ROOT when relative.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path p = cfg.output_dir;
  if (p.is_relative())
    if (const char* root = std::getenv("METAGCD_OUTPUT_ROOT"); root && *root) p = std::filesystem::path(root) / p;
  return p;
}

}  // namespace metagcd

#endif  // METAGCD_CONFIG_HPP
