#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "uicws/encoder.hpp"
#include "uicws/model.hpp"
#include "uicws/train.hpp"

namespace uicws {

struct PathConfig {
  std::string train;
  std::string val;
  std::string test;
  std::string lexicon;
  std::string embeddings;
  std::string output_dir = "run";

  friend bool operator==(const PathConfig&, const PathConfig&) = default;
};

/// Everything `train` and `gradcheck` read from a config file.
struct RunConfig {
  PathConfig paths;
  EncoderConfig encoder;
  TrainConfig train;
  bool bio_input = false;  // corpus tags are BIO and get converted

  void validate() const {
    encoder.validate();
    train.validate();
  }

  /// Input files named by the config must exist; names the first missing one.
  void validate_paths() const {
    const auto need = [](const std::string& what, const std::string& path, bool required) {
      if (path.empty()) {
        if (required) throw DataError("config: [paths] " + what + " is required");
        return;
      }
      if (!std::filesystem::is_regular_file(path)) throw DataError("cannot open " + what + " file: " + path);
    };
    need("train", paths.train, true);
    need("lexicon", paths.lexicon, true);
    need("val", paths.val, false);
    need("test", paths.test, false);
    need("embeddings", paths.embeddings, false);
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) out += (out.empty() ? "" : " ") + std::to_string(s);
  return out;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& w : split_words(s)) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) throw ConfigError("bad seed '" + w + "'");
    out.push_back(v);
  }
  return out;
}

inline std::size_t parse_size(const std::string& key, const std::string& s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

}  // namespace detail

inline boost::property_tree::ptree to_ptree(const RunConfig& c) {
  boost::property_tree::ptree t;
  t.put("paths.train", c.paths.train);
  t.put("paths.val", c.paths.val);
  t.put("paths.test", c.paths.test);
  t.put("paths.lexicon", c.paths.lexicon);
  t.put("paths.embeddings", c.paths.embeddings);
  t.put("paths.output_dir", c.paths.output_dir);
  t.put("paths.bio_input", c.bio_input ? "true" : "false");
  t.put("encoder.d_e", c.encoder.d_e);
  t.put("encoder.d_p", c.encoder.d_p);
  t.put("encoder.d_v", c.encoder.d_v);
  t.put("encoder.n_filters", c.encoder.n_filters);
  t.put("encoder.d_w", c.encoder.d_w);
  t.put("encoder.dropout", format_double(c.encoder.dropout));
  t.put("train.lr", format_double(c.train.lr));
  t.put("train.beta1", format_double(c.train.beta1));
  t.put("train.beta2", format_double(c.train.beta2));
  t.put("train.adam_eps", format_double(c.train.adam_eps));
  t.put("train.max_epochs", c.train.max_epochs);
  t.put("train.patience", c.train.patience);
  t.put("train.batch_size", c.train.batch_size);
  t.put("train.seeds", detail::join_seeds(c.train.seeds));
  t.put("train.val_fraction", format_double(c.train.val_fraction));
  t.put("train.split_seed", c.train.split_seed);
  t.put("train.redraw_split", c.train.redraw_split ? "true" : "false");
  t.put("train.ablation", to_string(c.train.ablation));
  t.put("train.precision", to_string(c.train.precision));
  t.put("train.jobs", c.train.jobs);
  return t;
}

/// Unknown sections or keys are errors so typos do not silently fall back to defaults.
inline RunConfig from_ptree(const boost::property_tree::ptree& t) {
  RunConfig c;
  const std::set<std::string> known{
      "paths.train",      "paths.val",        "paths.test",      "paths.lexicon",     "paths.embeddings",
      "paths.output_dir", "paths.bio_input",  "encoder.d_e",     "encoder.d_p",       "encoder.d_v",
      "encoder.n_filters", "encoder.d_w",     "encoder.dropout", "train.lr",          "train.beta1",
      "train.beta2",      "train.adam_eps",   "train.max_epochs", "train.patience",   "train.batch_size",
      "train.seeds",      "train.val_fraction", "train.split_seed", "train.redraw_split", "train.ablation",
      "train.precision",  "train.jobs"};
  for (const auto& [section, body] : t) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!known.count(section + "." + key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }
  const auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = t.get_optional<std::string>(key)) return *v;
    return std::nullopt;
  };
  const auto str = [&](const std::string& key, std::string& out) {
    if (auto v = get(key)) out = *v;
  };
  const auto size = [&](const std::string& key, std::size_t& out) {
    if (auto v = get(key)) out = detail::parse_size(key, *v);
  };
  const auto real = [&](const std::string& key, double& out) {
    if (auto v = get(key)) {
      try {
        out = parse_double(*v);
      } catch (const ConfigError&) {
        throw ConfigError(key + ": expected a number, got '" + *v + "'");
      }
    }
  };
  const auto flag = [&](const std::string& key, bool& out) {
    if (auto v = get(key)) out = detail::parse_bool(key, *v);
  };
  str("paths.train", c.paths.train);
  str("paths.val", c.paths.val);
  str("paths.test", c.paths.test);
  str("paths.lexicon", c.paths.lexicon);
  str("paths.embeddings", c.paths.embeddings);
  str("paths.output_dir", c.paths.output_dir);
  flag("paths.bio_input", c.bio_input);
  size("encoder.d_e", c.encoder.d_e);
  size("encoder.d_p", c.encoder.d_p);
  size("encoder.d_v", c.encoder.d_v);
  size("encoder.n_filters", c.encoder.n_filters);
  size("encoder.d_w", c.encoder.d_w);
  real("encoder.dropout", c.encoder.dropout);
  real("train.lr", c.train.lr);
  real("train.beta1", c.train.beta1);
  real("train.beta2", c.train.beta2);
  real("train.adam_eps", c.train.adam_eps);
  size("train.max_epochs", c.train.max_epochs);
  size("train.patience", c.train.patience);
  size("train.batch_size", c.train.batch_size);
  if (auto v = get("train.seeds")) c.train.seeds = detail::parse_seeds(*v);
  real("train.val_fraction", c.train.val_fraction);
  if (auto v = get("train.split_seed")) c.train.split_seed = detail::parse_seeds(*v).at(0);
  flag("train.redraw_split", c.train.redraw_split);
  if (auto v = get("train.ablation")) c.train.ablation = ablation_from_string(*v);
  if (auto v = get("train.precision")) c.train.precision = precision_from_string(*v);
  size("train.jobs", c.train.jobs);
  return c;
}

inline RunConfig load_config(std::istream& in) {
  boost::property_tree::ptree t;
  try {
    boost::property_tree::read_ini(in, t);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  return from_ptree(t);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  try {
    return load_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void save_config(std::ostream& out, const RunConfig& c) {
  boost::property_tree::write_ini(out, to_ptree(c));
}

inline void save_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config file: " + path);
  save_config(out, c);
}

}  // namespace uicws
