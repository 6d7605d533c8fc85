#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "istf/backtest.hpp"
#include "istf/data.hpp"
#include "istf/network.hpp"
#include "istf/train.hpp"

namespace istf {

// Flat `key = value` config file, `#` comments. Every key is documented with
// a default; unknown keys are rejected. Keys without a default must be set
// explicitly by the commands that need them.
class RunConfig {
 public:
  RunConfig() {
    // key -> default ("" plus required=true means the key has no default)
    add("synth.m", "", true);
    add("synth.months", "", true);
    add("synth.seed", "1");
    add("synth.start", "2015-01");
    add("synth.level_min", "20");
    add("synth.level_max", "120");
    add("synth.trend_min", "-0.5");
    add("synth.trend_max", "0.8");
    add("synth.season_amp", "15");
    add("synth.noise_std", "2");
    add("synth.zero_prob", "0");
    add("synth.gamma", "");  // "i:j:v;i:j:v" entries, rest zero

    add("data.context_length", "24");
    add("data.horizon", "12");
    add("data.stride", "1");
    add("data.train_end", "", true);  // YYYY-MM, required by `train`
    add("data.scaler", "global_log1p_standardize");

    add("net.encoder_blocks", "2");
    add("net.decoder_blocks", "2");
    add("net.d_model", "128");
    add("net.num_heads", "4");
    add("net.ff_width", "0");
    add("net.embedding_dim", "6");
    add("net.inter_series", "raw");
    add("net.inter_heads", "1");
    add("net.inter_layers", "1");
    add("net.positional_encoding", "none");
    add("net.date_features", "true");
    add("net.dropout", "0");
    add("net.activation", "relu");

    add("train.learning_rate", "0.0015");
    add("train.plateau_factor", "0.95");
    add("train.plateau_patience", "25");
    add("train.min_delta", "1e-5");
    add("train.batch_size", "64");
    add("train.epochs", "1000");
    add("train.seed", "42");
    add("train.loss", "mse");
    add("train.holdout", "0");

    add("backtest.origins", "", true);  // comma-separated YYYY-MM, required by `backtest`
    add("backtest.buckets", "1-3,4-12,13-24");

    add("forecast.clip_nonnegative", "true");
  }

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string t = trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }

  void set(const std::string& key, const std::string& value) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.value = value;
    it->second.is_set = true;
  }

  bool is_set(const std::string& key) const {
    auto it = entries_.find(key);
    return it != entries_.end() && (it->second.is_set || !it->second.required);
  }

  std::string str(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    if (it->second.required && !it->second.is_set)
      throw ConfigError("missing required key '" + key + "'");
    return it->second.value;
  }

  long integer(const std::string& key) const {
    std::string v = str(key);
    try {
      size_t pos = 0;
      long r = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (...) {
      throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    }
  }

  double number(const std::string& key) const {
    std::string v = str(key);
    try {
      size_t pos = 0;
      double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (...) {
      throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    }
  }

  bool boolean(const std::string& key) const {
    std::string v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
  }

  // Effective configuration, defaults included, in sorted key order.
  void echo(std::ostream& out) const {
    for (const auto& [k, e] : entries_) {
      if (e.required && !e.is_set) continue;
      out << k << " = " << e.value << '\n';
    }
  }

  SynthConfig synth() const {
    SynthConfig c;
    c.m = static_cast<int>(integer("synth.m"));
    c.months = static_cast<int>(integer("synth.months"));
    c.seed = static_cast<std::uint64_t>(integer("synth.seed"));
    c.start = YearMonth::parse(str("synth.start"));
    c.level_min = number("synth.level_min");
    c.level_max = number("synth.level_max");
    c.trend_min = number("synth.trend_min");
    c.trend_max = number("synth.trend_max");
    c.season_amp = number("synth.season_amp");
    c.noise_std = number("synth.noise_std");
    c.zero_prob = number("synth.zero_prob");
    std::string gamma = str("synth.gamma");
    if (!gamma.empty()) {
      c.gamma.assign(static_cast<size_t>(c.m), std::vector<double>(static_cast<size_t>(c.m), 0.0));
      std::stringstream ss(gamma);
      std::string entry;
      while (std::getline(ss, entry, ';')) {
        int i, j;
        double v;
        char c1, c2;
        std::stringstream es(entry);
        if (!(es >> i >> c1 >> j >> c2 >> v) || c1 != ':' || c2 != ':')
          throw ConfigError("synth.gamma entry '" + entry + "' is not i:j:v");
        if (i < 0 || i >= c.m || j < 0 || j >= c.m)
          throw ConfigError("synth.gamma entry '" + entry + "' out of range");
        c.gamma[static_cast<size_t>(i)][static_cast<size_t>(j)] = v;
      }
    }
    return c;
  }

  NetworkConfig network() const {
    NetworkConfig c;
    c.encoder_blocks = static_cast<int>(integer("net.encoder_blocks"));
    c.decoder_blocks = static_cast<int>(integer("net.decoder_blocks"));
    c.d_model = static_cast<int>(integer("net.d_model"));
    c.num_heads = static_cast<int>(integer("net.num_heads"));
    c.ff_width = static_cast<int>(integer("net.ff_width"));
    c.context_length = static_cast<int>(integer("data.context_length"));
    c.horizon = static_cast<int>(integer("data.horizon"));
    c.embedding_dim = static_cast<int>(integer("net.embedding_dim"));
    c.inter_series = parse_inter_series(str("net.inter_series"));
    c.inter_heads = static_cast<int>(integer("net.inter_heads"));
    c.inter_layers = static_cast<int>(integer("net.inter_layers"));
    std::string pe = str("net.positional_encoding");
    if (pe == "none")
      c.positional_encoding = PositionalEncoding::none;
    else if (pe == "sinusoidal")
      c.positional_encoding = PositionalEncoding::sinusoidal;
    else
      throw ConfigError("net.positional_encoding must be none or sinusoidal, got '" + pe + "'");
    c.use_date_features = boolean("net.date_features");
    c.dropout = number("net.dropout");
    c.activation = [&] {
      std::string a = str("net.activation");
      if (a == "relu") return Activation::relu;
      if (a == "gelu") return Activation::gelu;
      throw ConfigError("net.activation must be relu or gelu, got '" + a + "'");
    }();
    c.validate();
    return c;
  }

  TrainConfig training() const {
    TrainConfig c;
    c.learning_rate = number("train.learning_rate");
    c.plateau_factor = number("train.plateau_factor");
    c.plateau_patience = static_cast<int>(integer("train.plateau_patience"));
    c.min_delta = number("train.min_delta");
    c.batch_size = static_cast<int>(integer("train.batch_size"));
    c.epochs = static_cast<int>(integer("train.epochs"));
    c.seed = static_cast<std::uint64_t>(integer("train.seed"));
    c.loss = parse_loss(str("train.loss"));
    c.holdout = number("train.holdout");
    c.stride = static_cast<int>(integer("data.stride"));
    c.scaler_mode = parse_scaler_mode(str("data.scaler"));
    c.validate();
    return c;
  }

  std::vector<YearMonth> backtest_origins() const {
    std::vector<YearMonth> out;
    std::stringstream ss(str("backtest.origins"));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(YearMonth::parse(item));
    if (out.empty()) throw ConfigError("backtest.origins is empty");
    return out;
  }

  std::vector<HorizonBucket> buckets(int horizon) const {
    std::vector<HorizonBucket> out;
    std::stringstream ss(str("backtest.buckets"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto dash = item.find('-');
      if (dash == std::string::npos)
        throw ConfigError("backtest.buckets entry '" + item + "' is not lo-hi");
      HorizonBucket b;
      try {
        b.lo = std::stoi(item.substr(0, dash));
        b.hi = std::stoi(item.substr(dash + 1));
      } catch (...) {
        throw ConfigError("backtest.buckets entry '" + item + "' is not lo-hi");
      }
      if (b.lo > horizon) continue;  // drop buckets beyond the horizon
      b.hi = std::min(b.hi, horizon);
      out.push_back(b);
    }
    if (out.empty()) throw ConfigError("backtest.buckets leaves no bucket within horizon");
    validate_buckets(out, horizon);
    return out;
  }

 private:
  struct Entry {
    std::string value;
    bool required = false;
    bool is_set = false;
  };
  std::map<std::string, Entry> entries_;

  void add(const std::string& key, const std::string& def, bool required = false) {
    entries_[key] = Entry{def, required, false};
  }
};

}  // namespace istf
