#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "istf/error.hpp"

namespace istf {

// Calendar month with arithmetic on a flat month index.
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  int index() const { return year * 12 + (month - 1); }
  static YearMonth from_index(int idx) {
    YearMonth ym;
    ym.year = idx / 12;
    ym.month = idx % 12 + 1;
    return ym;
  }
  YearMonth plus(int months) const { return from_index(index() + months); }

  bool operator==(const YearMonth&) const = default;
  auto operator<=>(const YearMonth& o) const { return index() <=> o.index(); }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
  }

  static YearMonth parse(const std::string& s) {
    if (s.size() != 7 || s[4] != '-') throw DataError("malformed date '" + s + "', expected YYYY-MM");
    for (int i : {0, 1, 2, 3, 5, 6})
      if (!std::isdigit(static_cast<unsigned char>(s[static_cast<size_t>(i)])))
        throw DataError("malformed date '" + s + "', expected YYYY-MM");
    YearMonth ym;
    ym.year = std::stoi(s.substr(0, 4));
    ym.month = std::stoi(s.substr(5, 2));
    if (ym.month < 1 || ym.month > 12) throw DataError("month out of range in '" + s + "'");
    return ym;
  }
};

// One monthly series aligned to the panel's global date axis. Entries outside
// the series' observed range carry observed=false and target 0.
struct Series {
  std::string series_id;
  std::string product_id;
  std::string location_id;
  std::vector<double> target;
  std::vector<uint8_t> observed;
  std::map<std::string, std::vector<double>> covariates;
};

struct SeriesPanel {
  YearMonth start;
  int months = 0;
  std::vector<Series> series;
  std::vector<std::string> covariate_names;

  YearMonth date_at(int t) const { return start.plus(t); }
  int index_of(YearMonth ym) const { return ym.index() - start.index(); }
};

// Long-format CSV: series_id,product_id,location_id,date,target[,covariate...]
inline SeriesPanel load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open panel file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty panel file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const std::vector<std::string> fixed = {"series_id", "product_id", "location_id", "date", "target"};
  if (header.size() < fixed.size())
    throw DataError("panel header must start with series_id,product_id,location_id,date,target");
  for (size_t i = 0; i < fixed.size(); ++i)
    if (header[i] != fixed[i]) throw DataError("unexpected header column '" + header[i] + "'");
  std::vector<std::string> cov_names(header.begin() + 5, header.end());

  struct Row {
    std::string sid, pid, lid;
    YearMonth date;
    double target;
    std::vector<double> covs;
  };
  std::vector<Row> rows;
  std::map<std::pair<std::string, int>, int> seen;  // (series_id, date index) -> row number
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " columns, got " + std::to_string(cells.size()));
    Row r;
    r.sid = cells[0];
    r.pid = cells[1];
    r.lid = cells[2];
    try {
      r.date = YearMonth::parse(cells[3]);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      r.target = std::stod(cells[4]);
    } catch (...) {
      throw DataError("row " + std::to_string(lineno) + ": bad target '" + cells[4] + "'");
    }
    if (!std::isfinite(r.target) || r.target < 0.0)
      throw DataError("row " + std::to_string(lineno) + ": target must be finite and >= 0");
    for (size_t c = 5; c < cells.size(); ++c) {
      try {
        r.covs.push_back(std::stod(cells[c]));
      } catch (...) {
        throw DataError("row " + std::to_string(lineno) + ": bad covariate '" + cells[c] + "'");
      }
    }
    auto key = std::make_pair(r.sid, r.date.index());
    auto [it, fresh] = seen.emplace(key, lineno);
    if (!fresh)
      throw DataError("row " + std::to_string(lineno) + ": duplicate (series_id,date) (" + r.sid +
                      "," + r.date.str() + "), first seen at row " + std::to_string(it->second));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("panel file '" + path + "' has no data rows");

  int lo = rows[0].date.index(), hi = lo;
  for (const auto& r : rows) {
    lo = std::min(lo, r.date.index());
    hi = std::max(hi, r.date.index());
  }
  SeriesPanel panel;
  panel.start = YearMonth::from_index(lo);
  panel.months = hi - lo + 1;
  panel.covariate_names = cov_names;

  std::map<std::string, size_t> sidx;
  for (const auto& r : rows) {
    auto it = sidx.find(r.sid);
    if (it == sidx.end()) {
      Series s;
      s.series_id = r.sid;
      s.product_id = r.pid;
      s.location_id = r.lid;
      s.target.assign(static_cast<size_t>(panel.months), 0.0);
      s.observed.assign(static_cast<size_t>(panel.months), 0);
      for (const auto& cn : cov_names) s.covariates[cn].assign(static_cast<size_t>(panel.months), 0.0);
      it = sidx.emplace(r.sid, panel.series.size()).first;
      panel.series.push_back(std::move(s));
    }
    Series& s = panel.series[it->second];
    if (s.product_id != r.pid || s.location_id != r.lid)
      throw DataError("series '" + r.sid + "' has inconsistent product/location ids");
    size_t t = static_cast<size_t>(r.date.index() - lo);
    s.target[t] = r.target;
    s.observed[t] = 1;
    for (size_t c = 0; c < cov_names.size(); ++c) s.covariates[cov_names[c]][t] = r.covs[c];
  }
  std::sort(panel.series.begin(), panel.series.end(),
            [](const Series& a, const Series& b) { return a.series_id < b.series_id; });
  return panel;
}

inline void write_panel_csv(const SeriesPanel& panel, std::ostream& out) {
  out << "series_id,product_id,location_id,date,target";
  for (const auto& c : panel.covariate_names) out << ',' << c;
  out << '\n';
  char buf[64];
  for (const auto& s : panel.series) {
    for (int t = 0; t < panel.months; ++t) {
      if (!s.observed[static_cast<size_t>(t)]) continue;
      std::snprintf(buf, sizeof(buf), "%.10g", s.target[static_cast<size_t>(t)]);
      out << s.series_id << ',' << s.product_id << ',' << s.location_id << ','
          << panel.date_at(t).str() << ',' << buf;
      for (const auto& c : panel.covariate_names) {
        std::snprintf(buf, sizeof(buf), "%.10g", s.covariates.at(c)[static_cast<size_t>(t)]);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

enum class ScalerMode { global_log1p_standardize, per_series_standardize, none };

inline std::string scaler_mode_name(ScalerMode m) {
  switch (m) {
    case ScalerMode::global_log1p_standardize: return "global_log1p_standardize";
    case ScalerMode::per_series_standardize: return "per_series_standardize";
    case ScalerMode::none: return "none";
  }
  throw ContractError("unknown scaler mode");
}

inline ScalerMode parse_scaler_mode(const std::string& s) {
  if (s == "global_log1p_standardize") return ScalerMode::global_log1p_standardize;
  if (s == "per_series_standardize") return ScalerMode::per_series_standardize;
  if (s == "none") return ScalerMode::none;
  throw ConfigError("unknown scaler mode '" + s + "'");
}

// Target scaling fitted on training-range observations only.
struct ScalerState {
  ScalerMode mode = ScalerMode::global_log1p_standardize;
  double global_mean = 0.0;
  double global_std = 1.0;
  std::map<std::string, std::pair<double, double>> per_series;  // series_id -> (mean, std)

  static constexpr double kStdFloor = 1e-8;

  static ScalerState fit(const SeriesPanel& panel, YearMonth train_end, ScalerMode mode) {
    ScalerState st;
    st.mode = mode;
    if (mode == ScalerMode::none) return st;
    int end_t = std::min(panel.months - 1, panel.index_of(train_end));
    if (end_t < 0) throw DataError("scaler fit: no observations at or before " + train_end.str());
    if (mode == ScalerMode::global_log1p_standardize) {
      double sum = 0.0, sum2 = 0.0;
      long n = 0;
      for (const auto& s : panel.series)
        for (int t = 0; t <= end_t; ++t)
          if (s.observed[static_cast<size_t>(t)]) {
            double v = std::log1p(s.target[static_cast<size_t>(t)]);
            sum += v;
            sum2 += v * v;
            ++n;
          }
      if (n == 0) throw DataError("scaler fit: no observations at or before " + train_end.str());
      st.global_mean = sum / n;
      st.global_std = std::max(std::sqrt(std::max(0.0, sum2 / n - st.global_mean * st.global_mean)), kStdFloor);
    } else {
      long total = 0;
      for (const auto& s : panel.series) {
        double sum = 0.0, sum2 = 0.0;
        long n = 0;
        for (int t = 0; t <= end_t; ++t)
          if (s.observed[static_cast<size_t>(t)]) {
            double v = s.target[static_cast<size_t>(t)];
            sum += v;
            sum2 += v * v;
            ++n;
          }
        total += n;
        double mean = n ? sum / n : 0.0;
        double sd = n ? std::max(std::sqrt(std::max(0.0, sum2 / n - mean * mean)), kStdFloor) : 1.0;
        st.per_series[s.series_id] = {mean, sd};
      }
      if (total == 0) throw DataError("scaler fit: no observations at or before " + train_end.str());
    }
    return st;
  }

  double apply(double x, const std::string& series_id) const {
    switch (mode) {
      case ScalerMode::none: return x;
      case ScalerMode::global_log1p_standardize:
        return (std::log1p(x) - global_mean) / global_std;
      case ScalerMode::per_series_standardize: {
        auto it = per_series.find(series_id);
        if (it == per_series.end()) return x;  // unseen series passes through
        return (x - it->second.first) / it->second.second;
      }
    }
    throw ContractError("unknown scaler mode");
  }

  double invert(double y, const std::string& series_id) const {
    switch (mode) {
      case ScalerMode::none: return y;
      case ScalerMode::global_log1p_standardize:
        return std::expm1(y * global_std + global_mean);
      case ScalerMode::per_series_standardize: {
        auto it = per_series.find(series_id);
        if (it == per_series.end()) return y;
        return y * it->second.second + it->second.first;
      }
    }
    throw ContractError("unknown scaler mode");
  }
};

// One training/inference example: series q forecast from origin, with the
// scaled context windows of the whole panel for inter-series attention.
struct WindowBatch {
  int target_index = 0;
  std::string series_id;
  std::string product_id;
  std::string location_id;
  YearMonth origin;  // first forecast month
  std::vector<std::vector<double>> panel_ctx;  // m×L scaled, 0 where unobserved
  std::vector<uint8_t> series_mask;            // m; true = >=1 observation in window
  std::vector<double> target_ctx;              // L
  std::vector<uint8_t> target_ctx_observed;    // L
  std::vector<std::vector<double>> covariates; // L×F, raw covariate values
  std::vector<std::vector<double>> date_feats_ctx;     // L×2
  std::vector<std::vector<double>> date_feats_future;  // h×2
  std::vector<double> labels;            // h, scaled
  std::vector<uint8_t> label_observed;   // h
};

// feature 1 = ln(year - base_year + 1); feature 2 = (month-1)/11 - 0.5
inline std::vector<double> date_features(YearMonth ym, int base_year) {
  if (ym.year < base_year)
    throw ContractError("date " + ym.str() + " precedes feature base year " + std::to_string(base_year));
  return {std::log(static_cast<double>(ym.year - base_year + 1)),
          (ym.month - 1) / 11.0 - 0.5};
}

struct WindowSplit {
  std::optional<YearMonth> train_end;        // labels must end at or before this
  std::vector<YearMonth> eval_origins;       // explicit evaluation origins
};

// Emits one batch per (series, origin) with at least one observed label.
// Origins run over every context window fully inside the axis, stepped by
// `stride`; training origins are those whose last label date is <= train_end.
inline std::vector<WindowBatch> make_windows(const SeriesPanel& panel, const ScalerState& scaler,
                                             int L, int h, int stride, const WindowSplit& split,
                                             int base_year) {
  if (L < 1 || h < 1 || stride < 1) throw ConfigError("window sizes and stride must be positive");
  if (L + h > panel.months)
    throw ConfigError("context " + std::to_string(L) + " + horizon " + std::to_string(h) +
                      " exceeds axis length " + std::to_string(panel.months));
  int m = static_cast<int>(panel.series.size());

  std::vector<int> origin_ts;  // origin as offset on the axis
  if (!split.eval_origins.empty()) {
    for (YearMonth o : split.eval_origins) {
      int t = panel.index_of(o);
      if (t - L < 0 || t + h > panel.months)
        throw ConfigError("eval origin " + o.str() + " leaves no full context or label window");
      origin_ts.push_back(t);
    }
  } else {
    for (int t = L; t + h <= panel.months; t += stride) {
      if (split.train_end) {
        YearMonth last_label = panel.date_at(t + h - 1);
        if (last_label > *split.train_end) break;
      }
      origin_ts.push_back(t);
    }
  }

  std::vector<WindowBatch> out;
  for (int t : origin_ts) {
    // shared scaled panel context for this origin
    std::vector<std::vector<double>> panel_ctx(static_cast<size_t>(m),
                                               std::vector<double>(static_cast<size_t>(L), 0.0));
    std::vector<uint8_t> series_mask(static_cast<size_t>(m), 0);
    for (int s = 0; s < m; ++s) {
      const Series& sr = panel.series[static_cast<size_t>(s)];
      for (int i = 0; i < L; ++i) {
        size_t ti = static_cast<size_t>(t - L + i);
        if (sr.observed[ti]) {
          panel_ctx[static_cast<size_t>(s)][static_cast<size_t>(i)] =
              scaler.apply(sr.target[ti], sr.series_id);
          series_mask[static_cast<size_t>(s)] = 1;
        }
      }
    }
    std::vector<std::vector<double>> dctx, dfut;
    for (int i = 0; i < L; ++i) dctx.push_back(date_features(panel.date_at(t - L + i), base_year));
    for (int i = 0; i < h; ++i) dfut.push_back(date_features(panel.date_at(t + i), base_year));

    for (int q = 0; q < m; ++q) {
      const Series& sr = panel.series[static_cast<size_t>(q)];
      WindowBatch b;
      b.target_index = q;
      b.series_id = sr.series_id;
      b.product_id = sr.product_id;
      b.location_id = sr.location_id;
      b.origin = panel.date_at(t);
      b.panel_ctx = panel_ctx;
      b.series_mask = series_mask;
      b.target_ctx = panel_ctx[static_cast<size_t>(q)];
      b.target_ctx_observed.assign(sr.observed.begin() + (t - L), sr.observed.begin() + t);
      for (int i = 0; i < L; ++i) {
        std::vector<double> row;
        for (const auto& cn : panel.covariate_names)
          row.push_back(sr.covariates.at(cn)[static_cast<size_t>(t - L + i)]);
        b.covariates.push_back(std::move(row));
      }
      b.date_feats_ctx = dctx;
      b.date_feats_future = dfut;
      bool any_label = false;
      for (int i = 0; i < h; ++i) {
        size_t ti = static_cast<size_t>(t + i);
        bool obs = sr.observed[ti] != 0;
        b.labels.push_back(obs ? scaler.apply(sr.target[ti], sr.series_id) : 0.0);
        b.label_observed.push_back(obs ? 1 : 0);
        any_label = any_label || obs;
      }
      if (!any_label || !series_mask[static_cast<size_t>(q)]) continue;
      out.push_back(std::move(b));
    }
  }
  return out;
}

// Batches for pure inference at one origin: labels stay empty, and the
// origin may sit one step past the end of the axis.
inline std::vector<WindowBatch> make_inference_windows(const SeriesPanel& panel,
                                                       const ScalerState& scaler, int L, int h,
                                                       YearMonth origin, int base_year) {
  int t = panel.index_of(origin);
  if (t - L < 0 || t > panel.months)
    throw ConfigError("origin " + origin.str() + " leaves no full context window");
  int m = static_cast<int>(panel.series.size());
  std::vector<std::vector<double>> panel_ctx(static_cast<size_t>(m),
                                             std::vector<double>(static_cast<size_t>(L), 0.0));
  std::vector<uint8_t> series_mask(static_cast<size_t>(m), 0);
  for (int s = 0; s < m; ++s) {
    const Series& sr = panel.series[static_cast<size_t>(s)];
    for (int i = 0; i < L; ++i) {
      size_t ti = static_cast<size_t>(t - L + i);
      if (sr.observed[ti]) {
        panel_ctx[static_cast<size_t>(s)][static_cast<size_t>(i)] = scaler.apply(sr.target[ti], sr.series_id);
        series_mask[static_cast<size_t>(s)] = 1;
      }
    }
  }
  std::vector<std::vector<double>> dctx, dfut;
  for (int i = 0; i < L; ++i) dctx.push_back(date_features(panel.date_at(t - L + i), base_year));
  for (int i = 0; i < h; ++i) dfut.push_back(date_features(panel.date_at(t + i), base_year));

  std::vector<WindowBatch> out;
  for (int q = 0; q < m; ++q) {
    if (!series_mask[static_cast<size_t>(q)]) continue;
    const Series& sr = panel.series[static_cast<size_t>(q)];
    WindowBatch b;
    b.target_index = q;
    b.series_id = sr.series_id;
    b.product_id = sr.product_id;
    b.location_id = sr.location_id;
    b.origin = origin;
    b.panel_ctx = panel_ctx;
    b.series_mask = series_mask;
    b.target_ctx = panel_ctx[static_cast<size_t>(q)];
    b.target_ctx_observed.assign(sr.observed.begin() + (t - L), sr.observed.begin() + t);
    for (int i = 0; i < L; ++i) {
      std::vector<double> row;
      for (const auto& cn : panel.covariate_names)
        row.push_back(sr.covariates.at(cn)[static_cast<size_t>(t - L + i)]);
      b.covariates.push_back(std::move(row));
    }
    b.date_feats_ctx = dctx;
    b.date_feats_future = dfut;
    out.push_back(std::move(b));
  }
  return out;
}

struct SynthConfig {
  int m = 8;
  int months = 48;
  std::uint64_t seed = 1;
  YearMonth start{2015, 1};
  double level_min = 20.0, level_max = 120.0;
  double trend_min = -0.5, trend_max = 0.8;
  double season_amp = 15.0;  // per-series amplitude drawn from [0, season_amp]
  double noise_std = 2.0;
  double zero_prob = 0.0;
  // gamma[i][j] = effect of series j's previous-month demand on series i
  std::vector<std::vector<double>> gamma;
};

// y_i,t = max(0, level + trend*t + amp*sin(2*pi*t/12 + phase)
//             + sum_j gamma[i][j]*y_j,t-1 + noise), then zero-inflated.
inline SeriesPanel generate_synthetic(const SynthConfig& cfg) {
  if (cfg.m < 1 || cfg.months < 1) throw ConfigError("synthetic panel needs m >= 1 and months >= 1");
  if (cfg.zero_prob < 0.0 || cfg.zero_prob > 1.0) throw ConfigError("zero_prob must be in [0,1]");
  if (!cfg.gamma.empty()) {
    if (static_cast<int>(cfg.gamma.size()) != cfg.m)
      throw ConfigError("gamma matrix must be m x m");
    for (int i = 0; i < cfg.m; ++i) {
      if (static_cast<int>(cfg.gamma[static_cast<size_t>(i)].size()) != cfg.m)
        throw ConfigError("gamma matrix must be m x m");
      if (cfg.gamma[static_cast<size_t>(i)][static_cast<size_t>(i)] != 0.0)
        throw ConfigError("gamma diagonal must be zero");
    }
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> ulevel(cfg.level_min, cfg.level_max);
  std::uniform_real_distribution<double> utrend(cfg.trend_min, cfg.trend_max);
  std::uniform_real_distribution<double> uamp(0.0, cfg.season_amp);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * 3.14159265358979323846);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> uzero(0.0, 1.0);

  std::vector<double> level(static_cast<size_t>(cfg.m)), trend(static_cast<size_t>(cfg.m)),
      amp(static_cast<size_t>(cfg.m)), phase(static_cast<size_t>(cfg.m));
  for (int i = 0; i < cfg.m; ++i) {
    level[static_cast<size_t>(i)] = ulevel(rng);
    trend[static_cast<size_t>(i)] = utrend(rng);
    amp[static_cast<size_t>(i)] = uamp(rng);
    phase[static_cast<size_t>(i)] = uphase(rng);
  }

  SeriesPanel panel;
  panel.start = cfg.start;
  panel.months = cfg.months;
  for (int i = 0; i < cfg.m; ++i) {
    Series s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "S%03d", i);
    s.series_id = buf;
    std::snprintf(buf, sizeof(buf), "P%03d", i);
    s.product_id = buf;
    s.location_id = "L000";
    s.target.assign(static_cast<size_t>(cfg.months), 0.0);
    s.observed.assign(static_cast<size_t>(cfg.months), 1);
    panel.series.push_back(std::move(s));
  }
  std::vector<double> prev(static_cast<size_t>(cfg.m), 0.0);
  for (int t = 0; t < cfg.months; ++t) {
    std::vector<double> cur(static_cast<size_t>(cfg.m));
    for (int i = 0; i < cfg.m; ++i) {
      double y = level[static_cast<size_t>(i)] + trend[static_cast<size_t>(i)] * t +
                 amp[static_cast<size_t>(i)] *
                     std::sin(2.0 * 3.14159265358979323846 * t / 12.0 + phase[static_cast<size_t>(i)]);
      if (!cfg.gamma.empty() && t > 0)
        for (int j = 0; j < cfg.m; ++j) y += cfg.gamma[static_cast<size_t>(i)][static_cast<size_t>(j)] * prev[static_cast<size_t>(j)];
      y += cfg.noise_std * noise(rng);
      if (cfg.zero_prob > 0.0 && uzero(rng) < cfg.zero_prob) y = 0.0;
      cur[static_cast<size_t>(i)] = std::max(0.0, y);
      panel.series[static_cast<size_t>(i)].target[static_cast<size_t>(t)] = cur[static_cast<size_t>(i)];
    }
    prev = cur;
  }
  return panel;
}

}  // namespace istf
