#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "istf/data.hpp"
#include "istf/metrics.hpp"
#include "istf/network.hpp"
#include "istf/train.hpp"

namespace istf {

struct HorizonBucket {
  int lo = 1;  // 1-based forecast steps, inclusive
  int hi = 1;
};

inline std::vector<HorizonBucket> default_buckets(int horizon) {
  std::vector<HorizonBucket> all = {{1, 3}, {4, 12}, {13, 24}};
  std::vector<HorizonBucket> out;
  for (auto b : all)
    if (b.lo <= horizon) out.push_back({b.lo, std::min(b.hi, horizon)});
  return out;
}

inline void validate_buckets(const std::vector<HorizonBucket>& buckets, int horizon) {
  std::vector<uint8_t> used(static_cast<size_t>(horizon), 0);
  for (auto b : buckets) {
    if (b.lo < 1 || b.hi > horizon || b.lo > b.hi)
      throw ConfigError("bucket " + std::to_string(b.lo) + "-" + std::to_string(b.hi) +
                        " out of range for horizon " + std::to_string(horizon));
    for (int s = b.lo; s <= b.hi; ++s) {
      if (used[static_cast<size_t>(s - 1)])
        throw ConfigError("bucket ranges overlap at step " + std::to_string(s));
      used[static_cast<size_t>(s - 1)] = 1;
    }
  }
}

struct BucketMetrics {
  HorizonBucket bucket;
  double wmape = std::nan("");
  double rmse = std::nan("");
  double rmsse = std::nan("");
  double wbias = std::nan("");
  int rmsse_excluded = 0;  // series with constant history
};

struct SeriesForecast {
  std::string series_id;
  std::vector<double> forecast;  // h unscaled values
  std::vector<double> actual;
  std::vector<uint8_t> observed;
};

struct EvalReport {
  YearMonth origin;
  std::vector<std::string> series_ids;
  std::vector<BucketMetrics> buckets;
  std::vector<SeriesForecast> per_series;
  std::vector<std::vector<double>> attention;  // m×m, row q = weights when forecasting q
};

// Forecast every eligible series at `origin` and return unscaled forecasts
// plus the inter-series attention matrix.
inline EvalReport run_forecasts(ModelState& model, const SeriesPanel& panel, YearMonth origin,
                                bool clip_nonnegative = true) {
  const NetworkConfig& cfg = model.config;
  auto batches = make_inference_windows(panel, model.scaler, cfg.context_length, cfg.horizon, origin,
                                        model.base_year);
  int m = static_cast<int>(panel.series.size());
  EvalReport rep;
  rep.origin = origin;
  for (const auto& s : panel.series) rep.series_ids.push_back(s.series_id);
  rep.attention.assign(static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(m), 0.0));
  int t0 = panel.index_of(origin);
  for (auto& b : batches) {
    Graph g;
    ForwardResult fr = forward_graph(g, b, model);
    SeriesForecast sf;
    sf.series_id = b.series_id;
    for (int i = 0; i < cfg.horizon; ++i) {
      double v = model.scaler.invert(fr.forecast(i, 0), b.series_id);
      if (clip_nonnegative) v = std::max(0.0, v);
      sf.forecast.push_back(v);
      int t = t0 + i;
      const Series& sr = panel.series[static_cast<size_t>(b.target_index)];
      bool obs = t >= 0 && t < panel.months && sr.observed[static_cast<size_t>(t)];
      sf.actual.push_back(obs ? sr.target[static_cast<size_t>(t)] : 0.0);
      sf.observed.push_back(obs ? 1 : 0);
    }
    if (fr.inter_weights.defined())
      for (int j = 0; j < m; ++j)
        rep.attention[static_cast<size_t>(b.target_index)][static_cast<size_t>(j)] = fr.inter_weights(0, j);
    rep.per_series.push_back(std::move(sf));
  }
  return rep;
}

// Scores the forecasts of `rep` per horizon bucket, in unscaled space.
// Volumes for wBias are summed observed actuals strictly before the origin.
inline void score_report(EvalReport& rep, const SeriesPanel& panel,
                         const std::vector<HorizonBucket>& buckets) {
  int t0 = panel.index_of(rep.origin);
  std::map<std::string, const Series*> by_id;
  for (const auto& s : panel.series) by_id[s.series_id] = &s;

  for (auto bucket : buckets) {
    BucketMetrics bm;
    bm.bucket = bucket;
    std::vector<double> a, f;
    std::vector<uint8_t> mask;
    std::vector<double> a_means, f_means, volumes;
    std::vector<double> rmsse_vals;
    for (const auto& sf : rep.per_series) {
      double asum = 0.0, fsum = 0.0;
      int n = 0;
      for (int s = bucket.lo; s <= bucket.hi; ++s) {
        size_t i = static_cast<size_t>(s - 1);
        a.push_back(sf.actual[i]);
        f.push_back(sf.forecast[i]);
        mask.push_back(sf.observed[i]);
        if (sf.observed[i]) {
          asum += sf.actual[i];
          fsum += sf.forecast[i];
          ++n;
        }
      }
      const Series* sr = by_id.at(sf.series_id);
      double vol = 0.0;
      std::vector<double> history;
      for (int t = 0; t < std::min(t0, panel.months); ++t)
        if (sr->observed[static_cast<size_t>(t)]) {
          vol += sr->target[static_cast<size_t>(t)];
          history.push_back(sr->target[static_cast<size_t>(t)]);
        }
      if (n > 0) {
        a_means.push_back(asum / n);
        f_means.push_back(fsum / n);
        volumes.push_back(vol);
        std::vector<double> ba(sf.actual.begin() + (bucket.lo - 1), sf.actual.begin() + bucket.hi);
        std::vector<double> bf(sf.forecast.begin() + (bucket.lo - 1), sf.forecast.begin() + bucket.hi);
        std::vector<uint8_t> bo(sf.observed.begin() + (bucket.lo - 1), sf.observed.begin() + bucket.hi);
        try {
          rmsse_vals.push_back(rmsse(history, ba, bf, bo));
        } catch (const MetricError&) {
          ++bm.rmsse_excluded;
        }
      }
    }
    try {
      bm.wmape = wmape(a, f, mask);
    } catch (const MetricError&) {
    }
    try {
      bm.rmse = rmse(a, f, mask);
    } catch (const MetricError&) {
    }
    if (!rmsse_vals.empty()) {
      double s = 0.0;
      for (double v : rmsse_vals) s += v;
      bm.rmsse = s / static_cast<double>(rmsse_vals.size());  // unweighted mean across series
    }
    try {
      bm.wbias = wbias(a_means, f_means, volumes);
    } catch (const MetricError&) {
    }
    rep.buckets.push_back(bm);
  }
}

inline EvalReport evaluate(ModelState& model, const SeriesPanel& panel, YearMonth origin,
                           const std::vector<HorizonBucket>& buckets, bool clip_nonnegative = true) {
  validate_buckets(buckets, model.config.horizon);
  EvalReport rep = run_forecasts(model, panel, origin, clip_nonnegative);
  score_report(rep, panel, buckets);
  return rep;
}

struct BacktestResult {
  std::vector<EvalReport> per_origin;
  EvalReport average;                // bucket metrics averaged over origins
  std::vector<std::string> notices;  // skipped origins etc.
};

// Sliding evaluation: for each origin, fit the scaler and train a fresh model
// on data strictly before the origin, then forecast and score.
inline BacktestResult backtest(const SeriesPanel& panel, const NetworkConfig& net_cfg,
                               const TrainConfig& train_cfg, const std::vector<YearMonth>& origins,
                               const std::vector<HorizonBucket>& buckets,
                               bool clip_nonnegative = true) {
  validate_buckets(buckets, net_cfg.horizon);
  BacktestResult res;
  for (YearMonth origin : origins) {
    YearMonth train_end = origin.plus(-1);
    int t = panel.index_of(origin);
    int min_hist = net_cfg.context_length + net_cfg.horizon;
    if (t < min_hist) {
      res.notices.push_back("origin " + origin.str() + " skipped: needs " + std::to_string(min_hist) +
                            " months of history, has " + std::to_string(std::max(0, t)));
      continue;
    }
    TrainResult tr;
    try {
      tr = train(panel, net_cfg, train_cfg, train_end);
    } catch (const DataError& e) {
      res.notices.push_back("origin " + origin.str() + " skipped: " + e.what());
      continue;
    }
    res.per_origin.push_back(evaluate(tr.state, panel, origin, buckets, clip_nonnegative));
  }
  if (!res.per_origin.empty()) {
    res.average.series_ids = res.per_origin.front().series_ids;
    for (size_t bi = 0; bi < buckets.size(); ++bi) {
      BucketMetrics avg;
      avg.bucket = buckets[bi];
      double w = 0, r = 0, rs = 0, wb = 0;
      int nw = 0, nr = 0, nrs = 0, nwb = 0;
      for (const auto& rep : res.per_origin) {
        const BucketMetrics& bm = rep.buckets[bi];
        if (!std::isnan(bm.wmape)) { w += bm.wmape; ++nw; }
        if (!std::isnan(bm.rmse)) { r += bm.rmse; ++nr; }
        if (!std::isnan(bm.rmsse)) { rs += bm.rmsse; ++nrs; }
        if (!std::isnan(bm.wbias)) { wb += bm.wbias; ++nwb; }
        avg.rmsse_excluded += bm.rmsse_excluded;
      }
      if (nw) avg.wmape = w / nw;
      if (nr) avg.rmse = r / nr;
      if (nrs) avg.rmsse = rs / nrs;
      if (nwb) avg.wbias = wb / nwb;
      res.average.buckets.push_back(avg);
    }
  }
  return res;
}

// Row q = inter-series attention weights observed when forecasting series q.
inline std::vector<std::vector<double>> export_attention(ModelState& model, const SeriesPanel& panel,
                                                         YearMonth origin) {
  if (model.config.inter_series == InterSeriesSetting::off)
    throw ContractError("attention export: inter-series layer is disabled in this model");
  return run_forecasts(model, panel, origin).attention;
}

// ---- CSV writers ---------------------------------------------------------

inline void write_forecast_csv(const EvalReport& rep, YearMonth origin, std::ostream& out) {
  out << "series_id,origin,step,target_date,forecast\n";
  char buf[64];
  for (const auto& sf : rep.per_series)
    for (size_t i = 0; i < sf.forecast.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.10g", sf.forecast[i]);
      out << sf.series_id << ',' << origin.str() << ',' << (i + 1) << ','
          << origin.plus(static_cast<int>(i)).str() << ',' << buf << '\n';
    }
}

inline void write_report_csv(const EvalReport& rep, std::ostream& out, const std::string& origin_label = "") {
  out << "origin,bucket,metric,value\n";
  std::string origin = origin_label.empty() ? rep.origin.str() : origin_label;
  char buf[64];
  for (const auto& bm : rep.buckets) {
    std::string bucket = std::to_string(bm.bucket.lo) + "-" + std::to_string(bm.bucket.hi);
    auto emit = [&](const char* name, double v) {
      if (std::isnan(v)) return;
      std::snprintf(buf, sizeof(buf), "%.10g", v);
      out << origin << ',' << bucket << ',' << name << ',' << buf << '\n';
    };
    emit("wmape", bm.wmape);
    emit("rmse", bm.rmse);
    emit("rmsse", bm.rmsse);
    emit("wbias", bm.wbias);
  }
}

inline void write_attention_csv(const std::vector<std::vector<double>>& attention,
                                const std::vector<std::string>& series_ids, std::ostream& out) {
  out << "series_id";
  for (const auto& id : series_ids) out << ',' << id;
  out << '\n';
  char buf[64];
  for (size_t i = 0; i < attention.size(); ++i) {
    out << series_ids[i];
    for (double v : attention[i]) {
      std::snprintf(buf, sizeof(buf), "%.10g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace istf
