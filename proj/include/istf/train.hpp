#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "istf/data.hpp"
#include "istf/network.hpp"
#include "istf/optimizer.hpp"

namespace istf {

enum class LossKind { mse, mae };

inline LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "mae") return LossKind::mae;
  throw ConfigError("unknown loss '" + s + "'");
}

struct TrainConfig {
  double learning_rate = 0.0015;
  double plateau_factor = 0.95;
  int plateau_patience = 25;
  double min_delta = 1e-5;
  int batch_size = 64;
  int epochs = 1000;
  std::uint64_t seed = 42;
  LossKind loss = LossKind::mse;
  double holdout = 0.0;  // fraction of windows used only for the scheduler
  int stride = 1;
  ScalerMode scaler_mode = ScalerMode::global_log1p_standardize;

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0) throw ConfigError("plateau_factor must be in (0,1)");
    if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (holdout < 0.0 || holdout >= 1.0) throw ConfigError("holdout must be in [0,1)");
    if (stride < 1) throw ConfigError("stride must be >= 1");
  }
};

// Mean loss over observed label steps, built on the tape so backward reaches
// every parameter.
inline Tensor window_loss(Graph& g, const Tensor& forecast, const WindowBatch& batch, LossKind kind) {
  int h = forecast.rows();
  Tensor labels({h, 1});
  Tensor mask({h, 1});
  int n_obs = 0;
  for (int i = 0; i < h; ++i) {
    labels(i, 0) = batch.labels[static_cast<size_t>(i)];
    bool obs = batch.label_observed[static_cast<size_t>(i)] != 0;
    mask(i, 0) = obs ? 1.0 : 0.0;
    n_obs += obs ? 1 : 0;
  }
  if (n_obs == 0) throw ContractError("window has no observed labels");
  Tensor diff = g.mul(g.sub(forecast, labels), mask);
  Tensor per_step = kind == LossKind::mse ? g.mul(diff, diff)
                                          : g.add(g.relu(diff), g.relu(g.scale(diff, -1.0)));
  return g.scale(g.sum(per_step), 1.0 / n_obs);
}

struct TrainResult {
  ModelState state;
  std::vector<double> loss_history;      // per-epoch mean training loss
  std::vector<double> lr_history;        // learning rate in effect per epoch
  std::vector<double> holdout_history;   // empty unless holdout > 0
};

// Multi-task training: shuffled mini-batches over every (series, origin)
// window, one shared parameter set, Adam with reduce-on-plateau.
inline TrainResult train(const SeriesPanel& panel, const NetworkConfig& net_cfg,
                         const TrainConfig& cfg, YearMonth train_end) {
  cfg.validate();
  net_cfg.validate();
  int base_year = panel.start.year;
  ScalerState scaler = ScalerState::fit(panel, train_end, cfg.scaler_mode);
  WindowSplit split;
  split.train_end = train_end;
  std::vector<WindowBatch> windows = make_windows(panel, scaler, net_cfg.context_length,
                                                  net_cfg.horizon, cfg.stride, split, base_year);
  if (windows.empty()) throw DataError("no training windows before " + train_end.str());

  FeatureSpec spec = FeatureSpec::from_panel(panel);
  TrainResult res;
  res.state = build_model(net_cfg, spec, scaler, base_year, cfg.seed);
  std::vector<Tensor> params = res.state.parameters();
  Adam opt(params, cfg.learning_rate);
  PlateauScheduler sched(cfg.plateau_factor, cfg.plateau_patience, cfg.min_delta);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<size_t> holdout_idx;
  if (cfg.holdout > 0.0) {
    std::shuffle(order.begin(), order.end(), rng);
    size_t n_hold = std::max<size_t>(1, static_cast<size_t>(cfg.holdout * windows.size()));
    if (n_hold >= order.size()) throw ConfigError("holdout fraction leaves no training windows");
    holdout_idx.assign(order.end() - static_cast<long>(n_hold), order.end());
    order.resize(order.size() - n_hold);
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      double inv = 1.0 / static_cast<double>(end - start);
      for (size_t i = start; i < end; ++i) {
        const WindowBatch& b = windows[order[i]];
        Graph g;
        ForwardResult fr = forward_graph(g, b, res.state, net_cfg.dropout > 0.0 ? &rng : nullptr);
        Tensor loss = window_loss(g, fr.forecast, b, cfg.loss);
        double lv = loss(0);
        if (!std::isfinite(lv))
          throw ContractError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                              std::to_string(start / static_cast<size_t>(cfg.batch_size) + 1) +
                              " (series " + b.series_id + ", origin " + b.origin.str() + ")");
        epoch_loss += lv;
        g.backward(g.scale(loss, inv));
      }
      opt.step();
    }
    epoch_loss /= static_cast<double>(order.size());
    res.loss_history.push_back(epoch_loss);

    double sched_loss = epoch_loss;
    if (!holdout_idx.empty()) {
      double hl = 0.0;
      for (size_t i : holdout_idx) {
        Graph g;
        ForwardResult fr = forward_graph(g, windows[i], res.state);
        hl += window_loss(g, fr.forecast, windows[i], cfg.loss)(0);
      }
      hl /= static_cast<double>(holdout_idx.size());
      res.holdout_history.push_back(hl);
      sched_loss = hl;
    }
    double mult = sched.observe(sched_loss);
    if (mult != 1.0) opt.set_learning_rate(opt.learning_rate() * mult);
    res.lr_history.push_back(opt.learning_rate());  // rate entering the next epoch
  }
  return res;
}

}  // namespace istf
