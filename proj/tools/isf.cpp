// Command-line front end: generate / train / forecast / backtest / attention.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "istf/backtest.hpp"
#include "istf/config.hpp"
#include "istf/data.hpp"
#include "istf/network.hpp"
#include "istf/train.hpp"

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("ISF_LOG");
  if (!env) return LogLevel::info;
  std::string v = env;
  if (v == "error") return LogLevel::error;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  throw istf::ConfigError("ISF_LOG must be error, info or debug, got '" + v + "'");
}

void info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << msg << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw istf::IoError("cannot write '" + path + "'");
  return out;
}

istf::RunConfig load_config(const std::string& path, std::optional<long> seed_override) {
  istf::RunConfig cfg;
  if (!path.empty()) cfg.load(path);
  if (seed_override) {
    cfg.set("train.seed", std::to_string(*seed_override));
    cfg.set("synth.seed", std::to_string(*seed_override));
  }
  return cfg;
}

void echo_config(const istf::RunConfig& cfg) {
  if (log_level() >= LogLevel::debug) {
    std::cerr << "# effective config\n";
    cfg.echo(std::cerr);
  }
}

int cmd_generate(const istf::RunConfig& cfg, const std::string& out_path) {
  istf::SynthConfig sc = cfg.synth();
  istf::SeriesPanel panel = istf::generate_synthetic(sc);
  auto out = open_out(out_path);
  istf::write_panel_csv(panel, out);
  info("generated panel: " + std::to_string(sc.m) + " series x " + std::to_string(sc.months) +
       " months, seed " + std::to_string(sc.seed) + " -> " + out_path);
  return 0;
}

int cmd_train(const istf::RunConfig& cfg, const std::string& data_path, const std::string& out_path) {
  istf::SeriesPanel panel = istf::load_panel(data_path);
  istf::NetworkConfig net = cfg.network();
  istf::TrainConfig tc = cfg.training();
  istf::YearMonth train_end = istf::YearMonth::parse(cfg.str("data.train_end"));
  istf::TrainResult tr = istf::train(panel, net, tc, train_end);
  istf::save_state(tr.state, out_path);
  {
    auto out = open_out(out_path + ".loss.csv");
    out << "epoch,loss,learning_rate\n";
    for (size_t e = 0; e < tr.loss_history.size(); ++e)
      out << (e + 1) << ',' << tr.loss_history[e] << ',' << tr.lr_history[e] << '\n';
  }
  {
    auto out = open_out(out_path + ".config.txt");
    cfg.echo(out);
  }
  info("trained " + std::to_string(tr.state.parameter_count()) + " parameters over " +
       std::to_string(tr.loss_history.size()) + " epochs, final loss " +
       std::to_string(tr.loss_history.back()) + " -> " + out_path);
  return 0;
}

int cmd_forecast(const istf::RunConfig& cfg, const std::string& ckpt_path,
                 const std::string& data_path, const std::string& origin_str,
                 const std::string& out_path) {
  istf::ModelState model = istf::load_state(ckpt_path);
  istf::SeriesPanel panel = istf::load_panel(data_path);
  if (panel.covariate_names != model.spec.continuous)
    throw istf::SchemaError("panel covariates do not match the checkpoint's feature spec");
  for (const auto& s : panel.series) {
    if (model.spec.product_index(s.product_id) == istf::FeatureSpec::kUnknown)
      std::cerr << "warning: unseen product_id '" << s.product_id
                << "' mapped to the reserved embedding\n";
    if (model.spec.location_index(s.location_id) == istf::FeatureSpec::kUnknown)
      std::cerr << "warning: unseen location_id '" << s.location_id
                << "' mapped to the reserved embedding\n";
  }
  istf::YearMonth origin = istf::YearMonth::parse(origin_str);
  bool clip = cfg.boolean("forecast.clip_nonnegative");
  istf::EvalReport rep = istf::run_forecasts(model, panel, origin, clip);
  auto out = open_out(out_path);
  istf::write_forecast_csv(rep, origin, out);
  info("forecast " + std::to_string(rep.per_series.size()) + " series x " +
       std::to_string(model.config.horizon) + " steps from " + origin.str() + " -> " + out_path);
  return 0;
}

int cmd_backtest(const istf::RunConfig& cfg, const std::string& data_path,
                 const std::string& out_prefix) {
  istf::SeriesPanel panel = istf::load_panel(data_path);
  istf::NetworkConfig net = cfg.network();
  istf::TrainConfig tc = cfg.training();
  auto origins = cfg.backtest_origins();
  auto buckets = cfg.buckets(net.horizon);
  bool clip = cfg.boolean("forecast.clip_nonnegative");
  istf::BacktestResult res = istf::backtest(panel, net, tc, origins, buckets, clip);
  for (const auto& notice : res.notices) std::cerr << "notice: " << notice << '\n';
  for (const auto& rep : res.per_origin) {
    auto out = open_out(out_prefix + "_" + rep.origin.str() + ".csv");
    istf::write_report_csv(rep, out);
  }
  if (!res.per_origin.empty()) {
    auto out = open_out(out_prefix + "_average.csv");
    istf::write_report_csv(res.average, out, "average");
  }
  info("backtest: " + std::to_string(res.per_origin.size()) + " origins scored, " +
       std::to_string(res.notices.size()) + " skipped -> " + out_prefix + "_*.csv");
  return 0;
}

int cmd_attention(const std::string& ckpt_path, const std::string& data_path,
                  const std::string& origin_str, const std::string& out_path) {
  istf::ModelState model = istf::load_state(ckpt_path);
  istf::SeriesPanel panel = istf::load_panel(data_path);
  istf::YearMonth origin = istf::YearMonth::parse(origin_str);
  auto attention = istf::export_attention(model, panel, origin);
  std::vector<std::string> ids;
  for (const auto& s : panel.series) ids.push_back(s.series_id);
  auto out = open_out(out_path);
  istf::write_attention_csv(attention, ids, out);
  info("attention matrix " + std::to_string(attention.size()) + "x" +
       std::to_string(attention.size()) + " at " + origin.str() + " -> " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inter-series transformer forecasting engine"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, ckpt_path, origin;
  std::optional<long> seed;
  app.add_option("--config", config_path, "run configuration file (key = value lines)");
  app.add_option("--seed", seed, "override train.seed / synth.seed");
  app.add_option("--out", out_path, "output path (or prefix for backtest)");

  auto* gen = app.add_subcommand("generate", "write a synthetic panel CSV");
  gen->fallthrough();
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->fallthrough();
  train->add_option("--data", data_path, "panel CSV")->required();
  auto* forecast = app.add_subcommand("forecast", "forecast from a checkpoint");
  forecast->fallthrough();
  forecast->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  forecast->add_option("--data", data_path, "panel CSV")->required();
  forecast->add_option("--origin", origin, "first forecast month, YYYY-MM")->required();
  auto* backtest = app.add_subcommand("backtest", "sliding train/evaluate over configured origins");
  backtest->fallthrough();
  backtest->add_option("--data", data_path, "panel CSV")->required();
  auto* attention = app.add_subcommand("attention", "export the inter-series attention matrix");
  attention->fallthrough();
  attention->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  attention->add_option("--data", data_path, "panel CSV")->required();
  attention->add_option("--origin", origin, "origin month, YYYY-MM")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (out_path.empty()) throw istf::ConfigError("--out is required");
    istf::RunConfig cfg = load_config(config_path, seed);
    echo_config(cfg);
    if (gen->parsed()) return cmd_generate(cfg, out_path);
    if (train->parsed()) return cmd_train(cfg, data_path, out_path);
    if (forecast->parsed()) return cmd_forecast(cfg, ckpt_path, data_path, origin, out_path);
    if (backtest->parsed()) return cmd_backtest(cfg, data_path, out_path);
    if (attention->parsed()) return cmd_attention(ckpt_path, data_path, origin, out_path);
  } catch (const istf::Error& e) {
    std::cerr << "error:" << e.category() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error:internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
