#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "istf/attention.hpp"
#include "istf/data.hpp"
#include "istf/error.hpp"
#include "istf/tensor.hpp"

namespace istf {

enum class InterSeriesSetting { off, raw, projected };
enum class PositionalEncoding { none, sinusoidal };
enum class Activation { relu, gelu };

inline std::string inter_series_name(InterSeriesSetting s) {
  switch (s) {
    case InterSeriesSetting::off: return "off";
    case InterSeriesSetting::raw: return "raw";
    case InterSeriesSetting::projected: return "projected";
  }
  throw ContractError("unknown inter-series setting");
}

inline InterSeriesSetting parse_inter_series(const std::string& s) {
  if (s == "off") return InterSeriesSetting::off;
  if (s == "raw") return InterSeriesSetting::raw;
  if (s == "projected") return InterSeriesSetting::projected;
  throw ConfigError("unknown inter-series mode '" + s + "'");
}

struct NetworkConfig {
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int d_model = 128;
  int num_heads = 4;
  int ff_width = 0;  // 0 = 4*d_model
  int context_length = 24;
  int horizon = 12;
  int embedding_dim = 6;
  InterSeriesSetting inter_series = InterSeriesSetting::raw;
  int inter_heads = 1;
  int inter_layers = 1;
  PositionalEncoding positional_encoding = PositionalEncoding::none;
  bool use_date_features = true;
  double dropout = 0.0;
  Activation activation = Activation::relu;

  int ffw() const { return ff_width > 0 ? ff_width : 4 * d_model; }

  void validate() const {
    if (encoder_blocks < 1 || decoder_blocks < 1 || d_model < 1 || num_heads < 1 ||
        context_length < 1 || horizon < 1 || embedding_dim < 1 || inter_heads < 1 || inter_layers < 1)
      throw ConfigError("network config values must be positive");
    if (d_model % num_heads != 0)
      throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by num_heads " +
                        std::to_string(num_heads));
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  }
};

// Vocabularies map identifier text to embedding row; row 0 is reserved for
// identifiers unseen at training time.
struct FeatureSpec {
  std::vector<std::string> continuous;  // covariate names, ordered
  std::vector<std::string> product_vocab;   // index i+1 -> product_vocab[i]
  std::vector<std::string> location_vocab;

  static constexpr int kUnknown = 0;

  int product_index(const std::string& id) const {
    for (size_t i = 0; i < product_vocab.size(); ++i)
      if (product_vocab[i] == id) return static_cast<int>(i) + 1;
    return kUnknown;
  }
  int location_index(const std::string& id) const {
    for (size_t i = 0; i < location_vocab.size(); ++i)
      if (location_vocab[i] == id) return static_cast<int>(i) + 1;
    return kUnknown;
  }

  static FeatureSpec from_panel(const SeriesPanel& panel) {
    FeatureSpec spec;
    spec.continuous = panel.covariate_names;
    for (const auto& s : panel.series) {
      if (std::find(spec.product_vocab.begin(), spec.product_vocab.end(), s.product_id) ==
          spec.product_vocab.end())
        spec.product_vocab.push_back(s.product_id);
      if (std::find(spec.location_vocab.begin(), spec.location_vocab.end(), s.location_id) ==
          spec.location_vocab.end())
        spec.location_vocab.push_back(s.location_id);
    }
    return spec;
  }
};

// The single shared parameter set serving every series, plus everything
// needed to reproduce preprocessing at inference time.
struct ModelState {
  NetworkConfig config;
  FeatureSpec spec;
  ScalerState scaler;
  int base_year = 0;
  std::map<std::string, Tensor> params;  // ordered: deterministic iteration

  Tensor& p(const std::string& path) {
    auto it = params.find(path);
    if (it == params.end()) throw ContractError("unknown parameter path '" + path + "'");
    return it->second;
  }
  const Tensor& p(const std::string& path) const {
    auto it = params.find(path);
    if (it == params.end()) throw ContractError("unknown parameter path '" + path + "'");
    return it->second;
  }

  std::vector<Tensor> parameters() {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (auto& [k, v] : params) out.push_back(v);
    return out;
  }

  long parameter_count() const {
    long n = 0;
    for (const auto& [k, v] : params) n += v.size();
    return n;
  }

  int continuous_width_encoder() const {
    int c = 1 + static_cast<int>(spec.continuous.size());
    if (config.use_date_features) c += 2;
    if (config.inter_series != InterSeriesSetting::off) c += 1;
    return c;
  }
  int continuous_width_decoder() const {
    return 1 + (config.use_date_features ? 2 : 0);
  }
};

namespace detail {

inline void add_mha_params(ModelState& st, const std::string& prefix, int d_model, int heads,
                           std::mt19937_64& rng) {
  int dk = d_model / heads;
  for (int h = 0; h < heads; ++h) {
    std::string hp = prefix + ".h" + std::to_string(h);
    st.params[hp + ".wq"] = glorot_uniform(d_model, dk, rng);
    st.params[hp + ".wk"] = glorot_uniform(d_model, dk, rng);
    st.params[hp + ".wv"] = glorot_uniform(d_model, dk, rng);
  }
  st.params[prefix + ".wo"] = glorot_uniform(heads * dk, d_model, rng);
}

inline MultiHeadParams mha_params(const ModelState& st, const std::string& prefix, int heads) {
  MultiHeadParams p;
  for (int h = 0; h < heads; ++h) {
    std::string hp = prefix + ".h" + std::to_string(h);
    p.wq.push_back(st.p(hp + ".wq"));
    p.wk.push_back(st.p(hp + ".wk"));
    p.wv.push_back(st.p(hp + ".wv"));
  }
  p.wo = st.p(prefix + ".wo");
  return p;
}

inline void add_norm(ModelState& st, const std::string& prefix, int d) {
  Tensor gain({d}, true);
  for (double& v : gain.values()) v = 1.0;
  st.params[prefix + ".gain"] = gain;
  st.params[prefix + ".bias"] = Tensor({d}, true);
}

inline void add_embed_block(ModelState& st, const std::string& prefix, int cont_width, int d_model,
                            int emb_dim, std::mt19937_64& rng) {
  st.params[prefix + ".w1"] = glorot_uniform(cont_width, d_model, rng);
  st.params[prefix + ".b1"] = Tensor({d_model}, true);
  st.params[prefix + ".w2"] = glorot_uniform(d_model + 2 * emb_dim, d_model, rng);
  st.params[prefix + ".b2"] = Tensor({d_model}, true);
}

}  // namespace detail

// Parameters are created in a fixed order from a single seeded stream, so a
// (config, spec, seed) triple always yields the same model.
inline ModelState build_model(const NetworkConfig& config, const FeatureSpec& spec,
                              const ScalerState& scaler, int base_year, std::uint64_t seed) {
  config.validate();
  ModelState st;
  st.config = config;
  st.spec = spec;
  st.scaler = scaler;
  st.base_year = base_year;
  std::mt19937_64 rng(seed);

  int e = config.embedding_dim;
  st.params["embed.product.table"] =
      embedding_table(static_cast<int>(spec.product_vocab.size()) + 1, e, rng);
  st.params["embed.location.table"] =
      embedding_table(static_cast<int>(spec.location_vocab.size()) + 1, e, rng);

  detail::add_embed_block(st, "enc_in", st.continuous_width_encoder(), config.d_model, e, rng);
  detail::add_embed_block(st, "dec_in", st.continuous_width_decoder(), config.d_model, e, rng);

  if (config.inter_series == InterSeriesSetting::projected) {
    int L = config.context_length;
    for (int layer = 0; layer < config.inter_layers; ++layer) {
      std::string prefix = "inter." + std::to_string(layer);
      for (int h = 0; h < config.inter_heads; ++h) {
        std::string hp = prefix + ".h" + std::to_string(h);
        st.params[hp + ".wq"] = glorot_uniform(L, L, rng);
        st.params[hp + ".wk"] = glorot_uniform(L, L, rng);
        st.params[hp + ".wv"] = glorot_uniform(L, L, rng);
      }
      st.params[prefix + ".wo"] = glorot_uniform(config.inter_heads * L, L, rng);
    }
  }

  for (int b = 0; b < config.encoder_blocks; ++b) {
    std::string prefix = "enc." + std::to_string(b);
    detail::add_mha_params(st, prefix + ".attn", config.d_model, config.num_heads, rng);
    detail::add_norm(st, prefix + ".ln1", config.d_model);
    st.params[prefix + ".ff.w1"] = glorot_uniform(config.d_model, config.ffw(), rng);
    st.params[prefix + ".ff.b1"] = Tensor({config.ffw()}, true);
    st.params[prefix + ".ff.w2"] = glorot_uniform(config.ffw(), config.d_model, rng);
    st.params[prefix + ".ff.b2"] = Tensor({config.d_model}, true);
    detail::add_norm(st, prefix + ".ln2", config.d_model);
  }
  for (int b = 0; b < config.decoder_blocks; ++b) {
    std::string prefix = "dec." + std::to_string(b);
    detail::add_mha_params(st, prefix + ".self", config.d_model, config.num_heads, rng);
    detail::add_norm(st, prefix + ".ln1", config.d_model);
    detail::add_mha_params(st, prefix + ".cross", config.d_model, config.num_heads, rng);
    detail::add_norm(st, prefix + ".ln2", config.d_model);
    st.params[prefix + ".ff.w1"] = glorot_uniform(config.d_model, config.ffw(), rng);
    st.params[prefix + ".ff.b1"] = Tensor({config.ffw()}, true);
    st.params[prefix + ".ff.w2"] = glorot_uniform(config.ffw(), config.d_model, rng);
    st.params[prefix + ".ff.b2"] = Tensor({config.d_model}, true);
    detail::add_norm(st, prefix + ".ln3", config.d_model);
  }
  st.params["head.w"] = glorot_uniform(config.d_model, 1, rng);
  st.params["head.b"] = Tensor({1}, true);
  return st;
}

namespace detail {

inline Tensor sinusoidal_encoding(int positions, int d_model, int offset) {
  Tensor pe({positions, d_model});
  for (int pos = 0; pos < positions; ++pos)
    for (int i = 0; i < d_model; ++i) {
      double angle = (pos + offset) / std::pow(10000.0, 2.0 * (i / 2) / d_model);
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

// Continuous block -> linear projection, concat with the two ID embeddings,
// project to d_model.
inline Tensor embed_block(Graph& g, ModelState& st, const std::string& prefix, const Tensor& cont,
                          int product_idx, int location_idx) {
  int n = cont.rows();
  if (cont.cols() != st.p(prefix + ".w1").rows())
    throw SchemaError("feature width " + std::to_string(cont.cols()) + " does not match model (" +
                      std::to_string(st.p(prefix + ".w1").rows()) + " expected)");
  Tensor proj = g.add_bias_rows(g.matmul(cont, st.p(prefix + ".w1")), st.p(prefix + ".b1"));
  Tensor pe = g.broadcast_rows(g.select_row(st.p("embed.product.table"), product_idx), n);
  Tensor le = g.broadcast_rows(g.select_row(st.p("embed.location.table"), location_idx), n);
  Tensor cat = g.concat_last_axis(g.concat_last_axis(proj, pe), le);
  return g.add_bias_rows(g.matmul(cat, st.p(prefix + ".w2")), st.p(prefix + ".b2"));
}

inline Tensor activation(Graph& g, Activation a, const Tensor& x) {
  return a == Activation::relu ? g.relu(x) : g.gelu(x);
}

inline Tensor feed_forward(Graph& g, ModelState& st, const std::string& prefix, const Tensor& x) {
  Tensor h = activation(g, st.config.activation,
                        g.add_bias_rows(g.matmul(x, st.p(prefix + ".w1")), st.p(prefix + ".b1")));
  return g.add_bias_rows(g.matmul(h, st.p(prefix + ".w2")), st.p(prefix + ".b2"));
}

inline Tensor maybe_dropout(Graph& g, const Tensor& x, double rate, std::mt19937_64* rng) {
  if (rate > 0.0 && rng) return g.dropout(x, rate, *rng);
  return x;
}

}  // namespace detail

struct ForwardResult {
  Tensor forecast;                    // h×1, scaled space
  Tensor inter_weights;               // 1×m; undefined when the layer is off
  std::vector<Tensor> encoder_attn;   // per block, head-0 weights
  std::vector<Tensor> decoder_self_attn;
  std::vector<Tensor> decoder_cross_attn;
};

// Full forward pass for one window. `rng` is only consulted when dropout is
// configured; inference passes nullptr and is deterministic.
inline ForwardResult forward_graph(Graph& g, const WindowBatch& batch, ModelState& st,
                                   std::mt19937_64* rng = nullptr) {
  const NetworkConfig& cfg = st.config;
  int L = cfg.context_length, h = cfg.horizon;
  if (static_cast<int>(batch.target_ctx.size()) != L)
    throw ShapeError("batch context length " + std::to_string(batch.target_ctx.size()) +
                     " does not match configured L=" + std::to_string(L));
  if (static_cast<int>(batch.labels.size()) != 0 && static_cast<int>(batch.labels.size()) != h)
    throw ShapeError("batch horizon " + std::to_string(batch.labels.size()) +
                     " does not match configured h=" + std::to_string(h));
  if (static_cast<int>(batch.date_feats_future.size()) < h)
    throw ShapeError("batch future covariates cover " + std::to_string(batch.date_feats_future.size()) +
                     " steps, horizon is " + std::to_string(h));
  if (static_cast<int>(batch.covariates.size()) == L) {
    for (const auto& row : batch.covariates)
      if (row.size() != st.spec.continuous.size())
        throw SchemaError("covariate count " + std::to_string(row.size()) + " does not match spec (" +
                          std::to_string(st.spec.continuous.size()) + ")");
  }

  ForwardResult res;

  // 1. inter-series attention over the scaled panel context
  Tensor x_is;
  if (cfg.inter_series != InterSeriesSetting::off) {
    Tensor pq = Tensor::matrix(1, L, std::vector<double>(batch.target_ctx.begin(), batch.target_ctx.end()));
    Tensor panel = Tensor::from_rows(batch.panel_ctx);
    SeriesMask mask{batch.series_mask};
    if (cfg.inter_series == InterSeriesSetting::raw) {
      InterSeriesResult ir = inter_series_attention(g, pq, panel, mask, InterSeriesMode::raw);
      x_is = ir.informed;
      res.inter_weights = ir.weights;
    } else {
      Tensor cur = pq;
      for (int layer = 0; layer < cfg.inter_layers; ++layer) {
        MultiHeadParams mp = detail::mha_params(st, "inter." + std::to_string(layer), cfg.inter_heads);
        InterSeriesResult ir = inter_series_attention(g, cur, panel, mask, InterSeriesMode::projected,
                                                      &mp, cfg.inter_heads);
        cur = ir.informed;
        res.inter_weights = ir.weights;
      }
      x_is = cur;
    }
  }

  // 2. encoder input: [target, covariates, date features, x_is] per step
  int prod_idx = st.spec.product_index(batch.product_id);
  int loc_idx = st.spec.location_index(batch.location_id);

  std::vector<std::vector<double>> cont_rows(static_cast<size_t>(L));
  for (int t = 0; t < L; ++t) {
    auto& row = cont_rows[static_cast<size_t>(t)];
    row.push_back(batch.target_ctx[static_cast<size_t>(t)]);
    if (!batch.covariates.empty())
      for (double v : batch.covariates[static_cast<size_t>(t)]) row.push_back(v);
    if (cfg.use_date_features)
      for (double v : batch.date_feats_ctx[static_cast<size_t>(t)]) row.push_back(v);
  }
  Tensor cont = Tensor::from_rows(cont_rows);
  if (cfg.inter_series != InterSeriesSetting::off)
    cont = g.concat_last_axis(cont, g.transpose(x_is));

  Tensor enc = detail::embed_block(g, st, "enc_in", cont, prod_idx, loc_idx);
  if (cfg.positional_encoding == PositionalEncoding::sinusoidal)
    enc = g.add(enc, detail::sinusoidal_encoding(L, cfg.d_model, 0));

  MultiHeadConfig mhc;
  mhc.num_heads = cfg.num_heads;
  mhc.d_model = cfg.d_model;
  mhc.resolve();

  // 3. encoder stack
  for (int b = 0; b < cfg.encoder_blocks; ++b) {
    std::string prefix = "enc." + std::to_string(b);
    MultiHeadParams mp = detail::mha_params(st, prefix + ".attn", cfg.num_heads);
    MultiHeadResult mh = multi_head(g, enc, enc, enc, mhc, mp);
    res.encoder_attn.push_back(mh.head_weights[0]);
    Tensor a = detail::maybe_dropout(g, mh.out, cfg.dropout, rng);
    enc = g.layer_norm(g.add(enc, a), st.p(prefix + ".ln1.gain"), st.p(prefix + ".ln1.bias"));
    Tensor f = detail::maybe_dropout(g, detail::feed_forward(g, st, prefix + ".ff", enc), cfg.dropout, rng);
    enc = g.layer_norm(g.add(enc, f), st.p(prefix + ".ln2.gain"), st.p(prefix + ".ln2.bias"));
  }

  // 4. decoder over h future steps (known covariates only, target channel 0)
  std::vector<std::vector<double>> dec_rows(static_cast<size_t>(h));
  for (int t = 0; t < h; ++t) {
    auto& row = dec_rows[static_cast<size_t>(t)];
    row.push_back(0.0);
    if (cfg.use_date_features)
      for (double v : batch.date_feats_future[static_cast<size_t>(t)]) row.push_back(v);
  }
  Tensor dec = detail::embed_block(g, st, "dec_in", Tensor::from_rows(dec_rows), prod_idx, loc_idx);
  if (cfg.positional_encoding == PositionalEncoding::sinusoidal)
    dec = g.add(dec, detail::sinusoidal_encoding(h, cfg.d_model, L));

  std::vector<uint8_t> causal(static_cast<size_t>(h) * h, 0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j <= i; ++j) causal[static_cast<size_t>(i) * h + j] = 1;

  for (int b = 0; b < cfg.decoder_blocks; ++b) {
    std::string prefix = "dec." + std::to_string(b);
    MultiHeadParams sp = detail::mha_params(st, prefix + ".self", cfg.num_heads);
    MultiHeadResult sh = multi_head(g, dec, dec, dec, mhc, sp, nullptr, &causal);
    res.decoder_self_attn.push_back(sh.head_weights[0]);
    Tensor a = detail::maybe_dropout(g, sh.out, cfg.dropout, rng);
    dec = g.layer_norm(g.add(dec, a), st.p(prefix + ".ln1.gain"), st.p(prefix + ".ln1.bias"));
    MultiHeadParams cp = detail::mha_params(st, prefix + ".cross", cfg.num_heads);
    MultiHeadResult ch = multi_head(g, dec, enc, enc, mhc, cp);
    res.decoder_cross_attn.push_back(ch.head_weights[0]);
    Tensor c = detail::maybe_dropout(g, ch.out, cfg.dropout, rng);
    dec = g.layer_norm(g.add(dec, c), st.p(prefix + ".ln2.gain"), st.p(prefix + ".ln2.bias"));
    Tensor f = detail::maybe_dropout(g, detail::feed_forward(g, st, prefix + ".ff", dec), cfg.dropout, rng);
    dec = g.layer_norm(g.add(dec, f), st.p(prefix + ".ln3.gain"), st.p(prefix + ".ln3.bias"));
  }

  // 5. scalar head per decoder step
  res.forecast = g.add_bias_rows(g.matmul(dec, st.p("head.w")), st.p("head.b"));
  return res;
}

inline std::vector<double> forward(const WindowBatch& batch, ModelState& st) {
  Graph g;
  ForwardResult r = forward_graph(g, batch, st);
  return r.forecast.values();
}

// ---- checkpoint container ------------------------------------------------
// magic, version, length-prefixed JSON metadata, then named tensors as
// (path length, path, rank, dims, raw little-endian doubles).

namespace detail {

constexpr char kMagic[4] = {'I', 'S', 'F', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint file");
  return v;
}

inline nlohmann::json config_to_json(const NetworkConfig& c) {
  return {{"encoder_blocks", c.encoder_blocks},
          {"decoder_blocks", c.decoder_blocks},
          {"d_model", c.d_model},
          {"num_heads", c.num_heads},
          {"ff_width", c.ff_width},
          {"context_length", c.context_length},
          {"horizon", c.horizon},
          {"embedding_dim", c.embedding_dim},
          {"inter_series", inter_series_name(c.inter_series)},
          {"inter_heads", c.inter_heads},
          {"inter_layers", c.inter_layers},
          {"positional_encoding", c.positional_encoding == PositionalEncoding::none ? "none" : "sinusoidal"},
          {"use_date_features", c.use_date_features},
          {"dropout", c.dropout},
          {"activation", c.activation == Activation::relu ? "relu" : "gelu"}};
}

inline NetworkConfig config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.encoder_blocks = j.at("encoder_blocks");
  c.decoder_blocks = j.at("decoder_blocks");
  c.d_model = j.at("d_model");
  c.num_heads = j.at("num_heads");
  c.ff_width = j.at("ff_width");
  c.context_length = j.at("context_length");
  c.horizon = j.at("horizon");
  c.embedding_dim = j.at("embedding_dim");
  c.inter_series = parse_inter_series(j.at("inter_series"));
  c.inter_heads = j.at("inter_heads");
  c.inter_layers = j.at("inter_layers");
  c.positional_encoding = j.at("positional_encoding") == "none" ? PositionalEncoding::none
                                                                : PositionalEncoding::sinusoidal;
  c.use_date_features = j.at("use_date_features");
  c.dropout = j.at("dropout");
  c.activation = j.at("activation") == "relu" ? Activation::relu : Activation::gelu;
  return c;
}

}  // namespace detail

inline void save_state(const ModelState& st, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(detail::kMagic, 4);
  detail::write_pod(out, detail::kVersion);

  nlohmann::json meta;
  meta["config"] = detail::config_to_json(st.config);
  meta["spec"] = {{"continuous", st.spec.continuous},
                  {"product_vocab", st.spec.product_vocab},
                  {"location_vocab", st.spec.location_vocab}};
  nlohmann::json scaler;
  scaler["mode"] = scaler_mode_name(st.scaler.mode);
  scaler["global_mean"] = st.scaler.global_mean;
  scaler["global_std"] = st.scaler.global_std;
  nlohmann::json ps = nlohmann::json::object();
  for (const auto& [k, v] : st.scaler.per_series) ps[k] = {v.first, v.second};
  scaler["per_series"] = ps;
  meta["scaler"] = scaler;
  meta["base_year"] = st.base_year;
  std::string meta_str = meta.dump();
  detail::write_pod(out, static_cast<std::uint64_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  detail::write_pod(out, static_cast<std::uint32_t>(st.params.size()));
  for (const auto& [k, t] : st.params) {
    detail::write_pod(out, static_cast<std::uint32_t>(k.size()));
    out.write(k.data(), static_cast<std::streamsize>(k.size()));
    detail::write_pod(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) detail::write_pod(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.size())));
  }
  if (!out) throw IoError("write failure on checkpoint '" + path + "'");
}

inline ModelState load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kMagic, 4) != 0)
    throw CheckpointError("'" + path + "' is not a checkpoint file (bad magic)");
  std::uint32_t version = detail::read_pod<std::uint32_t>(in);
  if (version != detail::kVersion)
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version) +
                          " (expected " + std::to_string(detail::kVersion) + ")");
  std::uint64_t meta_len = detail::read_pod<std::uint64_t>(in);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw CheckpointError("truncated checkpoint metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
  }

  ModelState st;
  try {
    st.config = detail::config_from_json(meta.at("config"));
    st.spec.continuous = meta.at("spec").at("continuous").get<std::vector<std::string>>();
    st.spec.product_vocab = meta.at("spec").at("product_vocab").get<std::vector<std::string>>();
    st.spec.location_vocab = meta.at("spec").at("location_vocab").get<std::vector<std::string>>();
    st.scaler.mode = parse_scaler_mode(meta.at("scaler").at("mode"));
    st.scaler.global_mean = meta.at("scaler").at("global_mean");
    st.scaler.global_std = meta.at("scaler").at("global_std");
    for (auto& [k, v] : meta.at("scaler").at("per_series").items())
      st.scaler.per_series[k] = {v[0], v[1]};
    st.base_year = meta.at("base_year");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("incomplete checkpoint metadata: ") + e.what());
  }

  std::uint32_t count = detail::read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t klen = detail::read_pod<std::uint32_t>(in);
    std::string key(klen, '\0');
    in.read(key.data(), klen);
    if (!in) throw CheckpointError("truncated checkpoint tensor name");
    std::uint32_t rank = detail::read_pod<std::uint32_t>(in);
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d)
      shape.push_back(static_cast<int>(detail::read_pod<std::uint32_t>(in)));
    Tensor t(shape, true);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.size())));
    if (!in) throw CheckpointError("truncated tensor data for '" + key + "'");
    st.params[key] = t;
  }
  return st;
}

}  // namespace istf
