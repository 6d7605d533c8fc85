#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "istf/error.hpp"
#include "istf/tensor.hpp"

namespace istf {

struct MultiHeadConfig {
  int num_heads = 1;
  int d_model = 0;
  int d_k = 0;  // 0 = d_model / num_heads
  int d_v = 0;

  void resolve() {
    if (num_heads < 1 || d_model < 1) throw ConfigError("multi-head: heads and d_model must be positive");
    if (d_k == 0 || d_v == 0) {
      if (d_model % num_heads != 0)
        throw ConfigError("multi-head: d_model " + std::to_string(d_model) +
                          " not divisible by heads " + std::to_string(num_heads));
      if (d_k == 0) d_k = d_model / num_heads;
      if (d_v == 0) d_v = d_model / num_heads;
    }
  }
};

// Per-head projection matrices plus the output projection W_o (h*d_v × d_model).
struct MultiHeadParams {
  std::vector<Tensor> wq, wk, wv;
  Tensor wo;
};

struct AttentionResult {
  Tensor out;
  Tensor weights;  // a×b, rows are probability vectors
};

struct MultiHeadResult {
  Tensor out;
  std::vector<Tensor> head_weights;
};

// Boolean per-series mask; true = attendable.
struct SeriesMask {
  std::vector<uint8_t> attendable;

  int count() const {
    int c = 0;
    for (auto b : attendable) c += b ? 1 : 0;
    return c;
  }
};

// Scaled dot-product attention: softmax(q kᵀ / sqrt(d_k)) v, with masked key
// logits excluded before the softmax so masked keys get exactly zero weight.
// key_mask (length b) hides keys for every query row; attn_keep (a×b), when
// given, additionally masks per query row (causal masking).
inline AttentionResult attention(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v,
                                 const std::vector<uint8_t>* key_mask = nullptr,
                                 const std::vector<uint8_t>* attn_keep = nullptr) {
  if (q.cols() != k.cols())
    throw ShapeError("attention: q/k dim mismatch " + shape_str(q.shape()) + " vs " + shape_str(k.shape()));
  if (k.rows() != v.rows())
    throw ShapeError("attention: k/v row mismatch " + shape_str(k.shape()) + " vs " + shape_str(v.shape()));
  int a = q.rows(), b = k.rows();
  if (key_mask) {
    if (static_cast<int>(key_mask->size()) != b) throw ShapeError("attention: key mask length mismatch");
    bool any = false;
    for (auto m : *key_mask) any = any || m;
    if (!any) throw MaskError("attention: all keys masked");
  }
  double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor logits = g.scale(g.matmul(q, g.transpose(k)), scale);
  std::vector<uint8_t> keep(static_cast<size_t>(a) * b, 1);
  bool masked = false;
  if (key_mask) {
    masked = true;
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < b; ++j)
        if (!(*key_mask)[static_cast<size_t>(j)]) keep[static_cast<size_t>(i) * b + j] = 0;
  }
  if (attn_keep) {
    if (attn_keep->size() != keep.size()) throw ShapeError("attention: attn mask size mismatch");
    masked = true;
    for (size_t i = 0; i < keep.size(); ++i) keep[i] = keep[i] && (*attn_keep)[i];
  }
  Tensor weights = masked ? g.softmax_rows_masked(logits, &keep) : g.softmax_rows(logits);
  return {g.matmul(weights, v), weights};
}

// MultiHead(q,k,v) = concat(head_1..head_h) W_o, head_i = attention of the
// per-head projected q, k, v.
inline MultiHeadResult multi_head(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v,
                                  const MultiHeadConfig& cfg, const MultiHeadParams& params,
                                  const std::vector<uint8_t>* key_mask = nullptr,
                                  const std::vector<uint8_t>* attn_keep = nullptr) {
  if (q.cols() != cfg.d_model || k.cols() != cfg.d_model || v.cols() != cfg.d_model)
    throw ShapeError("multi_head: inputs must have last dim d_model=" + std::to_string(cfg.d_model));
  if (static_cast<int>(params.wq.size()) != cfg.num_heads)
    throw ShapeError("multi_head: expected " + std::to_string(cfg.num_heads) + " head projections");
  MultiHeadResult res;
  Tensor heads;
  for (int h = 0; h < cfg.num_heads; ++h) {
    AttentionResult ar = attention(g, g.matmul(q, params.wq[static_cast<size_t>(h)]),
                                   g.matmul(k, params.wk[static_cast<size_t>(h)]),
                                   g.matmul(v, params.wv[static_cast<size_t>(h)]), key_mask, attn_keep);
    res.head_weights.push_back(ar.weights);
    heads = h == 0 ? ar.out : g.concat_last_axis(heads, ar.out);
  }
  res.out = g.matmul(heads, params.wo);
  return res;
}

enum class InterSeriesMode { raw, projected };

struct InterSeriesResult {
  Tensor informed;  // 1×L
  Tensor weights;   // 1×m over series
};

// Inter-series attention: the target series' context window queries the
// context windows of all series. raw mode is a single head with no learned
// projections, scaled by sqrt(L); projected mode is multi-head with learned
// square L-dimensional projections.
inline InterSeriesResult inter_series_attention(Graph& g, const Tensor& target_ctx,
                                                const Tensor& panel, const SeriesMask& mask,
                                                InterSeriesMode mode,
                                                const MultiHeadParams* params = nullptr,
                                                int num_heads = 1) {
  if (target_ctx.rows() != 1)
    throw ShapeError("inter_series_attention: query must be a single context window row");
  if (target_ctx.cols() != panel.cols())
    throw ShapeError("inter_series_attention: context length mismatch, query " +
                     shape_str(target_ctx.shape()) + " vs panel " + shape_str(panel.shape()));
  if (static_cast<int>(mask.attendable.size()) != panel.rows())
    throw ShapeError("inter_series_attention: mask length vs panel rows");
  if (mask.count() == 0) throw MaskError("inter_series_attention: all series masked");
  if (mode == InterSeriesMode::raw) {
    AttentionResult ar = attention(g, target_ctx, panel, panel, &mask.attendable);
    return {ar.out, ar.weights};
  }
  if (!params) throw ContractError("inter_series_attention: projected mode needs parameters");
  MultiHeadConfig cfg;
  cfg.num_heads = num_heads;
  cfg.d_model = panel.cols();
  cfg.d_k = panel.cols();
  cfg.d_v = panel.cols();
  MultiHeadResult mh = multi_head(g, target_ctx, panel, panel, cfg, *params, &mask.attendable);
  // report the head-averaged weights for interpretability
  Tensor w = mh.head_weights[0];
  for (size_t h = 1; h < mh.head_weights.size(); ++h) w = g.add(w, mh.head_weights[h]);
  return {mh.out, g.scale(w, 1.0 / static_cast<double>(mh.head_weights.size()))};
}

}  // namespace istf
