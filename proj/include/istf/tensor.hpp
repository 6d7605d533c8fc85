#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "istf/error.hpp"

namespace istf {

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

namespace detail {

struct TensorData {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
};

}  // namespace detail

// Dense row-major tensor of doubles with shared-node identity: copies alias
// the same storage, which is what the autodiff tape relies on.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : d_(std::make_shared<detail::TensorData>()) {
    int n = 1;
    for (int s : shape) {
      if (s <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
      n *= s;
    }
    d_->shape = std::move(shape);
    d_->data.assign(static_cast<size_t>(n), 0.0);
    d_->requires_grad = requires_grad;
  }

  static Tensor scalar(double v) {
    Tensor t({1});
    t(0) = v;
    return t;
  }

  static Tensor vec(std::vector<double> v, bool requires_grad = false) {
    Tensor t({static_cast<int>(v.size())}, requires_grad);
    t.d_->data = std::move(v);
    return t;
  }

  static Tensor matrix(int rows, int cols, std::vector<double> v, bool requires_grad = false) {
    if (static_cast<int>(v.size()) != rows * cols)
      throw ShapeError("matrix data length does not match " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    Tensor t({rows, cols}, requires_grad);
    t.d_->data = std::move(v);
    return t;
  }

  static Tensor from_rows(const std::vector<std::vector<double>>& rows, bool requires_grad = false) {
    if (rows.empty()) throw ShapeError("from_rows: empty row list");
    Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())}, requires_grad);
    double* p = t.data();
    for (const auto& r : rows) {
      if (r.size() != rows[0].size()) throw ShapeError("from_rows: ragged rows");
      p = std::copy(r.begin(), r.end(), p);
    }
    return t;
  }

  bool defined() const { return static_cast<bool>(d_); }
  const std::vector<int>& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  int size() const { return static_cast<int>(d_->data.size()); }

  // Logical 2-D view; rank-1 tensors are treated as a single row.
  int rows() const {
    if (rank() == 1) return 1;
    if (rank() == 2) return d_->shape[0];
    throw ShapeError("rows() on rank-" + std::to_string(rank()) + " tensor");
  }
  int cols() const {
    if (rank() == 1) return d_->shape[0];
    if (rank() == 2) return d_->shape[1];
    throw ShapeError("cols() on rank-" + std::to_string(rank()) + " tensor");
  }

  double* data() { return d_->data.data(); }
  const double* data() const { return d_->data.data(); }
  std::vector<double>& values() { return d_->data; }
  const std::vector<double>& values() const { return d_->data; }

  double& operator()(int i) { return d_->data[static_cast<size_t>(i)]; }
  double operator()(int i) const { return d_->data[static_cast<size_t>(i)]; }
  double& operator()(int i, int j) { return d_->data[static_cast<size_t>(i) * cols() + j]; }
  double operator()(int i, int j) const { return d_->data[static_cast<size_t>(i) * cols() + j]; }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool rg) {
    d_->requires_grad = rg;
    return *this;
  }

  bool has_grad() const { return !d_->grad.empty(); }
  // Tensor is a shared handle; grad access mutates the shared node, so these
  // are callable on const handles (same as shared_ptr).
  std::vector<double>& grad() const {
    if (d_->grad.empty()) d_->grad.assign(d_->data.size(), 0.0);
    return d_->grad;
  }
  void zero_grad() const {
    if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
  }
  void clear_grad() const { d_->grad.clear(); }

  bool same_node(const Tensor& o) const { return d_ == o.d_; }
  std::shared_ptr<detail::TensorData> node() const { return d_; }

  bool all_finite() const {
    for (double v : d_->data)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::shared_ptr<detail::TensorData> d_;
};

// Parameter initializers. Seeded by the caller so model construction is
// reproducible end to end.
inline Tensor glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t({fan_in, fan_out}, true);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Tensor embedding_table(int vocab, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Tensor t({vocab, dim}, true);
  for (double& v : t.values()) v = n(rng);
  return t;
}

// Define-by-run tape. Ops compute eagerly and, when any input requires a
// gradient, append a backward closure. Appending after inputs exist keeps the
// tape topologically ordered; backward() walks it once in reverse.
class Graph {
 public:
  Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
      throw ShapeError("matmul requires rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
    if (a.cols() != b.rows())
      throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < m; ++i) {
      double* orow = po + static_cast<size_t>(i) * n;
      for (int l = 0; l < k; ++l) {
        double av = pa[static_cast<size_t>(i) * k + l];
        if (av == 0.0) continue;
        const double* brow = pb + static_cast<size_t>(l) * n;
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
    if (track(out, {a, b})) {
      record([a, b, out, m, k, n]() mutable {
        if (!out.has_grad()) return;
        const double* go = out.grad().data();
        if (a.requires_grad()) {
          double* ga = a.grad().data();
          const double* pb = b.data();
          for (int i = 0; i < m; ++i)
            for (int l = 0; l < k; ++l) {
              double s = 0.0;
              const double* gorow = go + static_cast<size_t>(i) * n;
              const double* brow = pb + static_cast<size_t>(l) * n;
              for (int j = 0; j < n; ++j) s += gorow[j] * brow[j];
              ga[static_cast<size_t>(i) * k + l] += s;
            }
        }
        if (b.requires_grad()) {
          double* gb = b.grad().data();
          const double* pa = a.data();
          for (int l = 0; l < k; ++l)
            for (int i = 0; i < m; ++i) {
              double av = pa[static_cast<size_t>(i) * k + l];
              if (av == 0.0) continue;
              const double* gorow = go + static_cast<size_t>(i) * n;
              double* gbrow = gb + static_cast<size_t>(l) * n;
              for (int j = 0; j < n; ++j) gbrow[j] += av * gorow[j];
            }
        }
      });
    }
    return out;
  }

  Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose requires rank-2, got " + shape_str(a.shape()));
    int m = a.rows(), n = a.cols();
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out(j, i) = a(i, j);
    if (track(out, {a})) {
      record([a, out, m, n]() mutable {
        if (!out.has_grad() || !a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& go = out.grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) ga[static_cast<size_t>(i) * n + j] += go[static_cast<size_t>(j) * m + i];
      });
    }
    return out;
  }

  Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, +1.0); }
  Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, -1.0); }

  Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out(i) = a(i) * b(i);
    if (track(out, {a, b})) {
      record([a, b, out]() mutable {
        if (!out.has_grad()) return;
        const auto& go = out.grad();
        if (a.requires_grad()) {
          auto& ga = a.grad();
          for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * b(static_cast<int>(i));
        }
        if (b.requires_grad()) {
          auto& gb = b.grad();
          for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * a(static_cast<int>(i));
        }
      });
    }
    return out;
  }

  Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out(i) = a(i) * c;
    if (track(out, {a})) {
      record([a, out, c]() mutable {
        if (!out.has_grad() || !a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& go = out.grad();
        for (size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
      });
    }
    return out;
  }

  Tensor relu(const Tensor& a) {
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out(i) = a(i) > 0.0 ? a(i) : 0.0;
    if (track(out, {a})) {
      record([a, out]() mutable {
        if (!out.has_grad() || !a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& go = out.grad();
        for (size_t i = 0; i < go.size(); ++i)
          if (a(static_cast<int>(i)) > 0.0) ga[i] += go[i];
      });
    }
    return out;
  }

  Tensor gelu(const Tensor& a) {
    // tanh approximation
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) {
      double x = a(i);
      out(i) = 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
    }
    if (track(out, {a})) {
      record([a, out]() mutable {
        if (!out.has_grad() || !a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& go = out.grad();
        for (size_t i = 0; i < go.size(); ++i) {
          double x = a(static_cast<int>(i));
          double u = c * (x + 0.044715 * x * x * x);
          double t = std::tanh(u);
          double du = c * (1.0 + 3.0 * 0.044715 * x * x);
          ga[i] += go[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
        }
      });
    }
    return out;
  }

  Tensor log1p(const Tensor& a) {
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out(i) = std::log1p(a(i));
    if (track(out, {a})) {
      record([a, out]() mutable {
        if (!out.has_grad() || !a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& go = out.grad();
        for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / (1.0 + a(static_cast<int>(i)));
      });
    }
    return out;
  }

  // Concatenate along the last axis. Rank-1 inputs give a rank-1 output.
  Tensor concat_last_axis(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank()) throw ShapeError("concat_last_axis: rank mismatch");
    if (a.rank() == 1) {
      Tensor out({a.size() + b.size()});
      std::copy(b.values().begin(), b.values().end(),
                std::copy(a.values().begin(), a.values().end(), out.values().begin()));
      if (track(out, {a, b})) {
        record([a, b, out]() mutable {
          if (!out.has_grad()) return;
          const auto& go = out.grad();
          if (a.requires_grad()) {
            auto& ga = a.grad();
            for (int i = 0; i < a.size(); ++i) ga[i] += go[i];
          }
          if (b.requires_grad()) {
            auto& gb = b.grad();
            for (int i = 0; i < b.size(); ++i) gb[i] += go[a.size() + i];
          }
        });
      }
      return out;
    }
    if (a.rank() != 2 || a.rows() != b.rows())
      throw ShapeError("concat_last_axis: incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
    int m = a.rows(), ca = a.cols(), cb = b.cols();
    Tensor out({m, ca + cb});
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < ca; ++j) out(i, j) = a(i, j);
      for (int j = 0; j < cb; ++j) out(i, ca + j) = b(i, j);
    }
    if (track(out, {a, b})) {
      record([a, b, out, m, ca, cb]() mutable {
        if (!out.has_grad()) return;
        const auto& go = out.grad();
        int co = ca + cb;
        if (a.requires_grad()) {
          auto& ga = a.grad();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < ca; ++j) ga[static_cast<size_t>(i) * ca + j] += go[static_cast<size_t>(i) * co + j];
        }
        if (b.requires_grad()) {
          auto& gb = b.grad();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < cb; ++j)
              gb[static_cast<size_t>(i) * cb + j] += go[static_cast<size_t>(i) * co + ca + j];
        }
      });
    }
    return out;
  }

  // x: n×d plus a length-d vector broadcast over rows.
  Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
    if (bias.rank() != 1 || bias.size() != x.cols())
      throw ShapeError("add_bias_rows: bias " + shape_str(bias.shape()) + " vs x " +
                       shape_str(x.shape()));
    Tensor out(x.shape());
    int m = x.rows(), n = x.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.values()[static_cast<size_t>(i) * n + j] = x.values()[static_cast<size_t>(i) * n + j] + bias(j);
    if (track(out, {x, bias})) {
      record([x, bias, out, m, n]() mutable {
        if (!out.has_grad()) return;
        const auto& go = out.grad();
        if (x.requires_grad()) {
          auto& gx = x.grad();
          for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        }
        if (bias.requires_grad()) {
          auto& gb = bias.grad();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) gb[j] += go[static_cast<size_t>(i) * n + j];
        }
      });
    }
    return out;
  }

  // Repeat a length-d vector (or 1×d row) n times into an n×d matrix.
  Tensor broadcast_rows(const Tensor& v, int n) {
    if (v.rows() != 1) throw ShapeError("broadcast_rows expects a single row, got " + shape_str(v.shape()));
    int d = v.cols();
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out(i, j) = v(0, j);
    if (track(out, {v})) {
      record([v, out, n, d]() mutable {
        if (!out.has_grad() || !v.requires_grad()) return;
        auto& gv = v.grad();
        const auto& go = out.grad();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < d; ++j) gv[j] += go[static_cast<size_t>(i) * d + j];
      });
    }
    return out;
  }

  // Select one row of a matrix as a 1×d tensor (embedding lookup).
  Tensor select_row(const Tensor& m, int row) {
    if (m.rank() != 2 || row < 0 || row >= m.rows())
      throw ShapeError("select_row: row " + std::to_string(row) + " of " + shape_str(m.shape()));
    int d = m.cols();
    Tensor out({1, d});
    for (int j = 0; j < d; ++j) out(0, j) = m(row, j);
    if (track(out, {m})) {
      record([m, out, row, d]() mutable {
        if (!out.has_grad() || !m.requires_grad()) return;
        auto& gm = m.grad();
        const auto& go = out.grad();
        for (int j = 0; j < d; ++j) gm[static_cast<size_t>(row) * d + j] += go[j];
      });
    }
    return out;
  }

  Tensor softmax_rows(const Tensor& x) { return softmax_rows_masked(x, nullptr); }

  // keep[i*cols+j] == 0 disables logit (i,j): its weight is exactly zero and
  // it receives no gradient. keep == nullptr keeps everything.
  Tensor softmax_rows_masked(const Tensor& x, const std::vector<uint8_t>* keep) {
    int m = x.rows(), n = x.cols();
    if (keep && static_cast<int>(keep->size()) != m * n)
      throw ShapeError("softmax mask size mismatch");
    Tensor out(x.shape());
    std::vector<uint8_t> mask = keep ? *keep : std::vector<uint8_t>(static_cast<size_t>(m) * n, 1);
    for (int i = 0; i < m; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      int alive = 0;
      for (int j = 0; j < n; ++j)
        if (mask[static_cast<size_t>(i) * n + j]) {
          mx = std::max(mx, x.values()[static_cast<size_t>(i) * n + j]);
          ++alive;
        }
      if (alive == 0) throw MaskError("softmax row " + std::to_string(i) + " fully masked");
      double z = 0.0;
      for (int j = 0; j < n; ++j) {
        size_t idx = static_cast<size_t>(i) * n + j;
        double e = mask[idx] ? std::exp(x.values()[idx] - mx) : 0.0;
        out.values()[idx] = e;
        z += e;
      }
      for (int j = 0; j < n; ++j) out.values()[static_cast<size_t>(i) * n + j] /= z;
    }
    if (track(out, {x})) {
      record([x, out, m, n]() mutable {
        if (!out.has_grad() || !x.requires_grad()) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        const auto& s = out.values();
        for (int i = 0; i < m; ++i) {
          double dot = 0.0;
          for (int j = 0; j < n; ++j) {
            size_t idx = static_cast<size_t>(i) * n + j;
            dot += go[idx] * s[idx];
          }
          for (int j = 0; j < n; ++j) {
            size_t idx = static_cast<size_t>(i) * n + j;
            gx[idx] += s[idx] * (go[idx] - dot);
          }
        }
      });
    }
    return out;
  }

  // Normalize each row to mean 0 / variance 1 (population variance), then
  // apply gain and bias over the last axis.
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-6) {
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    int m = x.rows(), d = x.cols();
    if (gain.size() != d || bias.size() != d)
      throw ShapeError("layer_norm: gain/bias length " + std::to_string(gain.size()) + "," +
                       std::to_string(bias.size()) + " vs d=" + std::to_string(d));
    Tensor out(x.shape());
    Tensor xhat({m, d});  // cached for backward
    std::vector<double> inv_std(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      const double* xr = x.data() + static_cast<size_t>(i) * d;
      double mu = std::accumulate(xr, xr + d, 0.0) / d;
      double var = 0.0;
      for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
      var /= d;
      double is = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<size_t>(i)] = is;
      for (int j = 0; j < d; ++j) {
        double xh = (xr[j] - mu) * is;
        xhat(i, j) = xh;
        out.values()[static_cast<size_t>(i) * d + j] = gain(j) * xh + bias(j);
      }
    }
    if (track(out, {x, gain, bias})) {
      record([x, gain, bias, out, xhat, inv_std, m, d]() mutable {
        if (!out.has_grad()) return;
        const auto& go = out.grad();
        for (int i = 0; i < m; ++i) {
          const double* gor = go.data() + static_cast<size_t>(i) * d;
          if (gain.requires_grad()) {
            auto& gg = gain.grad();
            for (int j = 0; j < d; ++j) gg[j] += gor[j] * xhat(i, j);
          }
          if (bias.requires_grad()) {
            auto& gb = bias.grad();
            for (int j = 0; j < d; ++j) gb[j] += gor[j];
          }
          if (x.requires_grad()) {
            auto& gx = x.grad();
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (int j = 0; j < d; ++j) {
              double dxh = gor[j] * gain(j);
              mean_dxh += dxh;
              mean_dxh_xh += dxh * xhat(i, j);
            }
            mean_dxh /= d;
            mean_dxh_xh /= d;
            for (int j = 0; j < d; ++j) {
              double dxh = gor[j] * gain(j);
              gx[static_cast<size_t>(i) * d + j] +=
                  inv_std[static_cast<size_t>(i)] * (dxh - mean_dxh - xhat(i, j) * mean_dxh_xh);
            }
          }
        }
      });
    }
    return out;
  }

  Tensor sum(const Tensor& x) {
    Tensor out = Tensor::scalar(std::accumulate(x.values().begin(), x.values().end(), 0.0));
    if (track(out, {x})) {
      record([x, out]() mutable {
        if (!out.has_grad() || !x.requires_grad()) return;
        double g = out.grad()[0];
        auto& gx = x.grad();
        for (double& v : gx) v += g;
      });
    }
    return out;
  }

  Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / x.size()); }

  // Inverted dropout; mask drawn from the supplied rng.
  Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw ContractError("dropout rate must be < 1");
    std::bernoulli_distribution keep(1.0 - rate);
    std::vector<uint8_t> mask(static_cast<size_t>(x.size()));
    for (auto& b : mask) b = keep(rng) ? 1 : 0;
    double inv = 1.0 / (1.0 - rate);
    Tensor out(x.shape());
    for (int i = 0; i < x.size(); ++i) out(i) = mask[static_cast<size_t>(i)] ? x(i) * inv : 0.0;
    if (track(out, {x})) {
      record([x, out, mask, inv]() mutable {
        if (!out.has_grad() || !x.requires_grad()) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        for (size_t i = 0; i < go.size(); ++i)
          if (mask[i]) gx[i] += go[i] * inv;
      });
    }
    return out;
  }

  // Seeds d(loss)/d(loss) = 1 and walks the tape once in reverse.
  void backward(const Tensor& loss) {
    if (loss.size() != 1) throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    loss.node()->grad.assign(1, 1.0);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

  size_t node_count() const { return tape_.size(); }
  void clear() { tape_.clear(); }

 private:
  std::vector<std::function<void()>> tape_;

  void record(std::function<void()> f) { tape_.push_back(std::move(f)); }

  static bool any_requires(std::initializer_list<Tensor> ts) {
    for (const auto& t : ts)
      if (t.requires_grad()) return true;
    return false;
  }

  bool track(Tensor& out, std::initializer_list<Tensor> inputs) {
    if (!any_requires(inputs)) return false;
    out.set_requires_grad(true);
    return true;
  }

  static void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  }

  Tensor binary(const Tensor& a, const Tensor& b, double sign) {
    check_same_shape(sign > 0 ? "add" : "sub", a, b);
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out(i) = a(i) + sign * b(i);
    if (track(out, {a, b})) {
      record([a, b, out, sign]() mutable {
        if (!out.has_grad()) return;
        const auto& go = out.grad();
        if (a.requires_grad()) {
          auto& ga = a.grad();
          for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (b.requires_grad()) {
          auto& gb = b.grad();
          for (size_t i = 0; i < go.size(); ++i) gb[i] += sign * go[i];
        }
      });
    }
    return out;
  }
};

}  // namespace istf
