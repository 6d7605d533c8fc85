#pragma once

#include <cmath>
#include <vector>

#include "istf/error.hpp"
#include "istf/tensor.hpp"

namespace istf {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

// Adam with bias correction. step() consumes the accumulated gradients and
// zeroes them afterwards.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0.0) throw ContractError("adam: learning rate must be positive");
    states_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      states_[i].m.assign(static_cast<size_t>(params_[i].size()), 0.0);
      states_[i].v.assign(static_cast<size_t>(params_[i].size()), 0.0);
    }
  }

  void step() {
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      if (!p.has_grad())
        throw ContractError("adam: parameter " + std::to_string(i) + " has no gradient");
      AdamState& st = states_[i];
      ++st.t;
      double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
      double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
      auto& g = p.grad();
      for (int j = 0; j < p.size(); ++j) {
        size_t k = static_cast<size_t>(j);
        st.m[k] = beta1_ * st.m[k] + (1.0 - beta1_) * g[k];
        st.v[k] = beta2_ * st.v[k] + (1.0 - beta2_) * g[k] * g[k];
        double mhat = st.m[k] / bc1;
        double vhat = st.v[k] / bc2;
        p(j) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      p.zero_grad();
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) {
    if (lr <= 0.0) throw ContractError("adam: learning rate must be positive");
    lr_ = lr;
  }

  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  double lr_, beta1_, beta2_, eps_;
};

// Reduce-on-plateau: every `patience` consecutive epochs without the mean
// loss improving by at least min_delta, multiply the learning rate by
// `factor`. The first observed epoch establishes the baseline and counts
// toward the stall window, so a constant loss fires at epochs
// patience, 2*patience, ...
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience, double min_delta)
      : factor_(factor), patience_(patience), min_delta_(min_delta) {
    if (factor <= 0.0 || factor >= 1.0) throw ContractError("plateau factor must be in (0,1)");
    if (patience < 1) throw ContractError("plateau patience must be >= 1");
  }

  // Returns the multiplier to apply this epoch (1.0 or factor).
  double observe(double loss) {
    if (!has_best_) {
      best_ = loss;
      has_best_ = true;
      ++bad_epochs_;
    } else if (loss < best_ - min_delta_) {
      best_ = loss;
      bad_epochs_ = 0;
    } else {
      ++bad_epochs_;
    }
    if (bad_epochs_ >= patience_) {
      bad_epochs_ = 0;
      return factor_;
    }
    return 1.0;
  }

 private:
  double factor_;
  int patience_;
  double min_delta_;
  double best_ = 0.0;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

}  // namespace istf
