#pragma once

// Test-only finite-difference gradient oracle, independent of the tape's
// analytic backward path: it re-runs the forward closure at perturbed
// parameter values and compares central differences with recorded grads.

#include <cmath>
#include <functional>
#include <vector>

#include "istf/tensor.hpp"

namespace istf::testing {

struct FdReport {
  double max_rel_error = 0.0;
  long checked = 0;
};

// loss_fn must rebuild the whole forward pass from the current parameter
// values and return the scalar loss. Analytic grads must already be
// populated (see fd_check_full).
inline FdReport fd_check(std::vector<Tensor> params, const std::function<double()>& loss_fn,
                         double step = 1e-5) {
  FdReport rep;
  for (auto& p : params) {
    for (int i = 0; i < p.size(); ++i) {
      double saved = p(i);
      p(i) = saved + step;
      double up = loss_fn();
      p(i) = saved - step;
      double down = loss_fn();
      p(i) = saved;
      double numeric = (up - down) / (2.0 * step);
      double analytic = p.grad()[static_cast<size_t>(i)];
      double denom = std::max(1e-4, std::abs(numeric) + std::abs(analytic));
      rep.max_rel_error = std::max(rep.max_rel_error, std::abs(numeric - analytic) / denom);
      ++rep.checked;
    }
  }
  return rep;
}

// Convenience: run `backward_fn` once to populate grads, then fd_check.
inline FdReport fd_check_full(std::vector<Tensor> params, const std::function<void()>& backward_fn,
                              const std::function<double()>& loss_fn, double step = 1e-5) {
  for (auto& p : params) {
    p.grad();
    p.zero_grad();
  }
  backward_fn();
  return fd_check(params, loss_fn, step);
}

}  // namespace istf::testing
