#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ncr/tensor.hpp"

// Shared helpers for the unit suites. Finite differences run in double
// precision; relative error uses a small absolute floor so near-zero
// gradients do not blow up the ratio.

namespace testsup {

using DTensor = ncr::TensorT<double>;

inline double rel_err(double got, double want) {
  double denom = std::max({std::abs(got), std::abs(want), 1e-6});
  return std::abs(got - want) / denom;
}

// Central finite differences of a scalar-valued function w.r.t. one input
// tensor, compared against the autodiff gradient already stored in `input`.
// Returns the worst relative error over all elements; elements far below the
// tensor's overall gradient scale are compared against that scale instead,
// so FD noise on near-zero entries does not dominate.
inline double finite_diff_check(DTensor& input, const std::function<double()>& eval_loss,
                                const std::vector<double>& autodiff_grad, double step = 1e-4) {
  double scale = 0;
  for (double g : autodiff_grad) scale = std::max(scale, std::abs(g));
  double floor = std::max(1e-3 * scale, 1e-9);
  double worst = 0;
  for (int i = 0; i < input.numel(); ++i) {
    double saved = input.data()[i];
    input.data()[i] = saved + step;
    double fp = eval_loss();
    input.data()[i] = saved - step;
    double fm = eval_loss();
    input.data()[i] = saved;
    double fd = (fp - fm) / (2 * step);
    double denom = std::max({std::abs(autodiff_grad[i]), std::abs(fd), floor});
    worst = std::max(worst, std::abs(autodiff_grad[i] - fd) / denom);
  }
  return worst;
}

inline std::vector<double> randu(int n, std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace testsup
