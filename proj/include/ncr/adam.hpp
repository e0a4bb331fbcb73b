#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ncr/tensor.hpp"

namespace ncr {

template <typename T>
struct NamedParam {
  std::string name;
  TensorT<T> tensor;
};

template <typename T>
struct AdamState {
  T lr = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  long step = 0;
  std::vector<std::vector<T>> m, v;

  void init(const std::vector<TensorT<T>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.numel(), T(0));
      v.emplace_back(p.numel(), T(0));
    }
    step = 0;
  }
};

// Standard Adam update with bias correction. Gradients must be populated;
// they are left untouched (zeroing is the caller's job).
template <typename T>
void adam_step(std::vector<TensorT<T>>& params, AdamState<T>& st) {
  if (st.m.size() != params.size())
    throw UsageError("adam_step: state holds " + std::to_string(st.m.size()) +
                     " moment buffers for " + std::to_string(params.size()) + " parameters");
  ++st.step;
  const T bc1 = T(1) - std::pow(st.beta1, static_cast<T>(st.step));
  const T bc2 = T(1) - std::pow(st.beta2, static_cast<T>(st.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    if (!p.has_grad())
      throw UsageError("adam_step: parameter " + std::to_string(pi) + " has no gradient");
    if (static_cast<int>(st.m[pi].size()) != p.numel())
      throw UsageError("adam_step: moment extent mismatch on parameter " + std::to_string(pi));
    T* w = p.data();
    const T* g = p.grad().data();
    T* mm = st.m[pi].data();
    T* vv = st.v[pi].data();
    const int n = p.numel();
    for (int i = 0; i < n; ++i) {
      mm[i] = st.beta1 * mm[i] + (T(1) - st.beta1) * g[i];
      vv[i] = st.beta2 * vv[i] + (T(1) - st.beta2) * g[i] * g[i];
      T mhat = mm[i] / bc1;
      T vhat = vv[i] / bc2;
      w[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

}  // namespace ncr
