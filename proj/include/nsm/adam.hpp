#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nsm/tensor.hpp"

namespace nsm {

template <typename T>
struct AdamState {
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step_count = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
  T learning_rate = T(1e-3);
};

// Bias-corrected Adam update applied in place. Rejects non-finite gradients
// before touching the parameter, so an aborted step leaves it untouched.
template <typename T>
void adam_step(Tensor<T>& param, const std::vector<T>& grad,
               AdamState<T>& state) {
  auto& p = param.data();
  if (grad.size() != p.size())
    fail(ErrorKind::shape, "adam_step: grad/param size mismatch");
  if (state.first_moment.empty()) {
    state.first_moment.assign(p.size(), T(0));
    state.second_moment.assign(p.size(), T(0));
  }
  if (state.first_moment.size() != p.size())
    fail(ErrorKind::shape, "adam_step: moment buffers do not match parameter");
  for (T g : grad)
    if (!std::isfinite(static_cast<double>(g)))
      fail(ErrorKind::training, "adam_step: non-finite gradient");
  state.step_count += 1;
  const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step_count));
  const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step_count));
  for (std::size_t i = 0; i < p.size(); ++i) {
    T& m = state.first_moment[i];
    T& v = state.second_moment[i];
    m = state.beta1 * m + (T(1) - state.beta1) * grad[i];
    v = state.beta2 * v + (T(1) - state.beta2) * grad[i] * grad[i];
    const T mhat = m / bc1;
    const T vhat = v / bc2;
    p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

// Named parameter list plus per-parameter Adam state; the unit every
// training loop drives and every checkpoint serializes.
template <typename T>
struct Optimizer {
  std::vector<std::pair<std::string, Tensor<T>>> params;
  std::vector<AdamState<T>> states;

  explicit Optimizer(std::vector<std::pair<std::string, Tensor<T>>> p = {},
                     T lr = T(1e-3), T beta1 = T(0.9), T beta2 = T(0.999))
      : params(std::move(p)) {
    states.resize(params.size());
    for (auto& s : states) {
      s.learning_rate = lr;
      s.beta1 = beta1;
      s.beta2 = beta2;
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params) p.zero_grad();
  }

  void step() {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].second;
      if (p.grad_raw().empty()) continue;
      adam_step(p, p.grad_raw(), states[i]);
    }
  }
};

}  // namespace nsm
