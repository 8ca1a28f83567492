#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nsm/adam.hpp"
#include "nsm/ops.hpp"
#include "nsm/tensor.hpp"

namespace nsm {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;

// Conv weight init: seeded normal, std 0.02; biases zero.
template <typename T>
struct Conv2dLayer {
  Tensor<T> weight;  // [K,C,kh,kw]
  Tensor<T> bias;    // [K]
  int stride = 1;
  int pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(int in_ch, int out_ch, int ksize, int stride_, int pad_, Rng& rng)
      : weight(Tensor<T>::randn({out_ch, in_ch, ksize, ksize}, rng, T(0.02))),
        bias(Tensor<T>::zeros({out_ch}, true)),
        stride(stride_),
        pad(pad_) {}

  Tensor<T> forward(const Tensor<T>& x) const {
    return add_channel_bias(conv2d(x, weight, stride, pad), bias);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
  }
};

template <typename T>
struct BatchNorm2dLayer {
  Tensor<T> gamma;
  Tensor<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  bool training = true;

  BatchNorm2dLayer() = default;
  explicit BatchNorm2dLayer(int channels)
      : gamma(Tensor<T>::filled({channels}, T(1), true)),
        beta(Tensor<T>::zeros({channels}, true)),
        running_mean(channels, T(0)),
        running_var(channels, T(1)) {}

  Tensor<T> forward(const Tensor<T>& x) {
    return batch_norm(x, gamma, beta, &running_mean, &running_var, training);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }

  // Running stats are state, not parameters; checkpoints store them as
  // non-optimized tensors.
  void collect_buffers(const std::string& prefix, NamedParams<T>& out) {
    out.emplace_back(prefix + ".running_mean",
                     Tensor<T>::from_data({static_cast<int>(running_mean.size())},
                                          running_mean));
    out.emplace_back(prefix + ".running_var",
                     Tensor<T>::from_data({static_cast<int>(running_var.size())},
                                          running_var));
  }
};

// Instance norm whose affine parameters are selected per style from [S,C]
// banks. S=1 with scale 1, shift 0 is plain instance normalization.
template <typename T>
struct CondInstanceNormLayer {
  Tensor<T> scale_bank;  // [S,C]
  Tensor<T> shift_bank;  // [S,C]

  CondInstanceNormLayer() = default;
  CondInstanceNormLayer(int styles, int channels)
      : scale_bank(Tensor<T>::filled({styles, channels}, T(1), true)),
        shift_bank(Tensor<T>::zeros({styles, channels}, true)) {}

  Tensor<T> forward(const Tensor<T>& x, int style_index) const {
    return instance_norm_conditional(x, style_index, scale_bank, shift_bank);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    out.emplace_back(prefix + ".scale_bank", scale_bank);
    out.emplace_back(prefix + ".shift_bank", shift_bank);
  }
};

}  // namespace nsm
