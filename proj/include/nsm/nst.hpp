#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsm/layers.hpp"
#include "nsm/losses.hpp"

namespace nsm {

struct NstArch {
  int encoder_base = 8;      // channels double per block: b, 2b, 4b, 8b
  int transformer_base = 8;  // b, 2b, 4b through the downsampling path
  int n_styles = 2;

  static NstArch full() { return {32, 32, 20}; }
  static NstArch desk() { return {8, 8, 2}; }

  std::string descriptor() const {
    return "nst:enc=" + std::to_string(encoder_base) +
           ",trans=" + std::to_string(transformer_base) +
           ",styles=" + std::to_string(n_styles);
  }
};

// 4-block feature extractor: conv -> batch norm -> relu -> max pool per
// block. Pre-trained as a sim/real binary classifier, then frozen; layer
// activations feed the content and style losses.
template <typename T>
struct FeatureExtractor {
  std::vector<Conv2dLayer<T>> convs;
  std::vector<BatchNorm2dLayer<T>> bns;

  FeatureExtractor() = default;
  FeatureExtractor(const NstArch& arch, Rng& rng) {
    int in = 1;
    for (int i = 0; i < 4; ++i) {
      const int out = arch.encoder_base << i;
      convs.emplace_back(in, out, 3, 1, 1, rng);
      bns.emplace_back(out);
      in = out;
    }
  }

  void set_training(bool training) {
    for (auto& bn : bns) bn.training = training;
  }

  // Activations of all 4 blocks (post-pool), index 0 = first layer.
  std::vector<Tensor<T>> forward(const Tensor<T>& x) {
    std::vector<Tensor<T>> acts;
    Tensor<T> h = x;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      h = max_pool(relu(bns[i].forward(convs[i].forward(h))), 2, 2);
      acts.push_back(h);
    }
    return acts;
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect(prefix + ".conv" + std::to_string(i), out);
      bns[i].collect(prefix + ".bn" + std::to_string(i), out);
    }
  }

  void collect_buffers(const std::string& prefix, NamedParams<T>& out) {
    for (std::size_t i = 0; i < bns.size(); ++i)
      bns[i].collect_buffers(prefix + ".bn" + std::to_string(i), out);
  }
};

// Encoder-decoder generation net: 3 downsampling conv blocks, 3 residual
// blocks, 3 nearest-upsample+conv blocks; conditional instance normalization
// keyed by style index; sigmoid output.
template <typename T>
struct StyleTransformer {
  std::vector<Conv2dLayer<T>> down;
  std::vector<CondInstanceNormLayer<T>> down_in;
  std::vector<Conv2dLayer<T>> res_conv1, res_conv2;
  std::vector<CondInstanceNormLayer<T>> res_in1, res_in2;
  std::vector<Conv2dLayer<T>> up;
  std::vector<CondInstanceNormLayer<T>> up_in;
  Conv2dLayer<T> tail;
  // Forward-pass probe: inference cost is exactly one increment per frame.
  mutable std::uint64_t forward_count = 0;

  StyleTransformer() = default;
  StyleTransformer(const NstArch& arch, Rng& rng) {
    const int b = arch.transformer_base;
    const int s = arch.n_styles;
    const int widths[4] = {1, b, 2 * b, 4 * b};
    for (int i = 0; i < 3; ++i) {
      down.emplace_back(widths[i], widths[i + 1], 3, 2, 1, rng);
      down_in.emplace_back(s, widths[i + 1]);
    }
    for (int i = 0; i < 3; ++i) {
      res_conv1.emplace_back(4 * b, 4 * b, 3, 1, 1, rng);
      res_in1.emplace_back(s, 4 * b);
      res_conv2.emplace_back(4 * b, 4 * b, 3, 1, 1, rng);
      res_in2.emplace_back(s, 4 * b);
    }
    for (int i = 0; i < 3; ++i) {
      up.emplace_back(widths[3 - i], widths[2 - i] == 1 ? b : widths[2 - i], 3,
                      1, 1, rng);
      up_in.emplace_back(s, widths[2 - i] == 1 ? b : widths[2 - i]);
    }
    tail = Conv2dLayer<T>(b, 1, 3, 1, 1, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, int style_index) const {
    ++forward_count;
    Tensor<T> h = x;
    for (std::size_t i = 0; i < down.size(); ++i)
      h = relu(down_in[i].forward(down[i].forward(h), style_index));
    for (std::size_t i = 0; i < res_conv1.size(); ++i) {
      auto r = relu(res_in1[i].forward(res_conv1[i].forward(h), style_index));
      r = res_in2[i].forward(res_conv2[i].forward(r), style_index);
      h = add(h, r);
    }
    for (std::size_t i = 0; i < up.size(); ++i)
      h = relu(up_in[i].forward(up[i].forward(upsample_nearest(h, 2)), style_index));
    return sigmoid(tail.forward(h));
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    for (std::size_t i = 0; i < down.size(); ++i) {
      down[i].collect(prefix + ".down" + std::to_string(i), out);
      down_in[i].collect(prefix + ".down_in" + std::to_string(i), out);
    }
    for (std::size_t i = 0; i < res_conv1.size(); ++i) {
      const std::string r = prefix + ".res" + std::to_string(i);
      res_conv1[i].collect(r + ".conv1", out);
      res_in1[i].collect(r + ".in1", out);
      res_conv2[i].collect(r + ".conv2", out);
      res_in2[i].collect(r + ".in2", out);
    }
    for (std::size_t i = 0; i < up.size(); ++i) {
      up[i].collect(prefix + ".up" + std::to_string(i), out);
      up_in[i].collect(prefix + ".up_in" + std::to_string(i), out);
    }
    tail.collect(prefix + ".tail", out);
  }
};

template <typename T>
struct NstModel {
  FeatureExtractor<T> feature_extractor;
  StyleTransformer<T> transformer;
  std::vector<Tensor<T>> style_bank;  // S style grids as [1,1,H,W] tensors
  int content_layer_index = 1;        // 2nd layer (0-based)
  std::vector<int> style_layer_indices = {0, 1, 2, 3};
  T lambda_s = T(1);
  T lambda_c = T(1);
  LocalizedWeights<T> localized_weights = LocalizedWeights<T>::defaults();
  NstArch arch;

  NstModel() = default;
  NstModel(const NstArch& a, Rng& rng)
      : feature_extractor(a, rng), transformer(a, rng), arch(a) {}

  // Precomputed per-style encoder activations (extractor is frozen during
  // NST training, so these are constants).
  std::vector<std::vector<Tensor<T>>> style_activations() {
    feature_extractor.set_training(false);
    std::vector<std::vector<Tensor<T>>> out;
    for (auto& s : style_bank) {
      auto acts = feature_extractor.forward(s);
      for (auto& a : acts) a = a.detach();
      out.push_back(std::move(acts));
    }
    return out;
  }
};

template <typename T>
struct NstLossRecord {
  T style = 0;
  T content = 0;
  T total = 0;  // lambda_s * style + lambda_c * content
};

template <typename T>
struct NstLossGraph {
  Tensor<T> total;
  NstLossRecord<T> record;
};

// Eq-style weighted objective: lambda_s * (global + localized style terms) +
// lambda_c * content; content from the configured extractor layer, style from
// all extractor layers.
template <typename T>
NstLossGraph<T> nst_total_loss(NstModel<T>& model, const Tensor<T>& content_grid,
                               int style_index,
                               const std::vector<Tensor<T>>* cached_style_acts =
                                   nullptr) {
  if (style_index < 0 ||
      style_index >= static_cast<int>(model.style_bank.size()))
    fail(ErrorKind::usage, "nst_total_loss: style index out of range");
  model.feature_extractor.set_training(false);

  auto stylized = model.transformer.forward(content_grid, style_index);
  auto p_acts = model.feature_extractor.forward(stylized);
  auto c_acts = model.feature_extractor.forward(content_grid.detach());
  for (auto& a : c_acts) a = a.detach();
  std::vector<Tensor<T>> s_acts;
  if (cached_style_acts) {
    s_acts = *cached_style_acts;
  } else {
    s_acts = model.feature_extractor.forward(model.style_bank[style_index]);
    for (auto& a : s_acts) a = a.detach();
  }

  auto c_loss = content_loss(p_acts, c_acts, {model.content_layer_index});
  auto s_loss = style_loss_global(p_acts, s_acts, model.style_layer_indices);
  for (int li : model.style_layer_indices) {
    const Shape& sh = p_acts[li].shape();
    if (sh[2] >= model.localized_weights.grid_rows &&
        sh[3] >= model.localized_weights.grid_cols)
      s_loss = add(s_loss, style_loss_localized(p_acts[li], s_acts[li],
                                                model.localized_weights));
  }
  auto total = add(scale(s_loss, model.lambda_s), scale(c_loss, model.lambda_c));

  NstLossGraph<T> out;
  out.total = total;
  out.record.style = s_loss.item();
  out.record.content = c_loss.item();
  out.record.total = total.item();
  if (!std::isfinite(static_cast<double>(out.record.total)))
    fail(ErrorKind::training, "nst loss is non-finite");
  return out;
}

// Domain-classifier head used only for encoder pre-training: 1x1 conv to one
// channel on the deepest activations, spatial mean, sigmoid.
template <typename T>
struct EncoderClassifierHead {
  Conv2dLayer<T> conv;

  EncoderClassifierHead() = default;
  EncoderClassifierHead(const NstArch& arch, Rng& rng)
      : conv(arch.encoder_base * 8, 1, 1, 1, 0, rng) {}

  Tensor<T> forward(const Tensor<T>& deepest_act) const {
    return sigmoid(mean(conv.forward(deepest_act)));
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    conv.collect(prefix + ".conv", out);
  }
};

}  // namespace nsm
