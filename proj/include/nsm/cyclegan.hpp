#pragma once

#include <string>
#include <vector>

#include "nsm/layers.hpp"
#include "nsm/losses.hpp"

namespace nsm {

// Architecture scale; "full" is the production-size network,
// "desk" shrinks everything for minutes-scale runs.
struct CycleGanArch {
  int base_width = 8;
  int n_res_blocks = 2;
  int disc_base = 8;

  static CycleGanArch full() { return {64, 6, 64}; }
  static CycleGanArch desk() { return {8, 2, 8}; }

  std::string descriptor() const {
    return "cyclegan:base=" + std::to_string(base_width) +
           ",res=" + std::to_string(n_res_blocks) +
           ",disc=" + std::to_string(disc_base);
  }
};

// Downsampling convs, residual blocks, nearest-neighbor upsampling, and a
// long input-to-output skip so the net starts at the identity and learns the
// domain delta; downstream mapping clamps values back to the OGM range.
// Plain instance norm throughout (conditional layer with a single style row).
template <typename T>
struct ResnetGenerator {
  Conv2dLayer<T> head;
  CondInstanceNormLayer<T> head_in;
  Conv2dLayer<T> down1, down2;
  CondInstanceNormLayer<T> down1_in, down2_in;
  std::vector<Conv2dLayer<T>> res_conv1, res_conv2;
  std::vector<CondInstanceNormLayer<T>> res_in1, res_in2;
  Conv2dLayer<T> up1, up2;
  CondInstanceNormLayer<T> up1_in, up2_in;
  Conv2dLayer<T> tail;

  ResnetGenerator() = default;
  ResnetGenerator(const CycleGanArch& arch, Rng& rng) {
    const int b = arch.base_width;
    head = Conv2dLayer<T>(1, b, 7, 1, 3, rng);
    head_in = CondInstanceNormLayer<T>(1, b);
    down1 = Conv2dLayer<T>(b, 2 * b, 3, 2, 1, rng);
    down1_in = CondInstanceNormLayer<T>(1, 2 * b);
    down2 = Conv2dLayer<T>(2 * b, 4 * b, 3, 2, 1, rng);
    down2_in = CondInstanceNormLayer<T>(1, 4 * b);
    for (int i = 0; i < arch.n_res_blocks; ++i) {
      res_conv1.emplace_back(4 * b, 4 * b, 3, 1, 1, rng);
      res_in1.emplace_back(1, 4 * b);
      res_conv2.emplace_back(4 * b, 4 * b, 3, 1, 1, rng);
      res_in2.emplace_back(1, 4 * b);
    }
    up1 = Conv2dLayer<T>(4 * b, 2 * b, 3, 1, 1, rng);
    up1_in = CondInstanceNormLayer<T>(1, 2 * b);
    up2 = Conv2dLayer<T>(2 * b, b, 3, 1, 1, rng);
    up2_in = CondInstanceNormLayer<T>(1, b);
    tail = Conv2dLayer<T>(b, 1, 7, 1, 3, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto h = relu(head_in.forward(head.forward(x), 0));
    h = relu(down1_in.forward(down1.forward(h), 0));
    h = relu(down2_in.forward(down2.forward(h), 0));
    for (std::size_t i = 0; i < res_conv1.size(); ++i) {
      auto r = relu(res_in1[i].forward(res_conv1[i].forward(h), 0));
      r = res_in2[i].forward(res_conv2[i].forward(r), 0);
      h = add(h, r);
    }
    h = relu(up1_in.forward(up1.forward(upsample_nearest(h, 2)), 0));
    h = relu(up2_in.forward(up2.forward(upsample_nearest(h, 2)), 0));
    return add(x, tail.forward(h));
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    head.collect(prefix + ".head", out);
    head_in.collect(prefix + ".head_in", out);
    down1.collect(prefix + ".down1", out);
    down1_in.collect(prefix + ".down1_in", out);
    down2.collect(prefix + ".down2", out);
    down2_in.collect(prefix + ".down2_in", out);
    for (std::size_t i = 0; i < res_conv1.size(); ++i) {
      const std::string r = prefix + ".res" + std::to_string(i);
      res_conv1[i].collect(r + ".conv1", out);
      res_in1[i].collect(r + ".in1", out);
      res_conv2[i].collect(r + ".conv2", out);
      res_in2[i].collect(r + ".in2", out);
    }
    up1.collect(prefix + ".up1", out);
    up1_in.collect(prefix + ".up1_in", out);
    up2.collect(prefix + ".up2", out);
    up2_in.collect(prefix + ".up2_in", out);
    tail.collect(prefix + ".tail", out);
  }
};

// Patch-based convolutional discriminator (70x70-receptive-field style at
// full scale); emits a patch map judged by the LSGAN objective.
template <typename T>
struct PatchDiscriminator {
  Conv2dLayer<T> c1, c2, c3, c4;
  CondInstanceNormLayer<T> in2, in3;

  PatchDiscriminator() = default;
  PatchDiscriminator(const CycleGanArch& arch, Rng& rng) {
    const int b = arch.disc_base;
    c1 = Conv2dLayer<T>(1, b, 4, 2, 1, rng);
    c2 = Conv2dLayer<T>(b, 2 * b, 4, 2, 1, rng);
    in2 = CondInstanceNormLayer<T>(1, 2 * b);
    c3 = Conv2dLayer<T>(2 * b, 4 * b, 4, 2, 1, rng);
    in3 = CondInstanceNormLayer<T>(1, 4 * b);
    c4 = Conv2dLayer<T>(4 * b, 1, 4, 1, 1, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto h = leaky_relu(c1.forward(x), T(0.2));
    h = leaky_relu(in2.forward(c2.forward(h), 0), T(0.2));
    h = leaky_relu(in3.forward(c3.forward(h), 0), T(0.2));
    return c4.forward(h);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    c1.collect(prefix + ".c1", out);
    c2.collect(prefix + ".c2", out);
    in2.collect(prefix + ".in2", out);
    c3.collect(prefix + ".c3", out);
    in3.collect(prefix + ".in3", out);
    c4.collect(prefix + ".c4", out);
  }
};

template <typename T>
struct CycleGanModel {
  ResnetGenerator<T> g;  // sim -> real: the sensor model
  ResnetGenerator<T> f;  // real -> sim
  PatchDiscriminator<T> d_x;  // judges sim domain
  PatchDiscriminator<T> d_y;  // judges real domain
  T lambda_cycle = T(50);
  CycleGanArch arch;

  CycleGanModel() = default;
  CycleGanModel(const CycleGanArch& a, Rng& rng)
      : g(a, rng), f(a, rng), d_x(a, rng), d_y(a, rng), arch(a) {}

  NamedParams<T> generator_params() {
    NamedParams<T> out;
    g.collect("g", out);
    f.collect("f", out);
    return out;
  }

  NamedParams<T> discriminator_params() {
    NamedParams<T> out;
    d_x.collect("d_x", out);
    d_y.collect("d_y", out);
    return out;
  }
};

template <typename T>
struct CycleGanLossRecord {
  T loss_g_adv = 0;   // L_GAN(G, D_Y)
  T loss_f_adv = 0;   // L_GAN(F, D_X)
  T loss_cycle = 0;   // L_RY + L_RX
  T loss_d_x = 0;
  T loss_d_y = 0;
  T total = 0;        // loss_g_adv + loss_f_adv + lambda * loss_cycle
};

// Builds the full objective graph: total = adv_G + adv_F + lambda * cycle.
// Returns the generator-side scalar to backprop plus both discriminator
// scalars; the record carries every reported component.
template <typename T>
struct CycleGanLossGraph {
  Tensor<T> gen_total;
  Tensor<T> d_x_loss;
  Tensor<T> d_y_loss;
  CycleGanLossRecord<T> record;
};

template <typename T>
CycleGanLossGraph<T> cyclegan_total_loss(const CycleGanModel<T>& model,
                                         const Tensor<T>& batch_x,
                                         const Tensor<T>& batch_y) {
  auto fake_y = model.g.forward(batch_x);
  auto fake_x = model.f.forward(batch_y);
  auto gan_y = gan_loss([&](const Tensor<T>& v) { return model.d_y.forward(v); },
                        batch_y, fake_y);
  auto gan_x = gan_loss([&](const Tensor<T>& v) { return model.d_x.forward(v); },
                        batch_x, fake_x);
  auto cyc = add(l1_distance(model.f.forward(fake_y), batch_x),
                 l1_distance(model.g.forward(fake_x), batch_y));
  auto total = add(add(gan_y.loss_g, gan_x.loss_g), scale(cyc, model.lambda_cycle));

  CycleGanLossGraph<T> out;
  out.gen_total = total;
  out.d_x_loss = gan_x.loss_d;
  out.d_y_loss = gan_y.loss_d;
  out.record.loss_g_adv = gan_y.loss_g.item();
  out.record.loss_f_adv = gan_x.loss_g.item();
  out.record.loss_cycle = cyc.item();
  out.record.loss_d_x = gan_x.loss_d.item();
  out.record.loss_d_y = gan_y.loss_d.item();
  out.record.total = total.item();
  for (T v : {out.record.loss_g_adv, out.record.loss_f_adv, out.record.loss_cycle})
    if (!std::isfinite(static_cast<double>(v)))
      fail(ErrorKind::training, "cyclegan loss component is non-finite");
  return out;
}

}  // namespace nsm
