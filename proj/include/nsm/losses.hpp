#pragma once

#include <vector>

#include "nsm/ops.hpp"
#include "nsm/tensor.hpp"

namespace nsm {

// mean((x - c)^2)
template <typename T>
Tensor<T> mean_sq_to_const(const Tensor<T>& x, T c) {
  auto d = add_scalar(x, -c);
  return mean(mul(d, d));
}

template <typename T>
struct GanLossResult {
  Tensor<T> loss_d;  // discriminator objective (fake side detached)
  Tensor<T> loss_g;  // generator objective
};

// Least-squares GAN: loss_D = 1/2 mean((D(real)-1)^2) + 1/2 mean(D(fake)^2),
// loss_G = mean((D(fake)-1)^2). The fake batch is detached inside loss_D so
// discriminator updates never reach the generator.
template <typename T, typename DiscFn>
GanLossResult<T> gan_loss(DiscFn&& discriminator, const Tensor<T>& real_batch,
                          const Tensor<T>& fake_batch) {
  auto d_real = discriminator(real_batch);
  auto d_fake_det = discriminator(fake_batch.detach());
  auto loss_d = scale(add(mean_sq_to_const(d_real, T(1)),
                          mean_sq_to_const(d_fake_det, T(0))),
                      T(0.5));
  auto d_fake = discriminator(fake_batch);
  auto loss_g = mean_sq_to_const(d_fake, T(1));
  return {loss_d, loss_g};
}

// mean |F(G(x)) - x| + mean |G(F(y)) - y|
template <typename T, typename GFn, typename FFn>
Tensor<T> cycle_loss(GFn&& g, FFn&& f, const Tensor<T>& batch_x,
                     const Tensor<T>& batch_y) {
  auto x_rec = f(g(batch_x));
  auto y_rec = g(f(batch_y));
  return add(l1_distance(x_rec, batch_x), l1_distance(y_rec, batch_y));
}

// sum over layers of (1/U_i) * ||phi_i(p) - phi_i(c)||^2, U_i counted per
// sample; batch dimension averaged.
template <typename T>
Tensor<T> content_loss(const std::vector<Tensor<T>>& p_acts,
                       const std::vector<Tensor<T>>& c_acts,
                       const std::vector<int>& layer_set) {
  if (p_acts.size() != c_acts.size())
    fail(ErrorKind::shape, "content_loss: activation list length mismatch");
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (int li : layer_set) {
    const auto& p = p_acts.at(li);
    const auto& c = c_acts.at(li);
    check_same_shape(p, c, "content_loss");
    const Shape& s = p.shape();
    const int n = s[0];
    const T inv_u = T(1) / static_cast<T>(static_cast<std::size_t>(s[1]) * s[2] * s[3]);
    Tensor<T> layer = Tensor<T>::scalar(T(0));
    for (int b = 0; b < n; ++b)
      layer = add(layer, squared_l2_distance(flatten_spatial(p, b),
                                             flatten_spatial(c, b)));
    total = add(total, scale(layer, inv_u / static_cast<T>(n)));
  }
  return total;
}

// sum over layers of (1/U_j) * ||G(phi_j(p)) - G(phi_j(s))||_F^2.
template <typename T>
Tensor<T> style_loss_global(const std::vector<Tensor<T>>& p_acts,
                            const std::vector<Tensor<T>>& s_acts,
                            const std::vector<int>& layer_set) {
  if (p_acts.size() != s_acts.size())
    fail(ErrorKind::shape, "style_loss_global: activation list length mismatch");
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (int li : layer_set) {
    const auto& p = p_acts.at(li);
    const auto& s = s_acts.at(li);
    if (p.shape()[1] != s.shape()[1])
      fail(ErrorKind::shape, "style_loss_global: channel count mismatch");
    const int n = p.shape()[0];
    const T inv_u = T(1) / static_cast<T>(static_cast<std::size_t>(p.shape()[1]) *
                                          p.shape()[2] * p.shape()[3]);
    Tensor<T> layer = Tensor<T>::scalar(T(0));
    for (int b = 0; b < n; ++b) {
      // Style bank holds one style image; reuse sample 0 when sizes differ.
      const int sb = s.shape()[0] == n ? b : 0;
      auto gp = gram_matrix(flatten_spatial(p, b));
      auto gs = gram_matrix(flatten_spatial(s, sb));
      layer = add(layer, squared_l2_distance(gp, gs));
    }
    total = add(total, scale(layer, inv_u / static_cast<T>(n)));
  }
  return total;
}

template <typename T>
struct LocalizedWeights {
  int grid_rows = 3;
  int grid_cols = 3;
  std::vector<T> grid;   // grid_rows * grid_cols, row-major
  std::vector<T> slice;  // one weight per horizontal slice; empty = no slices

  static LocalizedWeights defaults() {
    LocalizedWeights w;
    // Uniform cell weights; slice weights increase toward the ego-near
    // (bottom) slices where BEV LiDAR is densest.
    w.grid.assign(9, T(1));
    w.slice = {T(0.25), T(0.5), T(0.75), T(1)};
    return w;
  }
};

namespace detail {

// Partition `extent` into `parts`, remainder assigned to the last part.
inline std::vector<std::pair<int, int>> partition_extent(int extent, int parts) {
  std::vector<std::pair<int, int>> out;
  const int base = extent / parts;
  for (int i = 0; i < parts; ++i) {
    const int lo = i * base;
    const int hi = (i == parts - 1) ? extent : (i + 1) * base;
    out.emplace_back(lo, hi);
  }
  return out;
}

}  // namespace detail

// Weighted sum of per-cell (3x3 grid by default) and per-horizontal-slice
// Gram discrepancies, each normalized by its own unit count.
template <typename T>
Tensor<T> style_loss_localized(const Tensor<T>& p_act, const Tensor<T>& s_act,
                               const LocalizedWeights<T>& weights) {
  const Shape& ps = p_act.shape();
  const Shape& ss = s_act.shape();
  if (ps.size() != 4 || ss.size() != 4 || ps[1] != ss[1] || ps[2] != ss[2] ||
      ps[3] != ss[3])
    fail(ErrorKind::shape, "style_loss_localized: incompatible activations " +
                               shape_str(ps) + " vs " + shape_str(ss));
  const int n = ps[0], c = ps[1], h = ps[2], w = ps[3];
  if (h < weights.grid_rows || w < weights.grid_cols)
    fail(ErrorKind::shape,
         "style_loss_localized: spatial extent " + std::to_string(h) + "x" +
             std::to_string(w) + " below minimum " +
             std::to_string(weights.grid_rows) + "x" +
             std::to_string(weights.grid_cols));
  if (static_cast<int>(weights.grid.size()) !=
      weights.grid_rows * weights.grid_cols)
    fail(ErrorKind::usage, "style_loss_localized: grid weight count mismatch");
  if (!weights.slice.empty() &&
      h < static_cast<int>(weights.slice.size()))
    fail(ErrorKind::shape, "style_loss_localized: more slices than rows");

  auto rows = detail::partition_extent(h, weights.grid_rows);
  auto cols = detail::partition_extent(w, weights.grid_cols);
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (int b = 0; b < n; ++b) {
    const int sb = ss[0] == n ? b : 0;
    for (int gi = 0; gi < weights.grid_rows; ++gi)
      for (int gj = 0; gj < weights.grid_cols; ++gj) {
        const T wgt = weights.grid[gi * weights.grid_cols + gj];
        if (wgt == T(0)) continue;
        auto [r0, r1] = rows[gi];
        auto [c0, c1] = cols[gj];
        auto gp = gram_matrix(slice_spatial(p_act, b, r0, r1, c0, c1));
        auto gs = gram_matrix(slice_spatial(s_act, sb, r0, r1, c0, c1));
        const T inv_u = T(1) / static_cast<T>(static_cast<std::size_t>(c) *
                                              (r1 - r0) * (c1 - c0));
        total = add(total, scale(squared_l2_distance(gp, gs), wgt * inv_u));
      }
    if (!weights.slice.empty()) {
      auto slices = detail::partition_extent(h, static_cast<int>(weights.slice.size()));
      for (std::size_t si = 0; si < slices.size(); ++si) {
        const T wgt = weights.slice[si];
        if (wgt == T(0)) continue;
        auto [r0, r1] = slices[si];
        auto gp = gram_matrix(slice_spatial(p_act, b, r0, r1, 0, w));
        auto gs = gram_matrix(slice_spatial(s_act, sb, r0, r1, 0, w));
        const T inv_u = T(1) / static_cast<T>(static_cast<std::size_t>(c) *
                                              (r1 - r0) * w);
        total = add(total, scale(squared_l2_distance(gp, gs), wgt * inv_u));
      }
    }
  }
  return scale(total, T(1) / static_cast<T>(n));
}

}  // namespace nsm
