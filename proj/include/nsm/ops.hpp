#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "nsm/tensor.hpp"

namespace nsm {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

// im2col for one sample: (C*kh*kw) x (oh*ow)
template <typename T>
void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride,
            int pad, int oh, int ow, T* col) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* row = col + (static_cast<std::size_t>(c) * kh * kw + ki * kw + kj) *
                           (static_cast<std::size_t>(oh) * ow);
        for (int oi = 0; oi < oh; ++oi) {
          int ii = oi * stride + ki - pad;
          for (int oj = 0; oj < ow; ++oj) {
            int jj = oj * stride + kj - pad;
            row[oi * ow + oj] =
                (ii >= 0 && ii < H && jj >= 0 && jj < W)
                    ? img[(static_cast<std::size_t>(c) * H + ii) * W + jj]
                    : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int kh, int kw, int stride,
                int pad, int oh, int ow, T* img) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* row =
            col + (static_cast<std::size_t>(c) * kh * kw + ki * kw + kj) *
                      (static_cast<std::size_t>(oh) * ow);
        for (int oi = 0; oi < oh; ++oi) {
          int ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= H) continue;
          for (int oj = 0; oj < ow; ++oj) {
            int jj = oj * stride + kj - pad;
            if (jj < 0 || jj >= W) continue;
            img[(static_cast<std::size_t>(c) * H + ii) * W + jj] +=
                row[oi * ow + oj];
          }
        }
      }
    }
  }
}

}  // namespace detail

// input [N,C,H,W] * kernel [K,C,kh,kw] -> [N,K,oh,ow]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride,
                 int pad) {
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  if (is.size() != 4 || ks.size() != 4)
    fail(ErrorKind::shape, "conv2d: expected 4D input and kernel, got " +
                               shape_str(is) + " and " + shape_str(ks));
  if (is[1] != ks[1])
    fail(ErrorKind::shape, "conv2d: channel mismatch, input " + shape_str(is) +
                               " vs kernel " + shape_str(ks));
  if (stride < 1) fail(ErrorKind::shape, "conv2d: stride must be >= 1");
  const int N = is[0], C = is[1], H = is[2], W = is[3];
  const int K = ks[0], kh = ks[2], kw = ks[3];
  if (kh > H + 2 * pad || kw > W + 2 * pad)
    fail(ErrorKind::shape, "conv2d: kernel " + shape_str(ks) +
                               " larger than padded input " + shape_str(is));
  const int oh = (H + 2 * pad - kh) / stride + 1;
  const int ow = (W + 2 * pad - kw) / stride + 1;
  const std::size_t col_rows = static_cast<std::size_t>(C) * kh * kw;
  const std::size_t col_cols = static_cast<std::size_t>(oh) * ow;

  std::vector<T> out(static_cast<std::size_t>(N) * K * col_cols);
  std::vector<T> col(col_rows * col_cols);
  Eigen::Map<const MatRM<T>> Wm(kernel.data().data(), K, col_rows);
  for (int n = 0; n < N; ++n) {
    detail::im2col(input.data().data() + static_cast<std::size_t>(n) * C * H * W,
                   C, H, W, kh, kw, stride, pad, oh, ow, col.data());
    Eigen::Map<const MatRM<T>> colm(col.data(), col_rows, col_cols);
    Eigen::Map<MatRM<T>> outm(out.data() + static_cast<std::size_t>(n) * K * col_cols,
                              K, col_cols);
    outm.noalias() = Wm * colm;
  }

  auto backward = [=](typename Tensor<T>::Node& node) {
    auto& pin = node.parents[0];
    auto& pker = node.parents[1];
    auto& gin = pin->ensure_grad();
    auto& gker = pker->ensure_grad();
    std::vector<T> colbuf(col_rows * col_cols);
    std::vector<T> dcol(col_rows * col_cols);
    Eigen::Map<const MatRM<T>> Wm2(pker->value.data(), K, col_rows);
    Eigen::Map<MatRM<T>> dW(gker.data(), K, col_rows);
    for (int n = 0; n < N; ++n) {
      Eigen::Map<const MatRM<T>> dY(
          node.grad.data() + static_cast<std::size_t>(n) * K * col_cols, K,
          col_cols);
      detail::im2col(pin->value.data() + static_cast<std::size_t>(n) * C * H * W,
                     C, H, W, kh, kw, stride, pad, oh, ow, colbuf.data());
      Eigen::Map<const MatRM<T>> colm(colbuf.data(), col_rows, col_cols);
      dW.noalias() += dY * colm.transpose();
      Eigen::Map<MatRM<T>> dcolm(dcol.data(), col_rows, col_cols);
      dcolm.noalias() = Wm2.transpose() * dY;
      detail::col2im_add(dcol.data(), C, H, W, kh, kw, stride, pad, oh, ow,
                         gin.data() + static_cast<std::size_t>(n) * C * H * W);
    }
  };
  return Tensor<T>::make_op({N, K, oh, ow}, std::move(out), {input, kernel},
                            backward);
}

// Per-output-channel bias: x [N,K,H,W] + b [K]
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  const Shape& s = x.shape();
  if (s.size() != 4 || b.shape() != Shape{s[1]})
    fail(ErrorKind::shape, "add_channel_bias: " + shape_str(s) + " + " +
                               shape_str(b.shape()));
  const int N = s[0], K = s[1];
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  std::vector<T> out(x.size());
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const std::size_t base = (static_cast<std::size_t>(n) * K + k) * hw;
      for (std::size_t i = 0; i < hw; ++i)
        out[base + i] = x.data()[base + i] + b.data()[k];
    }
  auto backward = [N, K, hw](typename Tensor<T>::Node& node) {
    auto& gx = node.parents[0]->ensure_grad();
    auto& gb = node.parents[1]->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) {
        const std::size_t base = (static_cast<std::size_t>(n) * K + k) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          gx[base + i] += node.grad[base + i];
          gb[k] += node.grad[base + i];
        }
      }
  };
  return Tensor<T>::make_op(s, std::move(out), {x, b}, backward);
}

// Max pool; gradient routes to the argmax, ties to the first index in
// row-major scan.
template <typename T>
Tensor<T> max_pool(const Tensor<T>& input, int window, int stride) {
  const Shape& s = input.shape();
  if (s.size() != 4) fail(ErrorKind::shape, "max_pool: expected 4D input");
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  if (window > H || window > W)
    fail(ErrorKind::shape, "max_pool: window exceeds spatial extent " +
                               shape_str(s));
  const int oh = (H - window) / stride + 1;
  const int ow = (W - window) / stride + 1;
  std::vector<T> out(static_cast<std::size_t>(N) * C * oh * ow);
  std::vector<int> argmax(out.size());
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* plane =
          input.data().data() + (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj, ++o) {
          int bi = oi * stride, bj = oj * stride;
          T best = plane[bi * W + bj];
          int bestidx = bi * W + bj;
          for (int ki = 0; ki < window; ++ki)
            for (int kj = 0; kj < window; ++kj) {
              int idx = (bi + ki) * W + (bj + kj);
              if (plane[idx] > best) {
                best = plane[idx];
                bestidx = idx;
              }
            }
          out[o] = best;
          argmax[o] = bestidx;
        }
    }
  auto backward = [N, C, H, W, oh, ow, argmax](typename Tensor<T>::Node& node) {
    auto& gin = node.parents[0]->ensure_grad();
    std::size_t o2 = 0;
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        T* gplane = gin.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
        for (int i = 0; i < oh * ow; ++i, ++o2)
          gplane[argmax[o2]] += node.grad[o2];
      }
  };
  return Tensor<T>::make_op({N, C, oh, ow}, std::move(out), {input}, backward);
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, int factor) {
  const Shape& s = input.shape();
  if (s.size() != 4) fail(ErrorKind::shape, "upsample_nearest: expected 4D input");
  if (factor < 1) fail(ErrorKind::shape, "upsample_nearest: factor must be >= 1");
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  const int OH = H * factor, OW = W * factor;
  std::vector<T> out(static_cast<std::size_t>(N) * C * OH * OW);
  for (int nc = 0; nc < N * C; ++nc) {
    const T* in = input.data().data() + static_cast<std::size_t>(nc) * H * W;
    T* op = out.data() + static_cast<std::size_t>(nc) * OH * OW;
    for (int i = 0; i < OH; ++i)
      for (int j = 0; j < OW; ++j)
        op[i * OW + j] = in[(i / factor) * W + (j / factor)];
  }
  auto backward = [N, C, H, W, OH, OW, factor](typename Tensor<T>::Node& node) {
    auto& gin = node.parents[0]->ensure_grad();
    for (int nc = 0; nc < N * C; ++nc) {
      T* gi = gin.data() + static_cast<std::size_t>(nc) * H * W;
      const T* go = node.grad.data() + static_cast<std::size_t>(nc) * OH * OW;
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j)
          gi[(i / factor) * W + (j / factor)] += go[i * OW + j];
    }
  };
  return Tensor<T>::make_op({N, C, OH, OW}, std::move(out), {input}, backward);
}

// Batch normalization over N,H,W per channel. Training mode uses batch
// statistics and updates running stats by EMA; eval mode uses running stats.
// Running buffers live outside the graph (layer state), captured by pointer.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::vector<T>* running_mean,
                     std::vector<T>* running_var, bool training,
                     T momentum = T(0.1), T eps = T(1e-5)) {
  const Shape& s = x.shape();
  if (s.size() != 4) fail(ErrorKind::shape, "batch_norm: expected 4D input");
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
    fail(ErrorKind::shape, "batch_norm: gamma/beta must be [C]");
  const std::size_t m = static_cast<std::size_t>(N) * H * W;  // per channel
  const std::size_t hw = static_cast<std::size_t>(H) * W;

  std::vector<T> mu(C), var(C);
  if (training) {
    for (int c = 0; c < C; ++c) {
      T sum = 0, sq = 0;
      for (int n = 0; n < N; ++n) {
        const T* p = x.data().data() + (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      mu[c] = sum / static_cast<T>(m);
      var[c] = sq / static_cast<T>(m) - mu[c] * mu[c];
      if (var[c] < T(0)) var[c] = T(0);
    }
    if (running_mean) {
      for (int c = 0; c < C; ++c) {
        (*running_mean)[c] = (T(1) - momentum) * (*running_mean)[c] + momentum * mu[c];
        (*running_var)[c] = (T(1) - momentum) * (*running_var)[c] + momentum * var[c];
      }
    }
  } else {
    if (!running_mean || !running_var)
      fail(ErrorKind::shape, "batch_norm: eval mode requires running stats");
    mu = *running_mean;
    var = *running_var;
  }

  std::vector<T> xhat(x.size()), out(x.size());
  std::vector<T> inv_std(C);
  for (int c = 0; c < C; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + eps);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        xhat[base + i] = (x.data()[base + i] - mu[c]) * inv_std[c];
        out[base + i] = gamma.data()[c] * xhat[base + i] + beta.data()[c];
      }
    }

  auto backward = [N, C, hw, m, xhat, inv_std, training](
                      typename Tensor<T>::Node& node) {
    auto& gx = node.parents[0]->ensure_grad();
    auto& gg = node.parents[1]->ensure_grad();
    auto& gb = node.parents[2]->ensure_grad();
    const auto& gamma_v = node.parents[1]->value;
    for (int c = 0; c < C; ++c) {
      T sum_dy = 0, sum_dy_xhat = 0;
      for (int n = 0; n < N; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += node.grad[base + i];
          sum_dy_xhat += node.grad[base + i] * xhat[base + i];
        }
      }
      gg[c] += sum_dy_xhat;
      gb[c] += sum_dy;
      const T k = gamma_v[c] * inv_std[c];
      const T inv_m = T(1) / static_cast<T>(m);
      for (int n = 0; n < N; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          if (training) {
            gx[base + i] += k * (node.grad[base + i] - sum_dy * inv_m -
                                 xhat[base + i] * sum_dy_xhat * inv_m);
          } else {
            gx[base + i] += k * node.grad[base + i];
          }
        }
      }
    }
  };
  return Tensor<T>::make_op(s, std::move(out), {x, gamma, beta}, backward);
}

// Conditional instance normalization: per-(sample, channel) normalization
// over H,W, then affine scale/shift taken from row style_index of the banks
// ([S,C] each). Only the selected row receives gradient.
template <typename T>
Tensor<T> instance_norm_conditional(const Tensor<T>& x, int style_index,
                                    const Tensor<T>& scale_bank,
                                    const Tensor<T>& shift_bank,
                                    T eps = T(1e-5)) {
  const Shape& s = x.shape();
  if (s.size() != 4) fail(ErrorKind::shape, "instance_norm: expected 4D input");
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  const Shape& bs = scale_bank.shape();
  if (bs.size() != 2 || bs[1] != C || shift_bank.shape() != bs)
    fail(ErrorKind::shape, "instance_norm: banks must be [S,C] matching input");
  const int S = bs[0];
  if (style_index < 0 || style_index >= S)
    fail(ErrorKind::usage, "style index " + std::to_string(style_index) +
                               " out of range [0," + std::to_string(S) + ")");
  const std::size_t hw = static_cast<std::size_t>(H) * W;

  std::vector<T> xhat(x.size()), out(x.size());
  std::vector<T> inv_std(static_cast<std::size_t>(N) * C);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
      T sum = 0, sq = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        sum += x.data()[base + i];
        sq += x.data()[base + i] * x.data()[base + i];
      }
      T mu = sum / static_cast<T>(hw);
      T var = sq / static_cast<T>(hw) - mu * mu;
      if (var < T(0)) var = T(0);
      T istd = T(1) / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(n) * C + c] = istd;
      const T g = scale_bank.data()[static_cast<std::size_t>(style_index) * C + c];
      const T b = shift_bank.data()[static_cast<std::size_t>(style_index) * C + c];
      for (std::size_t i = 0; i < hw; ++i) {
        xhat[base + i] = (x.data()[base + i] - mu) * istd;
        out[base + i] = g * xhat[base + i] + b;
      }
    }

  auto backward = [N, C, hw, xhat, inv_std, style_index](
                      typename Tensor<T>::Node& node) {
    auto& gx = node.parents[0]->ensure_grad();
    auto& gscale = node.parents[1]->ensure_grad();
    auto& gshift = node.parents[2]->ensure_grad();
    const auto& scale_v = node.parents[1]->value;
    const std::size_t row = static_cast<std::size_t>(style_index) * C;
    const T inv_hw = T(1) / static_cast<T>(hw);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
        T sum_dy = 0, sum_dy_xhat = 0;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += node.grad[base + i];
          sum_dy_xhat += node.grad[base + i] * xhat[base + i];
        }
        gscale[row + c] += sum_dy_xhat;
        gshift[row + c] += sum_dy;
        const T k = scale_v[row + c] * inv_std[static_cast<std::size_t>(n) * C + c];
        for (std::size_t i = 0; i < hw; ++i)
          gx[base + i] += k * (node.grad[base + i] - sum_dy * inv_hw -
                               xhat[base + i] * sum_dy_xhat * inv_hw);
      }
  };
  return Tensor<T>::make_op(s, std::move(out), {x, scale_bank, shift_bank},
                            backward);
}

// G[i][j] = sum_k a_i[k] * a_j[k] over activations [C,U].
template <typename T>
Tensor<T> gram_matrix(const Tensor<T>& a) {
  const Shape& s = a.shape();
  if (s.size() != 2 || s[1] < 1)
    fail(ErrorKind::shape, "gram_matrix: expected [C,U] with U >= 1, got " +
                               shape_str(s));
  const int C = s[0], U = s[1];
  std::vector<T> out(static_cast<std::size_t>(C) * C);
  Eigen::Map<const MatRM<T>> A(a.data().data(), C, U);
  Eigen::Map<MatRM<T>> G(out.data(), C, C);
  G.noalias() = A * A.transpose();
  auto backward = [C, U](typename Tensor<T>::Node& node) {
    auto& ga = node.parents[0]->ensure_grad();
    Eigen::Map<const MatRM<T>> A2(node.parents[0]->value.data(), C, U);
    Eigen::Map<const MatRM<T>> dG(node.grad.data(), C, C);
    Eigen::Map<MatRM<T>> dA(ga.data(), C, U);
    dA.noalias() += (dG + dG.transpose()) * A2;
  };
  return Tensor<T>::make_op({C, C}, std::move(out), {a}, backward);
}

// Extract a spatial window [r0,r1) x [c0,c1) of sample n as a [C,U] view for
// localized Gram computation; gradient scatters back into the window.
template <typename T>
Tensor<T> slice_spatial(const Tensor<T>& x, int n, int r0, int r1, int c0,
                        int c1) {
  const Shape& s = x.shape();
  if (s.size() != 4) fail(ErrorKind::shape, "slice_spatial: expected 4D input");
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  if (n < 0 || n >= N || r0 < 0 || r1 > H || c0 < 0 || c1 > W || r0 >= r1 ||
      c0 >= c1)
    fail(ErrorKind::shape, "slice_spatial: window out of bounds for " +
                               shape_str(s));
  const int sh = r1 - r0, sw = c1 - c0;
  std::vector<T> out(static_cast<std::size_t>(C) * sh * sw);
  for (int c = 0; c < C; ++c) {
    const T* plane =
        x.data().data() + (static_cast<std::size_t>(n) * C + c) * H * W;
    T* op = out.data() + static_cast<std::size_t>(c) * sh * sw;
    for (int i = 0; i < sh; ++i)
      for (int j = 0; j < sw; ++j)
        op[i * sw + j] = plane[(r0 + i) * W + (c0 + j)];
  }
  auto backward = [n, C, H, W, r0, c0, sh, sw](typename Tensor<T>::Node& node) {
    auto& gx = node.parents[0]->ensure_grad();
    for (int c = 0; c < C; ++c) {
      T* gplane = gx.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
      const T* gp = node.grad.data() + static_cast<std::size_t>(c) * sh * sw;
      for (int i = 0; i < sh; ++i)
        for (int j = 0; j < sw; ++j)
          gplane[(r0 + i) * W + (c0 + j)] += gp[i * sw + j];
    }
  };
  return Tensor<T>::make_op({C, sh * sw}, std::move(out), {x}, backward);
}

// Whole-sample activations flattened to [C, H*W].
template <typename T>
Tensor<T> flatten_spatial(const Tensor<T>& x, int n) {
  const Shape& s = x.shape();
  return slice_spatial(x, n, 0, s[2], 0, s[3]);
}

}  // namespace nsm
