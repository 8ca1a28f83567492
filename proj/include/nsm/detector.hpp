#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nsm/bev.hpp"
#include "nsm/layers.hpp"
#include "nsm/tensor.hpp"

namespace nsm {

// Grid-based one-shot oriented-box detector: YOLO-style cells and anchors,
// orientation regressed as a (cos, sin) pair, no height/z outputs.
struct DetectorConfig {
  int input_resolution = 416;
  int grid_cells = 13;  // S
  std::vector<std::pair<double, double>> anchors = {
      {1.6, 3.9}, {3.9, 1.6}, {2.0, 2.0}, {1.0, 5.0}, {5.0, 1.0}};  // (w, l) m
  int class_count = 1;
  double confidence_threshold = 0.5;
  double nms_iou_threshold = 0.45;
  double w_coord = 5.0;
  double w_noobj = 0.5;
  BevConfig bev;

  void validate() const {
    if (grid_cells < 1 || input_resolution % grid_cells != 0)
      fail(ErrorKind::usage, "detector: input_resolution must be divisible by S");
    if (anchors.empty()) fail(ErrorKind::usage, "detector: needs anchors");
    for (auto& [w, l] : anchors)
      if (w <= 0 || l <= 0) fail(ErrorKind::usage, "detector: anchors must be > 0");
  }

  int num_anchors() const { return static_cast<int>(anchors.size()); }
  int channels_per_anchor() const { return 7 + class_count; }
  int out_channels() const { return num_anchors() * channels_per_anchor(); }

  static DetectorConfig desk(const BevConfig& bev_cfg) {
    DetectorConfig cfg;
    cfg.bev = bev_cfg;
    cfg.input_resolution = bev_cfg.resolution;
    cfg.grid_cells = 8;
    cfg.anchors = {{2.0, 4.5}, {4.5, 2.0}};
    return cfg;
  }
};

// Per cell, per anchor: tx, ty (offsets in (0,1)), tw, tl (log-scale size
// ratios), t_re, t_im (cos/sin of yaw), objectness, class scores.
struct TargetTensor {
  int s = 0, a = 0, c = 1;
  std::vector<float> values;  // [A*(7+C), S, S] row-major, channel-major
  std::vector<std::uint8_t> assigned;  // [A, S, S]
  int dropped = 0;  // boxes that found no free (cell, anchor)

  std::size_t value_index(int anchor, int field, int row, int col) const {
    return ((static_cast<std::size_t>(anchor) * (7 + c) + field) * s + row) * s +
           col;
  }
  std::size_t mask_index(int anchor, int row, int col) const {
    return (static_cast<std::size_t>(anchor) * s + row) * s + col;
  }
};

namespace detail {

// IoU of two axis-aligned footprints sharing a center.
inline double centered_iou(double w1, double l1, double w2, double l2) {
  const double inter = std::min(w1, w2) * std::min(l1, l2);
  return inter / (w1 * l1 + w2 * l2 - inter);
}

}  // namespace detail

// Normalized grid coordinates: gx from y (column axis), gy from x with the
// forward direction at the top, matching the BEV image layout.
inline void box_to_grid_coords(const OrientedBox& box, const DetectorConfig& cfg,
                               double& gx, double& gy) {
  const auto& b = cfg.bev;
  gx = (box.cy - b.y_min) / (b.y_max - b.y_min) * cfg.grid_cells;
  gy = (b.x_max - box.cx) / (b.x_max - b.x_min) * cfg.grid_cells;
}

inline TargetTensor encode_targets(const std::vector<OrientedBox>& labels,
                                   const DetectorConfig& cfg) {
  cfg.validate();
  TargetTensor t;
  t.s = cfg.grid_cells;
  t.a = cfg.num_anchors();
  t.c = cfg.class_count;
  t.values.assign(static_cast<std::size_t>(cfg.out_channels()) * t.s * t.s, 0.0f);
  t.assigned.assign(static_cast<std::size_t>(t.a) * t.s * t.s, 0);

  for (const auto& box : labels) {
    double gx, gy;
    box_to_grid_coords(box, cfg, gx, gy);
    const int col = static_cast<int>(std::floor(gx));
    const int row = static_cast<int>(std::floor(gy));
    if (col < 0 || col >= t.s || row < 0 || row >= t.s) {
      ++t.dropped;
      continue;
    }
    // Anchors ranked by footprint IoU, ties to the lowest index; a claimed
    // (cell, anchor) pushes the box to its next-best anchor.
    std::vector<std::pair<double, int>> ranked;
    for (int ai = 0; ai < t.a; ++ai)
      ranked.emplace_back(-detail::centered_iou(box.width, box.length,
                                                cfg.anchors[ai].first,
                                                cfg.anchors[ai].second),
                          ai);
    std::stable_sort(ranked.begin(), ranked.end());
    int chosen = -1;
    for (auto& [neg_iou, ai] : ranked) {
      if (!t.assigned[t.mask_index(ai, row, col)]) {
        chosen = ai;
        break;
      }
    }
    if (chosen < 0) {
      ++t.dropped;
      continue;
    }
    t.assigned[t.mask_index(chosen, row, col)] = 1;
    const auto& anchor = cfg.anchors[chosen];
    t.values[t.value_index(chosen, 0, row, col)] = static_cast<float>(gx - col);
    t.values[t.value_index(chosen, 1, row, col)] = static_cast<float>(gy - row);
    t.values[t.value_index(chosen, 2, row, col)] =
        static_cast<float>(std::log(box.width / anchor.first));
    t.values[t.value_index(chosen, 3, row, col)] =
        static_cast<float>(std::log(box.length / anchor.second));
    t.values[t.value_index(chosen, 4, row, col)] = static_cast<float>(std::cos(box.yaw));
    t.values[t.value_index(chosen, 5, row, col)] = static_cast<float>(std::sin(box.yaw));
    t.values[t.value_index(chosen, 6, row, col)] = 1.0f;
    const int cls = std::clamp(box.class_id, 0, t.c - 1);
    t.values[t.value_index(chosen, 7 + cls, row, col)] = 1.0f;
  }
  return t;
}

template <typename T>
struct DetectorLossRecord {
  T coord = 0, size = 0, orient = 0, obj = 0, noobj = 0, cls = 0;
  T total = 0;  // w_coord*coord + size + orient + obj + w_noobj*noobj + cls
};

// Multi-part squared-error loss over the raw prediction map, one custom
// autodiff node with a hand-derived backward. Offsets, objectness and class
// scores pass through a sigmoid; sizes and orientation stay raw.
template <typename T>
std::pair<Tensor<T>, DetectorLossRecord<T>> detector_loss(
    const Tensor<T>& predictions, const std::vector<TargetTensor>& targets,
    const DetectorConfig& cfg) {
  const Shape& ps = predictions.shape();
  const int n = ps[0];
  if (ps.size() != 4 || ps[1] != cfg.out_channels() ||
      ps[2] != cfg.grid_cells || ps[3] != cfg.grid_cells)
    fail(ErrorKind::shape, "detector_loss: prediction shape " + shape_str(ps) +
                               " does not match config");
  if (static_cast<int>(targets.size()) != n)
    fail(ErrorKind::shape, "detector_loss: batch size mismatch");
  const int s = cfg.grid_cells, a = cfg.num_anchors(), nc = cfg.class_count;
  const std::size_t per_sample = static_cast<std::size_t>(cfg.out_channels()) * s * s;

  auto sig = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
  DetectorLossRecord<T> rec;
  // dtotal/dpred, filled during the forward sweep.
  std::vector<T> dpred(predictions.size(), T(0));
  const T w_coord = static_cast<T>(cfg.w_coord);
  const T w_noobj = static_cast<T>(cfg.w_noobj);
  const T inv_n = T(1) / static_cast<T>(n);

  for (int b = 0; b < n; ++b) {
    const TargetTensor& t = targets[b];
    const T* p = predictions.data().data() + b * per_sample;
    T* dp = dpred.data() + b * per_sample;
    for (int ai = 0; ai < a; ++ai)
      for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) {
          const bool on = t.assigned[t.mask_index(ai, r, c)] != 0;
          const std::size_t oidx = t.value_index(ai, 6, r, c);
          const T pobj = sig(p[oidx]);
          if (on) {
            // coord (sigmoid offsets)
            for (int f = 0; f < 2; ++f) {
              const std::size_t i = t.value_index(ai, f, r, c);
              const T pv = sig(p[i]);
              const T d = pv - static_cast<T>(t.values[i]);
              rec.coord += d * d * inv_n;
              dp[i] += w_coord * T(2) * d * pv * (T(1) - pv) * inv_n;
            }
            // size (raw log-ratios)
            for (int f = 2; f < 4; ++f) {
              const std::size_t i = t.value_index(ai, f, r, c);
              const T d = p[i] - static_cast<T>(t.values[i]);
              rec.size += d * d * inv_n;
              dp[i] += T(2) * d * inv_n;
            }
            // orientation (raw cos/sin pair)
            for (int f = 4; f < 6; ++f) {
              const std::size_t i = t.value_index(ai, f, r, c);
              const T d = p[i] - static_cast<T>(t.values[i]);
              rec.orient += d * d * inv_n;
              dp[i] += T(2) * d * inv_n;
            }
            // objectness toward 1
            {
              const T d = pobj - T(1);
              rec.obj += d * d * inv_n;
              dp[oidx] += T(2) * d * pobj * (T(1) - pobj) * inv_n;
            }
            // class scores (degenerate at one class)
            for (int f = 0; f < nc; ++f) {
              const std::size_t i = t.value_index(ai, 7 + f, r, c);
              const T pv = sig(p[i]);
              const T d = pv - static_cast<T>(t.values[i]);
              rec.cls += d * d * inv_n;
              dp[i] += T(2) * d * pv * (T(1) - pv) * inv_n;
            }
          } else {
            const T d = pobj;
            rec.noobj += d * d * inv_n;
            dp[oidx] += w_noobj * T(2) * d * pobj * (T(1) - pobj) * inv_n;
          }
        }
  }
  rec.total = w_coord * rec.coord + rec.size + rec.orient + rec.obj +
              w_noobj * rec.noobj + rec.cls;

  auto loss = Tensor<T>::make_op(
      {1}, {rec.total}, {predictions},
      [dpred = std::move(dpred)](typename Tensor<T>::Node& node) {
        auto& g = node.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += node.grad[0] * dpred[i];
      });
  return {loss, rec};
}

struct DecodeStats {
  int zero_norm_orientations = 0;
};

// Inverse of encode_targets on a single sample's raw output map.
template <typename T>
std::vector<OrientedBox> decode_predictions(const Tensor<T>& raw,
                                            const DetectorConfig& cfg,
                                            DecodeStats* stats = nullptr,
                                            bool skip_nms = false) {
  const Shape& s4 = raw.shape();
  Shape expect{cfg.out_channels(), cfg.grid_cells, cfg.grid_cells};
  const T* p = raw.data().data();
  if (s4.size() == 4 && s4[0] == 1)
    expect.insert(expect.begin(), 1);
  if (s4 != expect)
    fail(ErrorKind::shape, "decode_predictions: unexpected shape " + shape_str(s4));
  const int s = cfg.grid_cells, a = cfg.num_anchors(), nc = cfg.class_count;
  TargetTensor layout;
  layout.s = s;
  layout.a = a;
  layout.c = nc;
  auto sig = [](T v) { return 1.0 / (1.0 + std::exp(-static_cast<double>(v))); };

  std::vector<OrientedBox> boxes;
  const auto& bev = cfg.bev;
  for (int ai = 0; ai < a; ++ai)
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        const double obj = sig(p[layout.value_index(ai, 6, r, c)]);
        if (obj < cfg.confidence_threshold) continue;
        OrientedBox box;
        const double gx = c + sig(p[layout.value_index(ai, 0, r, c)]);
        const double gy = r + sig(p[layout.value_index(ai, 1, r, c)]);
        box.cy = bev.y_min + gx / s * (bev.y_max - bev.y_min);
        box.cx = bev.x_max - gy / s * (bev.x_max - bev.x_min);
        box.width = cfg.anchors[ai].first *
                    std::exp(static_cast<double>(p[layout.value_index(ai, 2, r, c)]));
        box.length = cfg.anchors[ai].second *
                     std::exp(static_cast<double>(p[layout.value_index(ai, 3, r, c)]));
        const double re = p[layout.value_index(ai, 4, r, c)];
        const double im = p[layout.value_index(ai, 5, r, c)];
        const double norm = std::hypot(re, im);
        if (norm < 1e-8) {
          box.yaw = 0;
          if (stats) ++stats->zero_norm_orientations;
        } else {
          box.yaw = std::atan2(im / norm, re / norm);
        }
        int best_cls = 0;
        double best_p = -1;
        for (int f = 0; f < nc; ++f) {
          const double cp = sig(p[layout.value_index(ai, 7 + f, r, c)]);
          if (cp > best_p) {
            best_p = cp;
            best_cls = f;
          }
        }
        box.class_id = best_cls;
        box.score = obj;
        boxes.push_back(box);
      }
  if (skip_nms) return boxes;
  return nms_oriented(std::move(boxes), cfg.nms_iou_threshold);
}

// Backbone: conv/batch-norm/leaky-relu blocks ending in the S x S x
// A*(7+classes) head. Desk preset uses 6 conv blocks.
template <typename T>
struct DetectorNet {
  std::vector<Conv2dLayer<T>> convs;
  std::vector<BatchNorm2dLayer<T>> bns;
  Conv2dLayer<T> head;
  std::string descriptor_;

  DetectorNet() = default;
  DetectorNet(const DetectorConfig& cfg, Rng& rng) {
    const int down_needed = cfg.input_resolution / cfg.grid_cells;
    // (channels, stride) chain; strides multiply to input_resolution / S.
    std::vector<std::pair<int, int>> blocks;
    if (down_needed == 8) {
      blocks = {{16, 1}, {32, 2}, {32, 1}, {64, 2}, {64, 2}};
    } else if (down_needed == 32) {
      blocks = {{16, 2}, {32, 2}, {64, 2}, {128, 2}, {128, 2}};
    } else {
      int remaining = down_needed;
      int ch = 16;
      while (remaining > 1) {
        blocks.emplace_back(ch, 2);
        ch = std::min(ch * 2, 128);
        remaining /= 2;
      }
      if (blocks.empty()) blocks = {{16, 1}};
    }
    int in = 1;
    for (auto& [ch, stride] : blocks) {
      convs.emplace_back(in, ch, 3, stride, 1, rng);
      bns.emplace_back(ch);
      in = ch;
    }
    head = Conv2dLayer<T>(in, cfg.out_channels(), 1, 1, 0, rng);
    descriptor_ = "detector:blocks=" + std::to_string(blocks.size() + 1) +
                  ",S=" + std::to_string(cfg.grid_cells) +
                  ",A=" + std::to_string(cfg.num_anchors());
  }

  void set_training(bool training) {
    for (auto& bn : bns) bn.training = training;
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < convs.size(); ++i)
      h = leaky_relu(bns[i].forward(convs[i].forward(h)), T(0.1));
    return head.forward(h);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect(prefix + ".conv" + std::to_string(i), out);
      bns[i].collect(prefix + ".bn" + std::to_string(i), out);
    }
    head.collect(prefix + ".head", out);
  }

  void collect_buffers(const std::string& prefix, NamedParams<T>& out) {
    for (std::size_t i = 0; i < bns.size(); ++i)
      bns[i].collect_buffers(prefix + ".bn" + std::to_string(i), out);
  }

  const std::string& descriptor() const { return descriptor_; }
};

}  // namespace nsm
