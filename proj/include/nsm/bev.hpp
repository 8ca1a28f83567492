#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "nsm/common.hpp"

namespace nsm {

struct Point {
  float x;  // meters forward
  float y;  // meters left
  float z;  // meters up
  float intensity;  // [0,1], clamped on ingest
};

struct PointCloud {
  std::vector<Point> points;

  void add(float x, float y, float z, float intensity) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) return;
    points.push_back({x, y, z, std::clamp(intensity, 0.0f, 1.0f)});
  }
};

enum class BevEncoding { binary_occupancy, density };

struct BevConfig {
  float x_min = 0.0f, x_max = 40.0f;
  float y_min = -20.0f, y_max = 20.0f;
  float z_min = -2.5f, z_max = 1.0f;
  int resolution = 416;
  BevEncoding encoding = BevEncoding::binary_occupancy;

  void validate() const {
    if (x_max <= x_min || y_max <= y_min || z_max <= z_min)
      fail(ErrorKind::usage, "bev config: each range needs max > min");
    if (resolution < 1) fail(ErrorKind::usage, "bev config: resolution < 1");
    const float cx = (x_max - x_min) / resolution;
    const float cy = (y_max - y_min) / resolution;
    if (std::abs(cx - cy) > 1e-6f * std::max(cx, cy))
      fail(ErrorKind::usage, "bev config: x and y spans must give square cells");
  }

  float cell_size() const { return (x_max - x_min) / resolution; }
};

struct BevGrid {
  std::vector<float> cells;  // row-major, resolution x resolution, in [0,1]
  BevConfig config;

  BevGrid() = default;
  explicit BevGrid(const BevConfig& cfg)
      : cells(static_cast<std::size_t>(cfg.resolution) * cfg.resolution, 0.0f),
        config(cfg) {}

  float& at(int row, int col) {
    return cells[static_cast<std::size_t>(row) * config.resolution + col];
  }
  float at(int row, int col) const {
    return cells[static_cast<std::size_t>(row) * config.resolution + col];
  }
};

inline double normalize_yaw(double yaw) {
  const double two_pi = 2.0 * std::numbers::pi;
  yaw = std::fmod(yaw, two_pi);
  if (yaw <= -std::numbers::pi) yaw += two_pi;
  if (yaw > std::numbers::pi) yaw -= two_pi;
  return yaw;
}

struct OrientedBox {
  double cx = 0, cy = 0;       // meters
  double width = 1, length = 1;  // meters, width across y at yaw 0
  double yaw = 0;              // radians in (-pi, pi]
  int class_id = 0;
  double score = 0;

  // Corners in (x, y) meters, counterclockwise.
  std::array<std::array<double, 2>, 4> corners() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double hl = length / 2, hw = width / 2;
    std::array<std::array<double, 2>, 4> out;
    const double dx[4] = {hl, -hl, -hl, hl};
    const double dy[4] = {hw, hw, -hw, -hw};
    for (int i = 0; i < 4; ++i)
      out[i] = {cx + c * dx[i] - s * dy[i], cy + s * dx[i] + c * dy[i]};
    return out;
  }

  double area() const { return width * length; }
};

// Row 0 is max x (forward at the top of the image); column 0 is y_min.
// Returns nullopt for out-of-range coordinates (half-open [min, max) cells).
inline std::optional<std::pair<int, int>> bev_cell(const BevConfig& cfg,
                                                   float x, float y) {
  const float cell = cfg.cell_size();
  if (x < cfg.x_min || y < cfg.y_min) return std::nullopt;
  const int xi = static_cast<int>(std::floor((x - cfg.x_min) / cell));
  const int yi = static_cast<int>(std::floor((y - cfg.y_min) / cell));
  if (xi < 0 || xi >= cfg.resolution || yi < 0 || yi >= cfg.resolution)
    return std::nullopt;
  return std::make_pair(cfg.resolution - 1 - xi, yi);
}

inline BevGrid project_to_bev(const PointCloud& pcl, const BevConfig& cfg) {
  cfg.validate();
  BevGrid grid(cfg);
  std::vector<int> counts;
  if (cfg.encoding == BevEncoding::density)
    counts.assign(grid.cells.size(), 0);
  for (const Point& p : pcl.points) {
    if (p.z < cfg.z_min || p.z >= cfg.z_max) continue;
    auto rc = bev_cell(cfg, p.x, p.y);
    if (!rc) continue;
    const std::size_t idx =
        static_cast<std::size_t>(rc->first) * cfg.resolution + rc->second;
    if (cfg.encoding == BevEncoding::binary_occupancy)
      grid.cells[idx] = 1.0f;
    else
      counts[idx] += 1;
  }
  if (cfg.encoding == BevEncoding::density) {
    const int maxc = counts.empty() ? 0 : *std::max_element(counts.begin(),
                                                            counts.end());
    if (maxc > 0)
      for (std::size_t i = 0; i < counts.size(); ++i)
        grid.cells[i] = static_cast<float>(counts[i]) / maxc;
  }
  return grid;
}

struct Box3d {
  double cx = 0, cy = 0, cz = 0;
  double width = 1, length = 1, height = 1;
  double yaw = 0;
  int class_id = 0;
};

// Drops z and height; filters boxes whose center lies outside the x/y range.
inline std::optional<OrientedBox> box3d_to_bev(const Box3d& box,
                                               const BevConfig& cfg) {
  if (box.cx < cfg.x_min || box.cx >= cfg.x_max || box.cy < cfg.y_min ||
      box.cy >= cfg.y_max)
    return std::nullopt;
  OrientedBox out;
  out.cx = box.cx;
  out.cy = box.cy;
  out.width = box.width;
  out.length = box.length;
  out.yaw = normalize_yaw(box.yaw);
  out.class_id = box.class_id;
  return out;
}

namespace detail {

using Poly = std::vector<std::array<double, 2>>;

inline double polygon_area(const Poly& p) {
  double a = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % p.size()];
    a += u[0] * v[1] - v[0] * u[1];
  }
  return std::abs(a) / 2.0;
}

// Sutherland-Hodgman: clip subject polygon against convex clip polygon
// (counterclockwise).
inline Poly clip_polygon(Poly subject, const Poly& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const auto& a = clip[e];
    const auto& b = clip[(e + 1) % clip.size()];
    const double ex = b[0] - a[0], ey = b[1] - a[1];
    auto inside = [&](const std::array<double, 2>& p) {
      return ex * (p[1] - a[1]) - ey * (p[0] - a[0]) >= 0;
    };
    Poly out;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const auto& cur = subject[i];
      const auto& prev = subject[(i + subject.size() - 1) % subject.size()];
      const bool cin = inside(cur), pin = inside(prev);
      if (cin != pin) {
        const double dcur = ex * (cur[1] - a[1]) - ey * (cur[0] - a[0]);
        const double dprev = ex * (prev[1] - a[1]) - ey * (prev[0] - a[0]);
        const double t = dprev / (dprev - dcur);
        out.push_back({prev[0] + t * (cur[0] - prev[0]),
                       prev[1] + t * (cur[1] - prev[1])});
      }
      if (cin) out.push_back(cur);
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace detail

inline double oriented_intersection_area(const OrientedBox& a,
                                         const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  detail::Poly pa(ca.begin(), ca.end());
  detail::Poly pb(cb.begin(), cb.end());
  detail::Poly inter = detail::clip_polygon(pa, pb);
  if (inter.size() < 3) return 0.0;
  return detail::polygon_area(inter);
}

inline double oriented_iou(const OrientedBox& a, const OrientedBox& b) {
  const double inter = oriented_intersection_area(a, b);
  if (inter < 1e-12) return 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni < 1e-12) return 0.0;
  return inter / uni;
}

// Greedy descending-score suppression. Kept boxes keep score order (ties
// resolved by insertion index).
inline std::vector<OrientedBox> nms_oriented(std::vector<OrientedBox> boxes,
                                             double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return boxes[i].score > boxes[j].score;
  });
  std::vector<OrientedBox> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(boxes[i]);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && oriented_iou(boxes[i], boxes[j]) > iou_threshold)
        suppressed[j] = true;
    }
  }
  return kept;
}

}  // namespace nsm
