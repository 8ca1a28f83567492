#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "nsm/bev.hpp"
#include "nsm/common.hpp"
#include "nsm/formats.hpp"
#include "nsm/rng.hpp"

namespace nsm {

// Procedural paired-by-construction sim/real scenes: clean rectangular car
// outlines plus wall segments, with a known corruption model standing in for
// the real sensor.
struct SceneSpec {
  int min_cars = 1;
  int max_cars = 4;
  double car_width_mean = 2.0, car_width_sd = 0.2;
  double car_length_mean = 4.5, car_length_sd = 0.4;
  int min_walls = 1;
  int max_walls = 3;
  BevConfig bev;

  SceneSpec() { bev.resolution = 64; }
};

struct CorruptionModel {
  double dropout_p = 0.3;     // occupied cell cleared
  double jitter_sigma = 0.7;  // cell-unit Gaussian displacement
  double ray_shadow = 0.5;    // per-car occlusion wedge probability
  double speckle_rate = 0.002;  // spurious occupancy

  void validate() const {
    if (dropout_p < 0 || dropout_p > 1 || ray_shadow < 0 || ray_shadow > 1 ||
        speckle_rate < 0 || speckle_rate > 1 || jitter_sigma < 0)
      fail(ErrorKind::usage, "corruption model: probabilities must be in [0,1]");
  }
};

namespace detail {

// Rasterize the perimeter of an oriented rectangle (LiDAR sees surfaces, not
// interiors).
inline void draw_box_outline(BevGrid& grid, const OrientedBox& box) {
  const auto cs = box.corners();
  const double cell = grid.config.cell_size();
  for (int e = 0; e < 4; ++e) {
    const auto& a = cs[e];
    const auto& b = cs[(e + 1) % 4];
    const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
    const int steps = std::max(2, static_cast<int>(std::ceil(len / (cell * 0.4))));
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      auto rc = bev_cell(grid.config, static_cast<float>(a[0] + t * (b[0] - a[0])),
                         static_cast<float>(a[1] + t * (b[1] - a[1])));
      if (rc) grid.at(rc->first, rc->second) = 1.0f;
    }
  }
}

inline void draw_wall(BevGrid& grid, double x0, double y0, double x1, double y1) {
  const double cell = grid.config.cell_size();
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(2, static_cast<int>(std::ceil(len / (cell * 0.4))));
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    auto rc = bev_cell(grid.config, static_cast<float>(x0 + t * (x1 - x0)),
                       static_cast<float>(y0 + t * (y1 - y0)));
    if (rc) grid.at(rc->first, rc->second) = 1.0f;
  }
}

}  // namespace detail

struct ToyFrame {
  BevGrid grid;
  std::vector<OrientedBox> labels;
};

// Clean frame: car outlines + straight walls; labels exactly match the
// rendered cars. Cars are sampled rejection-style to stay non-overlapping.
inline ToyFrame gen_sim_frame(const SceneSpec& spec, std::uint64_t seed) {
  spec.bev.validate();
  Rng rng = substream(seed, "toyworld/frame");
  ToyFrame frame;
  frame.grid = BevGrid(spec.bev);

  std::uniform_int_distribution<int> n_cars_dist(spec.min_cars, spec.max_cars);
  std::uniform_int_distribution<int> n_walls_dist(spec.min_walls, spec.max_walls);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto& b = spec.bev;
  const double margin = 4.0;
  const int n_cars = n_cars_dist(rng);
  int attempts = 0;
  while (static_cast<int>(frame.labels.size()) < n_cars) {
    if (++attempts > 1000)
      fail(ErrorKind::training, "toy world: car placement rejection sampling exhausted");
    OrientedBox car;
    car.cx = b.x_min + margin + unit(rng) * (b.x_max - b.x_min - 2 * margin);
    car.cy = b.y_min + margin + unit(rng) * (b.y_max - b.y_min - 2 * margin);
    car.width = std::max(1.0, spec.car_width_mean + gauss(rng) * spec.car_width_sd);
    car.length = std::max(2.0, spec.car_length_mean + gauss(rng) * spec.car_length_sd);
    car.yaw = normalize_yaw(unit(rng) * 2.0 * std::numbers::pi);
    car.class_id = 0;
    bool overlaps = false;
    for (const auto& other : frame.labels)
      if (oriented_iou(car, other) > 0.0 ||
          std::hypot(car.cx - other.cx, car.cy - other.cy) < 4.0)
        overlaps = true;
    if (overlaps) continue;
    frame.labels.push_back(car);
  }

  const int n_walls = n_walls_dist(rng);
  for (int w = 0; w < n_walls; ++w) {
    const double x0 = b.x_min + unit(rng) * (b.x_max - b.x_min);
    const double y0 = b.y_min + unit(rng) * (b.y_max - b.y_min);
    const double ang = unit(rng) * 2.0 * std::numbers::pi;
    const double len = 8.0 + unit(rng) * 16.0;
    detail::draw_wall(frame.grid, x0, y0, x0 + std::cos(ang) * len,
                      y0 + std::sin(ang) * len);
  }
  for (const auto& car : frame.labels) detail::draw_box_outline(frame.grid, car);
  return frame;
}

// Applies dropout, jitter, shadow wedges, speckle in that fixed order.
// Labels are untouched: geometry stays ground truth regardless of sensing
// noise.
inline BevGrid corrupt_to_real(const BevGrid& grid,
                               const std::vector<OrientedBox>& labels,
                               const CorruptionModel& model,
                               std::uint64_t seed) {
  model.validate();
  Rng rng = substream(seed, "toyworld/corrupt");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int res = grid.config.resolution;

  // 1. dropout
  BevGrid out(grid.config);
  std::vector<std::pair<int, int>> occupied;
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c)
      if (grid.at(r, c) > 0.5f && unit(rng) >= model.dropout_p)
        occupied.emplace_back(r, c);

  // 2. jitter
  for (auto& [r, c] : occupied) {
    const int nr = r + static_cast<int>(std::lround(gauss(rng) * model.jitter_sigma));
    const int nc = c + static_cast<int>(std::lround(gauss(rng) * model.jitter_sigma));
    if (nr >= 0 && nr < res && nc >= 0 && nc < res) out.at(nr, nc) = 1.0f;
  }

  // 3. shadow wedges: clear cells behind a car (away from the ego at the
  // bottom-center of the grid).
  const auto& cfg = grid.config;
  const double ego_x = cfg.x_min, ego_y = (cfg.y_min + cfg.y_max) / 2.0;
  for (const auto& car : labels) {
    if (unit(rng) >= model.ray_shadow) continue;
    const double dx = car.cx - ego_x, dy = car.cy - ego_y;
    const double dist = std::hypot(dx, dy);
    if (dist < 1e-6) continue;
    const double cone_angle = std::atan2(dy, dx);
    const double half_width = std::atan2(std::max(car.width, car.length) / 2, dist);
    for (int r = 0; r < res; ++r)
      for (int c = 0; c < res; ++c) {
        if (out.at(r, c) < 0.5f) continue;
        const double cx = cfg.x_min + (res - 1 - r + 0.5) * cfg.cell_size();
        const double cy = cfg.y_min + (c + 0.5) * cfg.cell_size();
        const double cd = std::hypot(cx - ego_x, cy - ego_y);
        if (cd <= dist + 1.0) continue;
        const double ca = std::atan2(cy - ego_y, cx - ego_x);
        if (std::abs(normalize_yaw(ca - cone_angle)) <= half_width)
          out.at(r, c) = 0.0f;
      }
  }

  // 4. speckle
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c)
      if (out.at(r, c) < 0.5f && unit(rng) < model.speckle_rate)
        out.at(r, c) = 1.0f;
  return out;
}

struct ToyCorpus {
  DatasetManifest sim;
  DatasetManifest real_train;
  DatasetManifest real_test;
};

// Three manifests from disjoint seed streams; sim frames are clean, real
// train/test frames are independently generated scenes passed through the
// corruption model.
inline ToyCorpus gen_corpus(const SceneSpec& spec, const CorruptionModel& model,
                            int n_sim, int n_real, int n_test,
                            std::uint64_t seed, const fs::path& out_dir) {
  fs::create_directories(out_dir / "sim");
  fs::create_directories(out_dir / "real_train");
  fs::create_directories(out_dir / "real_test");
  ToyCorpus corpus;
  corpus.sim.seed = corpus.real_train.seed = corpus.real_test.seed = seed;

  auto emit = [&](const std::string& dir, const std::string& stream, int count,
                  bool corrupt, DatasetManifest& manifest) {
    for (int i = 0; i < count; ++i) {
      const std::uint64_t frame_seed =
          splitmix64(seed ^ fnv1a(stream)) + static_cast<std::uint64_t>(i);
      ToyFrame frame = gen_sim_frame(spec, frame_seed);
      BevGrid grid = corrupt
                         ? corrupt_to_real(frame.grid, frame.labels, model,
                                           frame_seed)
                         : frame.grid;
      char name[32];
      std::snprintf(name, sizeof(name), "%06d", i);
      const fs::path frame_path = out_dir / dir / (std::string(name) + ".pgm");
      const fs::path label_path = out_dir / dir / (std::string(name) + ".txt");
      save_grid_pgm(grid, frame_path);
      write_labels(frame.labels, label_path);
      manifest.entries.push_back({frame_path.string(), label_path.string(),
                                  corrupt ? "real" : "sim", "none"});
    }
  };
  emit("sim", "toyworld/sim", n_sim, false, corpus.sim);
  emit("real_train", "toyworld/real_train", n_real, true, corpus.real_train);
  emit("real_test", "toyworld/real_test", n_test, true, corpus.real_test);

  write_manifest(corpus.sim, out_dir / "sim.manifest");
  write_manifest(corpus.real_train, out_dir / "real_train.manifest");
  write_manifest(corpus.real_test, out_dir / "real_test.manifest");
  return corpus;
}

}  // namespace nsm
