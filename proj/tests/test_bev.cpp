#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nsm/bev.hpp"
#include "nsm/rng.hpp"

using namespace nsm;

namespace {

BevConfig small_cfg() {
  BevConfig cfg;
  cfg.resolution = 4;  // 10 m cells on the default 40x40 m range
  return cfg;
}

bool point_in_box(const OrientedBox& b, double x, double y) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = x - b.cx, dy = y - b.cy;
  const double lx = c * dx + s * dy;   // along length
  const double ly = -s * dx + c * dy;  // along width
  return std::abs(lx) <= b.length / 2 && std::abs(ly) <= b.width / 2;
}

// Monte-Carlo IoU oracle: sample inside box a, estimate the intersection as
// area(a) * hit fraction.
double mc_iou(const OrientedBox& a, const OrientedBox& b, int samples, Rng& rng) {
  std::uniform_real_distribution<double> ux(-a.length / 2, a.length / 2);
  std::uniform_real_distribution<double> uy(-a.width / 2, a.width / 2);
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  long long hits = 0;
  for (int i = 0; i < samples; ++i) {
    const double lx = ux(rng), ly = uy(rng);
    const double x = a.cx + c * lx - s * ly;
    const double y = a.cy + s * lx + c * ly;
    if (point_in_box(b, x, y)) ++hits;
  }
  const double inter = a.area() * static_cast<double>(hits) / samples;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace

TEST_CASE("bev_cell: forward is up, half-open ranges") {
  auto cfg = small_cfg();
  // max x -> row 0
  CHECK(bev_cell(cfg, 39.9f, -20.0f) == std::make_pair(0, 0));
  // min x -> last row
  CHECK(bev_cell(cfg, 0.0f, -20.0f) == std::make_pair(3, 0));
  CHECK(bev_cell(cfg, 0.0f, 19.9f) == std::make_pair(3, 3));
  // upper edges excluded
  CHECK(!bev_cell(cfg, 40.0f, 0.0f).has_value());
  CHECK(!bev_cell(cfg, 0.0f, 20.0f).has_value());
  CHECK(!bev_cell(cfg, -0.1f, 0.0f).has_value());
}

TEST_CASE("project_to_bev binary occupancy and z filter") {
  auto cfg = small_cfg();
  PointCloud pcl;
  pcl.add(5, -15, 0, 1);    // row 3, col 0
  pcl.add(5, -15, 0.5, 1);  // same cell
  pcl.add(5, -15, 5.0, 1);  // above z_max: dropped
  pcl.add(35, 15, 0, 1);    // row 0, col 3
  auto grid = project_to_bev(pcl, cfg);
  CHECK(grid.at(3, 0) == 1.0f);
  CHECK(grid.at(0, 3) == 1.0f);
  int occupied = 0;
  for (float v : grid.cells) occupied += v > 0;
  CHECK(occupied == 2);
}

TEST_CASE("project_to_bev density normalizes by the max count") {
  auto cfg = small_cfg();
  cfg.encoding = BevEncoding::density;
  PointCloud pcl;
  for (int i = 0; i < 4; ++i) pcl.add(5, -15, 0, 1);
  pcl.add(35, 15, 0, 1);
  auto grid = project_to_bev(pcl, cfg);
  CHECK(grid.at(3, 0) == doctest::Approx(1.0));
  CHECK(grid.at(0, 3) == doctest::Approx(0.25));
}

TEST_CASE("normalize_yaw lands in (-pi, pi]") {
  const double pi = std::numbers::pi;
  CHECK(normalize_yaw(pi) == doctest::Approx(pi));
  CHECK(normalize_yaw(-pi) == doctest::Approx(pi));
  CHECK(normalize_yaw(3 * pi) == doctest::Approx(pi));
  CHECK(normalize_yaw(2 * pi) == doctest::Approx(0.0));
  CHECK(normalize_yaw(pi + 0.1) == doctest::Approx(-pi + 0.1));
}

TEST_CASE("corners are counterclockwise and area matches shoelace") {
  OrientedBox b;
  b.cx = 3;
  b.cy = -2;
  b.width = 2;
  b.length = 5;
  b.yaw = 0.7;
  auto c = b.corners();
  detail::Poly poly(c.begin(), c.end());
  CHECK(detail::polygon_area(poly) == doctest::Approx(b.area()).epsilon(1e-12));
  // CCW: signed area positive
  double signed_area = 0;
  for (int i = 0; i < 4; ++i)
    signed_area += c[i][0] * c[(i + 1) % 4][1] - c[(i + 1) % 4][0] * c[i][1];
  CHECK(signed_area > 0);
}

TEST_CASE("oriented_iou analytic axis-aligned cases") {
  OrientedBox a, b;
  a.width = a.length = 1;
  b.width = b.length = 1;

  SUBCASE("identical boxes") { CHECK(oriented_iou(a, a) == doctest::Approx(1.0).epsilon(1e-9)); }
  SUBCASE("half-overlap unit squares: IoU exactly 1/3") {
    b.cx = 0.5;
    CHECK(oriented_iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }
  SUBCASE("quarter-overlap diagonal offset: IoU 1/7") {
    b.cx = 0.5;
    b.cy = 0.5;
    CHECK(oriented_iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-9));
  }
  SUBCASE("disjoint") {
    b.cx = 5;
    CHECK(oriented_iou(a, b) == 0.0);
  }
  SUBCASE("touching edges has zero intersection") {
    b.cx = 1.0;
    CHECK(oriented_iou(a, b) == 0.0);
  }
  SUBCASE("containment") {
    b.width = b.length = 0.5;
    CHECK(oriented_iou(a, b) == doctest::Approx(0.25).epsilon(1e-9));
  }
  SUBCASE("45-degree rotation of a square inside itself") {
    b.yaw = std::numbers::pi / 4;
    // octagon intersection of unit square and its 45deg rotation:
    // area = 2*(sqrt(2)-1), union = 2 - that
    const double inter = 2 * (std::sqrt(2.0) - 1.0);
    CHECK(oriented_iou(a, b) == doctest::Approx(inter / (2 - inter)).epsilon(1e-9));
  }
}

TEST_CASE("oriented_iou is invariant under rigid motion") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 50; ++i) {
    OrientedBox a, b;
    a.cx = u(rng) * 5;
    a.cy = u(rng) * 5;
    a.width = 1 + std::abs(u(rng)) * 3;
    a.length = 1 + std::abs(u(rng)) * 3;
    a.yaw = u(rng) * 3;
    b = a;
    b.cx += u(rng) * 2;
    b.cy += u(rng) * 2;
    b.yaw = u(rng) * 3;
    b.width = 1 + std::abs(u(rng)) * 3;
    const double base = oriented_iou(a, b);

    const double th = u(rng) * 3, tx = u(rng) * 10, ty = u(rng) * 10;
    auto move = [&](OrientedBox box) {
      const double c = std::cos(th), s = std::sin(th);
      const double nx = c * box.cx - s * box.cy + tx;
      const double ny = s * box.cx + c * box.cy + ty;
      box.cx = nx;
      box.cy = ny;
      box.yaw = normalize_yaw(box.yaw + th);
      return box;
    };
    CHECK(oriented_iou(move(a), move(b)) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("oriented_iou matches the Monte-Carlo oracle") {
  Rng rng(77);
  std::uniform_real_distribution<double> u(-1, 1);
  // 40 pairs at 2e5 samples here; the acceptance suite runs the full
  // 200-pair / 1e6-sample version.
  for (int i = 0; i < 40; ++i) {
    OrientedBox a, b;
    a.cx = u(rng) * 3;
    a.cy = u(rng) * 3;
    a.width = 0.5 + std::abs(u(rng)) * 3;
    a.length = 0.5 + std::abs(u(rng)) * 3;
    a.yaw = u(rng) * 3.1;
    b.cx = a.cx + u(rng) * 3;
    b.cy = a.cy + u(rng) * 3;
    b.width = 0.5 + std::abs(u(rng)) * 3;
    b.length = 0.5 + std::abs(u(rng)) * 3;
    b.yaw = u(rng) * 3.1;
    const double exact = oriented_iou(a, b);
    const double approx = mc_iou(a, b, 200000, rng);
    CHECK(std::abs(exact - approx) < 0.015);
  }
}

TEST_CASE("nms keeps the higher-scored of overlapping boxes") {
  OrientedBox a, b, c;
  a.width = a.length = 2;
  a.score = 0.9;
  b = a;
  b.cx = 0.1;
  b.score = 0.8;  // heavy overlap with a -> suppressed
  c = a;
  c.cx = 10;
  c.score = 0.5;  // far away -> kept
  auto kept = nms_oriented({b, a, c}, 0.45);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].score == doctest::Approx(0.9));
  CHECK(kept[1].score == doctest::Approx(0.5));
}

TEST_CASE("nms threshold is exclusive: IoU == threshold survives") {
  OrientedBox a, b;
  a.width = a.length = 1;
  a.score = 0.9;
  b = a;
  b.cx = 0.5;  // IoU exactly 1/3
  b.score = 0.8;
  auto kept = nms_oriented({a, b}, 1.0 / 3.0);
  CHECK(kept.size() == 2);
}

TEST_CASE("box3d_to_bev drops out-of-range centers") {
  BevConfig cfg = small_cfg();
  Box3d in;
  in.cx = 20;
  in.cy = 0;
  CHECK(box3d_to_bev(in, cfg).has_value());
  in.cx = 45;
  CHECK(!box3d_to_bev(in, cfg).has_value());
}

TEST_CASE("pointcloud ingest clamps intensity and drops non-finite points") {
  PointCloud pcl;
  pcl.add(1, 1, 0, 7.0f);
  pcl.add(std::numeric_limits<float>::quiet_NaN(), 0, 0, 1);
  REQUIRE(pcl.points.size() == 1);
  CHECK(pcl.points[0].intensity == 1.0f);
}
