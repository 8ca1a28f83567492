#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ap_oracle.hpp"
#include "nsm/evaluation.hpp"
#include "nsm/rng.hpp"

using namespace nsm;
using ap_oracle::oracle_ap;

namespace {

OrientedBox rand_box(Rng& rng) {
  std::uniform_real_distribution<double> pos(-10, 10), size(1, 4), yaw(-3, 3);
  OrientedBox b;
  b.cx = pos(rng);
  b.cy = pos(rng);
  b.width = size(rng);
  b.length = size(rng);
  b.yaw = normalize_yaw(yaw(rng));
  return b;
}

}  // namespace

TEST_CASE("AP edge cases") {
  std::vector<std::vector<OrientedBox>> no_gt(2);
  auto r = average_precision({}, no_gt, 0.5);
  CHECK(r.ap == 1.0);
  CHECK(r.empty_both);

  OrientedBox b;
  std::vector<std::vector<OrientedBox>> one_gt{{b}};
  auto r2 = average_precision({}, one_gt, 0.5);
  CHECK(r2.ap == 0.0);
  CHECK(!r2.empty_both);

  FrameDetection d{0, b};
  auto r3 = average_precision({d}, no_gt, 0.5);
  CHECK(r3.ap == 0.0);
}

TEST_CASE("perfect detections give AP 1") {
  Rng rng(1);
  std::vector<std::vector<OrientedBox>> gt(3);
  std::vector<FrameDetection> dets;
  for (int f = 0; f < 3; ++f)
    for (int i = 0; i < 2; ++i) {
      auto b = rand_box(rng);
      gt[f].push_back(b);
      b.score = 1.0;
      dets.push_back({f, b});
    }
  auto r = average_precision(dets, gt, 0.5);
  CHECK(r.ap == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hand-computed AP: one TP then one FP") {
  OrientedBox g;
  g.width = g.length = 2;
  std::vector<std::vector<OrientedBox>> gt{{g}};
  OrientedBox tp = g;
  tp.score = 0.9;
  OrientedBox fp = g;
  fp.cx = 50;
  fp.score = 0.8;
  auto r = average_precision({{0, tp}, {0, fp}}, gt, 0.5);
  // recall reaches 1 at precision 1 with the first detection
  CHECK(r.ap == doctest::Approx(1.0));

  // reversed scores: TP arrives second -> all-point AP = 1 * (1/2) envelope
  tp.score = 0.7;
  auto r2 = average_precision({{0, tp}, {0, fp}}, gt, 0.5);
  CHECK(r2.ap == doctest::Approx(0.5));
}

TEST_CASE("duplicate detections on one ground truth: second is a FP") {
  OrientedBox g;
  g.width = g.length = 2;
  std::vector<std::vector<OrientedBox>> gt{{g}};
  OrientedBox d1 = g, d2 = g;
  d1.score = 0.9;
  d2.score = 0.8;
  auto r = average_precision({{0, d1}, {0, d2}}, gt, 0.5);
  CHECK(r.ap == doctest::Approx(1.0));  // recall 1 already reached at k=1
  CHECK(r.curve.back().precision == doctest::Approx(0.5));
}

TEST_CASE("evaluator equals the brute-force oracle across 500 random seeds") {
  int nontrivial = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Rng rng = substream(seed, "eval/oracle");
    std::uniform_int_distribution<int> nf(1, 3), ng(0, 5), nd(0, 8), score10(0, 10);
    const int frames = nf(rng);
    std::vector<std::vector<OrientedBox>> gt(frames);
    const int total_gt = ng(rng);
    std::uniform_int_distribution<int> fpick(0, frames - 1);
    for (int i = 0; i < total_gt; ++i) gt[fpick(rng)].push_back(rand_box(rng));

    std::vector<FrameDetection> dets;
    const int total_det = nd(rng);
    std::uniform_real_distribution<double> jitter(-1.5, 1.5);
    for (int i = 0; i < total_det; ++i) {
      const int f = fpick(rng);
      OrientedBox b;
      if (!gt[f].empty() && score10(rng) > 3) {
        // near a ground truth so matching is non-trivial
        b = gt[f][static_cast<std::size_t>(score10(rng)) % gt[f].size()];
        b.cx += jitter(rng);
        b.cy += jitter(rng);
      } else {
        b = rand_box(rng);
      }
      b.score = score10(rng) / 10.0;  // quantized: deliberate ties
      dets.push_back({f, b});
    }

    auto got = average_precision(dets, gt, 0.5);
    std::vector<PrPoint> oracle_curve;
    const double want = oracle_ap(dets, gt, 0.5, &oracle_curve);
    REQUIRE_MESSAGE(std::abs(got.ap - want) < 1e-9, "seed ", seed);
    if (!dets.empty() && total_gt > 0) {
      REQUIRE(got.curve.size() == oracle_curve.size());
      for (std::size_t i = 0; i < oracle_curve.size(); ++i) {
        REQUIRE(std::abs(got.curve[i].recall - oracle_curve[i].recall) < 1e-12);
        REQUIRE(std::abs(got.curve[i].precision - oracle_curve[i].precision) <
                1e-12);
      }
    }
    if (want > 0 && want < 1) ++nontrivial;
  }
  CHECK(nontrivial > 50);  // the generator must exercise interesting cases
}

TEST_CASE("recall is non-decreasing along the curve") {
  Rng rng(123);
  std::vector<std::vector<OrientedBox>> gt(2);
  std::vector<FrameDetection> dets;
  for (int i = 0; i < 4; ++i) gt[i % 2].push_back(rand_box(rng));
  for (int i = 0; i < 8; ++i) {
    OrientedBox b = rand_box(rng);
    b.score = (i * 37 % 11) / 10.0;
    dets.push_back({i % 2, b});
  }
  auto r = average_precision(dets, gt, 0.5);
  for (std::size_t i = 1; i < r.curve.size(); ++i)
    CHECK(r.curve[i].recall >= r.curve[i - 1].recall);
}

TEST_CASE("adding a lowest-score detection never raises AP") {
  Rng rng(321);
  std::vector<std::vector<OrientedBox>> gt(1);
  gt[0].push_back(rand_box(rng));
  gt[0].push_back(rand_box(rng));
  std::vector<FrameDetection> dets;
  OrientedBox hit = gt[0][0];
  hit.score = 0.9;
  dets.push_back({0, hit});
  const double base = average_precision(dets, gt, 0.5).ap;
  OrientedBox miss = rand_box(rng);
  miss.cx += 100;
  miss.score = 0.1;
  dets.push_back({0, miss});
  CHECK(average_precision(dets, gt, 0.5).ap <= base + 1e-12);
}

TEST_CASE("evaluate_map averages per-class APs") {
  OrientedBox g0;
  g0.width = g0.length = 2;
  OrientedBox g1 = g0;
  g1.cx = 20;
  g1.class_id = 1;
  std::vector<std::vector<OrientedBox>> gt{{g0, g1}};
  OrientedBox d0 = g0;
  d0.score = 0.9;  // perfect for class 0
  // no detection for class 1 -> AP 0
  auto report = evaluate_map({{0, d0}}, gt, 0.5);
  CHECK(report.per_class.at(0).ap == doctest::Approx(1.0));
  CHECK(report.per_class.at(1).ap == doctest::Approx(0.0));
  CHECK(report.map == doctest::Approx(0.5));
}
