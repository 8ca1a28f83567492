#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "nsm/bev.hpp"
#include "nsm/common.hpp"

namespace nsm {

struct FrameDetection {
  int frame = 0;  // index into the evaluation frame list
  OrientedBox box;
};

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

struct ApResult {
  double ap = 0;
  std::vector<PrPoint> curve;
  int n_gt = 0;
  int n_det = 0;
  bool empty_both = false;  // AP defined as 1 when there is nothing to find
};

// Pascal-style AP with all-point interpolation. Detections are sorted by
// descending score (ties: frame order, then input order); a detection is a TP
// when its best-IoU unmatched ground truth in the same frame clears the
// threshold. Each ground truth matches at most once.
inline ApResult average_precision(
    std::vector<FrameDetection> detections,
    const std::vector<std::vector<OrientedBox>>& ground_truth,
    double iou_threshold) {
  ApResult res;
  for (const auto& gts : ground_truth) res.n_gt += static_cast<int>(gts.size());
  res.n_det = static_cast<int>(detections.size());
  if (res.n_gt == 0 && res.n_det == 0) {
    res.ap = 1.0;
    res.empty_both = true;
    return res;
  }
  if (res.n_gt == 0 || res.n_det == 0) {
    res.ap = 0.0;
    return res;
  }

  std::vector<std::size_t> order(detections.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (detections[i].box.score != detections[j].box.score)
      return detections[i].box.score > detections[j].box.score;
    return detections[i].frame < detections[j].frame;
  });

  std::vector<std::vector<bool>> matched(ground_truth.size());
  for (std::size_t f = 0; f < ground_truth.size(); ++f)
    matched[f].assign(ground_truth[f].size(), false);

  int tp = 0;
  std::vector<PrPoint> curve;
  curve.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& det = detections[order[k]];
    const auto& gts = ground_truth.at(det.frame);
    double best_iou = -1;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[det.frame][g]) continue;
      const double iou = oriented_iou(det.box, gts[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best_iou >= iou_threshold) {
      matched[det.frame][best_gt] = true;
      ++tp;
    }
    curve.push_back({static_cast<double>(tp) / res.n_gt,
                     static_cast<double>(tp) / static_cast<double>(k + 1)});
  }

  // Monotone non-increasing precision envelope, then exact area under PR.
  std::vector<double> prec(curve.size());
  double running = 0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    prec[i] = running;
  }
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - prev_recall) * prec[i];
    prev_recall = curve[i].recall;
  }
  res.ap = ap;
  res.curve = std::move(curve);
  return res;
}

struct EvalReport {
  std::map<int, ApResult> per_class;  // class_id -> AP
  double map = 0;
  double iou_threshold = 0.5;
  std::uint64_t dataset_hash = 0;
  int n_frames = 0;
};

// Mean of per-class APs over a frame-aligned detection/GT set. Single-class
// corpora report mAP == car AP.
inline EvalReport evaluate_map(
    const std::vector<FrameDetection>& detections,
    const std::vector<std::vector<OrientedBox>>& ground_truth,
    double iou_threshold) {
  EvalReport report;
  report.iou_threshold = iou_threshold;
  report.n_frames = static_cast<int>(ground_truth.size());

  std::vector<int> class_ids;
  auto note_class = [&](int c) {
    if (std::find(class_ids.begin(), class_ids.end(), c) == class_ids.end())
      class_ids.push_back(c);
  };
  for (const auto& gts : ground_truth)
    for (const auto& b : gts) note_class(b.class_id);
  if (class_ids.empty()) class_ids.push_back(0);
  std::sort(class_ids.begin(), class_ids.end());

  double sum = 0;
  for (int cls : class_ids) {
    std::vector<FrameDetection> cls_dets;
    for (const auto& d : detections)
      if (d.box.class_id == cls) cls_dets.push_back(d);
    std::vector<std::vector<OrientedBox>> cls_gt(ground_truth.size());
    for (std::size_t f = 0; f < ground_truth.size(); ++f)
      for (const auto& b : ground_truth[f])
        if (b.class_id == cls) cls_gt[f].push_back(b);
    auto ap = average_precision(cls_dets, cls_gt, iou_threshold);
    sum += ap.ap;
    report.per_class[cls] = std::move(ap);
  }
  report.map = sum / static_cast<double>(class_ids.size());
  return report;
}

}  // namespace nsm
