#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dualfusion/geometry.hpp"
#include "dualfusion/model.hpp"

namespace dualfusion {

namespace detail {

// Visit order for merging: score descending, ties by provenance
// (base < novel < fusion), then input index.
inline std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].provenance != dets[b].provenance) {
      return static_cast<int>(dets[a].provenance) <
             static_cast<int>(dets[b].provenance);
    }
    return a < b;
  });
  return order;
}

}  // namespace detail

// Cross-detector suppression over the union of the three detection sets.
// Greedy highest-score-first: a detection is kept unless an already-kept
// detection of a DIFFERENT provenance overlaps it with IoU strictly above
// cross_iou. Same-provenance pairs are never suppressed here; each
// detector's internal NMS is assumed done. Class labels are ignored
// entirely: the rule is region-based, so a confident base detection can
// suppress a novel detection of another class on the same region.
// Output is score-descending.
inline std::vector<Detection> merge_detections(
    const std::vector<Detection>& dets, double cross_iou = 0.5) {
  if (!(cross_iou >= 0.0 && cross_iou <= 1.0)) {
    throw std::invalid_argument("cross_iou must be in [0,1]");
  }
  const std::vector<std::size_t> order = detail::score_order(dets);
  std::vector<Detection> kept;
  for (const std::size_t idx : order) {
    const Detection& cand = dets[idx];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.provenance == cand.provenance) continue;
      if (iou(k.box, cand.box) > cross_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

// Classic per-class NMS within one detector's outputs: among detections
// of the same class, a lower-scoring box overlapping a kept one with IoU
// strictly above iou_thresh is dropped. Used by the simulator's internal
// decode and by the pipeline on the fusion arm before merging.
inline std::vector<Detection> nms_per_class(const std::vector<Detection>& dets,
                                            double iou_thresh = 0.5) {
  const std::vector<std::size_t> order = detail::score_order(dets);
  std::vector<Detection> kept;
  for (const std::size_t idx : order) {
    const Detection& cand = dets[idx];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id != cand.class_id) continue;
      if (iou(k.box, cand.box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

// Number of unordered pairs of different provenance whose IoU exceeds
// the threshold: the base-novel double-detection count the merge step
// exists to remove.
inline long count_cross_provenance_pairs(const std::vector<Detection>& dets,
                                         double iou_thresh = 0.5) {
  long count = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (dets[i].provenance == dets[j].provenance) continue;
      if (iou(dets[i].box, dets[j].box) > iou_thresh) ++count;
    }
  }
  return count;
}

}  // namespace dualfusion
