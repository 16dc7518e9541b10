#pragma once

#include <stdexcept>
#include <vector>

#include "dualfusion/geometry.hpp"
#include "dualfusion/model.hpp"

namespace dualfusion {

struct MiningConfig {
  double score_thresh = 0.7;
  double removal_iou = 0.5;
};

// Turns trusted base-detector detections into pseudo ground truth for
// fusion training. A detection survives when its score reaches
// score_thresh and it overlaps no novel ground-truth box with IoU above
// removal_iou (strictly above removes). Kept detections become
// GroundTruthObject entries flagged is_pseudo.
inline std::vector<GroundTruthObject> mine_pseudo_labels(
    const std::vector<Detection>& base_dets,
    const std::vector<GroundTruthObject>& novel_gt, const MiningConfig& cfg) {
  if (!(cfg.score_thresh >= 0.0 && cfg.score_thresh <= 1.0) ||
      !(cfg.removal_iou >= 0.0 && cfg.removal_iou <= 1.0)) {
    throw std::invalid_argument("mining thresholds must be in [0,1]");
  }
  std::vector<GroundTruthObject> mined;
  for (const Detection& det : base_dets) {
    if (det.score < cfg.score_thresh) continue;
    bool removed = false;
    for (const GroundTruthObject& gt : novel_gt) {
      if (iou(det.box, gt.box) > cfg.removal_iou) {
        removed = true;
        break;
      }
    }
    if (removed) continue;
    GroundTruthObject label;
    label.box = det.box;
    label.class_id = det.class_id;
    label.is_pseudo = true;
    mined.push_back(label);
  }
  return mined;
}

// Convenience for whole scenes: mines from the scene's base detections
// against its novel-class annotations and appends the result to
// ground_truth. Returns the number of labels added.
inline std::size_t mine_scene(SceneRecord* scene,
                              const ClassPartition& partition,
                              const MiningConfig& cfg) {
  std::vector<GroundTruthObject> novel_gt;
  for (const GroundTruthObject& gt : scene->ground_truth) {
    if (partition.is_novel(gt.class_id) && !gt.is_pseudo) {
      novel_gt.push_back(gt);
    }
  }
  const std::vector<GroundTruthObject> mined =
      mine_pseudo_labels(scene->base_output.detections, novel_gt, cfg);
  scene->ground_truth.insert(scene->ground_truth.end(), mined.begin(),
                             mined.end());
  return mined.size();
}

}  // namespace dualfusion
