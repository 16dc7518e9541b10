#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dualfusion/errors.hpp"
#include "dualfusion/geometry.hpp"
#include "dualfusion/model.hpp"

namespace dualfusion {

struct ClassEval {
  int class_id = 0;
  std::string name;
  double ap50 = 0.0;
  long gt_count = 0;
  long tp = 0;
  long fp = 0;
  bool evaluated = false;  // false when the class has no ground truth
};

// Per-class AP50 plus the three aggregates. Aggregates are unweighted
// means over member classes that have ground truth; classes without any
// are excluded and listed. map50_all averages over base and novel
// classes together, not over the two aggregates.
struct EvalReport {
  std::string interpolation = "all_point";
  std::vector<ClassEval> per_class;
  double map50_base = 0.0;
  double map50_novel = 0.0;
  double map50_all = 0.0;
  std::vector<int> excluded_classes;
};

struct ScoredFlag {
  double score = 0.0;
  bool tp = false;
};

// VOC-style greedy matching for one class within one image. Detections
// are visited by descending score (ties by input index); each one
// matches the unmatched ground-truth box of highest IoU if that IoU
// reaches iou_thresh, otherwise it is a false positive. Each ground
// truth matches at most once; pseudo ground truth never matches. Flags
// are returned in input order.
inline std::vector<bool> match_detections(
    const std::vector<Detection>& dets,
    const std::vector<GroundTruthObject>& gts, double iou_thresh = 0.5) {
  std::vector<std::size_t> usable_gt;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gts[g].is_pseudo) usable_gt.push_back(g);
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });

  std::vector<bool> gt_matched(gts.size(), false);
  std::vector<bool> flags(dets.size(), false);
  for (const std::size_t d : order) {
    double best_iou = -1.0;
    std::size_t best_g = 0;
    bool found = false;
    for (const std::size_t g : usable_gt) {
      if (gt_matched[g]) continue;
      const double v = iou(dets[d].box, gts[g].box);
      if (v > best_iou) {
        best_iou = v;
        best_g = g;
        found = true;
      }
    }
    if (found && best_iou >= iou_thresh) {
      flags[d] = true;
      gt_matched[best_g] = true;
    }
  }
  return flags;
}

// All-point interpolated average precision over one class's pooled,
// scored TP/FP flags: area under the precision envelope, with AP =
// sum over recall steps of (r_i - r_{i-1}) * max precision at recall
// >= r_i. Entries are ranked by score descending (stable for ties, so
// the caller's pooling order breaks them deterministically). n_gt = 0 is
// undefined here and reported as excluded by the caller; this returns 0.
inline double ap50(std::vector<ScoredFlag> entries, long n_gt) {
  if (n_gt <= 0 || entries.empty()) return 0.0;
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ScoredFlag& a, const ScoredFlag& b) {
                     return a.score > b.score;
                   });
  const std::size_t n = entries.size();
  std::vector<double> precision(n), recall(n);
  long cum_tp = 0, cum_fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (entries[i].tp) ++cum_tp; else ++cum_fp;
    precision[i] = static_cast<double>(cum_tp) / static_cast<double>(cum_tp + cum_fp);
    recall[i] = static_cast<double>(cum_tp) / static_cast<double>(n_gt);
  }
  // Precision envelope: max precision at recall >= r_i.
  for (std::size_t i = n - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

// Whole-set evaluation: detections are pooled across images per class
// but matched per image. Every detection key must name a scene.
inline EvalReport evaluate(
    const std::vector<SceneRecord>& scenes,
    const std::map<std::string, std::vector<Detection>>& dets_by_image,
    const ClassPartition& partition, double iou_thresh = 0.5) {
  std::map<std::string, const SceneRecord*> scene_index;
  for (const SceneRecord& s : scenes) scene_index.emplace(s.image_id, &s);
  for (const auto& [image_id, dets] : dets_by_image) {
    if (scene_index.find(image_id) == scene_index.end()) {
      throw ValidationError("detections reference unknown image_id \"" +
                            image_id + "\"");
    }
  }

  static const std::vector<Detection> kNoDets;
  EvalReport report;
  report.per_class.resize(partition.num_classes());
  for (int c = 0; c < partition.num_classes(); ++c) {
    ClassEval& ce = report.per_class[c];
    ce.class_id = c;
    ce.name = partition.name_of(c);
    std::vector<ScoredFlag> pooled;
    for (const SceneRecord& scene : scenes) {
      std::vector<GroundTruthObject> gts_c;
      for (const GroundTruthObject& gt : scene.ground_truth) {
        if (gt.class_id == c && !gt.is_pseudo) gts_c.push_back(gt);
      }
      ce.gt_count += static_cast<long>(gts_c.size());
      const auto it = dets_by_image.find(scene.image_id);
      const std::vector<Detection>& image_dets =
          it == dets_by_image.end() ? kNoDets : it->second;
      std::vector<Detection> dets_c;
      for (const Detection& d : image_dets) {
        if (d.class_id == c) dets_c.push_back(d);
      }
      const std::vector<bool> flags = match_detections(dets_c, gts_c, iou_thresh);
      for (std::size_t i = 0; i < dets_c.size(); ++i) {
        pooled.push_back(ScoredFlag{dets_c[i].score, flags[i]});
        if (flags[i]) ++ce.tp; else ++ce.fp;
      }
    }
    ce.evaluated = ce.gt_count > 0;
    ce.ap50 = ce.evaluated ? ap50(pooled, ce.gt_count) : 0.0;
    if (!ce.evaluated) report.excluded_classes.push_back(c);
  }

  double base_sum = 0.0, novel_sum = 0.0;
  long base_n = 0, novel_n = 0;
  for (const ClassEval& ce : report.per_class) {
    if (!ce.evaluated) continue;
    if (partition.is_base(ce.class_id)) {
      base_sum += ce.ap50;
      ++base_n;
    } else {
      novel_sum += ce.ap50;
      ++novel_n;
    }
  }
  report.map50_base = base_n > 0 ? base_sum / base_n : 0.0;
  report.map50_novel = novel_n > 0 ? novel_sum / novel_n : 0.0;
  report.map50_all = (base_n + novel_n) > 0
                         ? (base_sum + novel_sum) / (base_n + novel_n)
                         : 0.0;
  return report;
}

}  // namespace dualfusion
