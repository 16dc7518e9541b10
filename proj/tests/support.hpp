#pragma once

// Shared fixtures and independent oracles for the unit and acceptance
// suites. Oracles deliberately recompute results through a different
// route than the library (cell counting, prefix recomputation, finite
// differences) so agreement is evidence, not tautology.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <dualfusion/dualfusion.hpp>

namespace support {

using namespace dualfusion;

// ---- geometry -------------------------------------------------------

inline Box random_int_box(std::mt19937_64& rng, int hi = 32) {
  std::uniform_int_distribution<int> lo_dist(0, hi - 1);
  const int x1 = lo_dist(rng);
  const int y1 = lo_dist(rng);
  const int x2 = std::uniform_int_distribution<int>(x1 + 1, hi)(rng);
  const int y2 = std::uniform_int_distribution<int>(y1 + 1, hi)(rng);
  return Box{static_cast<double>(x1), static_cast<double>(y1),
             static_cast<double>(x2), static_cast<double>(y2)};
}

inline Box random_real_box(std::mt19937_64& rng, double span = 100.0,
                           double min_side = 5.0, double max_side = 30.0) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng);
  const double h = side(rng);
  std::uniform_real_distribution<double> x_dist(0.0, span - w);
  std::uniform_real_distribution<double> y_dist(0.0, span - h);
  const double x = x_dist(rng);
  const double y = y_dist(rng);
  return Box{x, y, x + w, y + h};
}

// Unit-cell counting over the integer grid: a cell (i,j) belongs to a
// box when i,j fall inside its half-open extent.
inline long cell_count(const Box& b, int hi) {
  long cells = 0;
  for (int i = 0; i < hi; ++i) {
    for (int j = 0; j < hi; ++j) {
      if (i >= b.x1 && i < b.x2 && j >= b.y1 && j < b.y2) ++cells;
    }
  }
  return cells;
}

inline long cell_intersection(const Box& a, const Box& b, int hi) {
  long cells = 0;
  for (int i = 0; i < hi; ++i) {
    for (int j = 0; j < hi; ++j) {
      const bool in_a = i >= a.x1 && i < a.x2 && j >= a.y1 && j < a.y2;
      const bool in_b = i >= b.x1 && i < b.x2 && j >= b.y1 && j < b.y2;
      if (in_a && in_b) ++cells;
    }
  }
  return cells;
}

inline double oracle_iou(const Box& a, const Box& b, int hi = 32) {
  const long inter = cell_intersection(a, b, hi);
  const long uni = cell_count(a, hi) + cell_count(b, hi) - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double oracle_ioa(const Box& p, const Box& q, int hi = 32) {
  return static_cast<double>(cell_intersection(p, q, hi)) /
         static_cast<double>(cell_count(p, hi));
}

// ---- average precision ----------------------------------------------

// Prefix-recomputation AP oracle. Detections are ranked by score
// (stable across the given image order); for every prefix the per-image
// greedy matching is rerun from scratch, giving one precision/recall
// point; the all-point integral is then taken literally.
struct OracleImage {
  std::vector<Detection> dets;
  std::vector<GroundTruthObject> gts;
};

inline long oracle_prefix_tp(const std::vector<OracleImage>& images,
                             const std::vector<std::pair<std::size_t, std::size_t>>& ranked,
                             std::size_t prefix, double iou_thresh) {
  long tp = 0;
  for (std::size_t img = 0; img < images.size(); ++img) {
    std::vector<bool> used(images[img].gts.size(), false);
    for (std::size_t r = 0; r < prefix; ++r) {
      if (ranked[r].first != img) continue;
      const Detection& d = images[img].dets[ranked[r].second];
      double best = -1.0;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < images[img].gts.size(); ++g) {
        if (used[g] || images[img].gts[g].is_pseudo) continue;
        const double v = iou(d.box, images[img].gts[g].box);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      if (best >= iou_thresh) {
        used[best_g] = true;
        ++tp;
      }
    }
  }
  return tp;
}

inline double oracle_ap50(const std::vector<OracleImage>& images,
                          double iou_thresh = 0.5) {
  long n_gt = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranked;
  for (std::size_t img = 0; img < images.size(); ++img) {
    for (const GroundTruthObject& gt : images[img].gts) {
      if (!gt.is_pseudo) ++n_gt;
    }
    for (std::size_t d = 0; d < images[img].dets.size(); ++d) {
      ranked.emplace_back(img, d);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](const auto& a, const auto& b) {
                     return images[a.first].dets[a.second].score >
                            images[b.first].dets[b.second].score;
                   });
  if (n_gt == 0 || ranked.empty()) return 0.0;

  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const long tp = oracle_prefix_tp(images, ranked, k, iou_thresh);
    precision[k - 1] = static_cast<double>(tp) / static_cast<double>(k);
    recall[k - 1] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  double ap = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double envelope = 0.0;
    for (std::size_t j = k; j < n; ++j) envelope = std::max(envelope, precision[j]);
    ap += (recall[k] - prev) * envelope;
    prev = recall[k];
  }
  return ap;
}

// ---- gradients -------------------------------------------------------

inline double rel_err(double a, double f) {
  return std::fabs(a - f) / std::max({std::fabs(a), std::fabs(f), 1e-6});
}

// Central finite differences over every parameter.
inline double max_grad_rel_err(FusionNetParams params,
                               const std::vector<FusionExample>& batch,
                               double box_weight = 1.0, double eps = 1e-5) {
  const FusionNetParams analytic = gradients(params, batch, box_weight);
  const auto param_layers = layer_ptrs(params);
  const auto grad_layers = layer_ptrs(const_cast<const FusionNetParams&>(analytic));
  double worst = 0.0;
  const auto probe = [&](double* slot, double analytic_g) {
    const double saved = *slot;
    *slot = saved + eps;
    const double up = loss(params, batch, box_weight).total;
    *slot = saved - eps;
    const double down = loss(params, batch, box_weight).total;
    *slot = saved;
    const double fd = (up - down) / (2.0 * eps);
    worst = std::max(worst, rel_err(analytic_g, fd));
  };
  for (std::size_t li = 0; li < param_layers.size(); ++li) {
    Affine& layer = *param_layers[li];
    const Affine& g = *grad_layers[li];
    for (std::size_t k = 0; k < layer.w.size(); ++k) probe(&layer.w[k], g.w[k]);
    for (std::size_t k = 0; k < layer.b.size(); ++k) probe(&layer.b[k], g.b[k]);
  }
  return worst;
}

// Moves every ReLU/SeLU pre-activation off exact zero. Zero-bias
// initialization parks dead trunk units exactly on the ReLU kink, where
// the one-sided analytic subgradient and a central difference legitimately
// disagree; random biases keep finite-difference probes away from that
// measure-zero set.
inline void randomize_biases(FusionNetParams& p, std::mt19937_64& rng,
                             double scale = 0.5) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for_each_layer(p, [&](const char*, Affine& layer) {
    for (double& b : layer.b) b = dist(rng);
  });
}

inline std::vector<FusionExample> random_fusion_batch(std::mt19937_64& rng,
                                                      int base_in, int novel_in,
                                                      int n_classes,
                                                      std::size_t n) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, n_classes);  // background included
  std::uniform_real_distribution<double> delta(-0.4, 0.4);
  std::vector<FusionExample> batch(n);
  for (FusionExample& ex : batch) {
    ex.input.base_branch.resize(base_in);
    for (double& v : ex.input.base_branch) v = unit(rng);
    ex.input.novel_branch.resize(novel_in);
    for (double& v : ex.input.novel_branch) v = unit(rng);
    ex.input.proposal_box = Box{10.0, 10.0, 30.0, 30.0};
    ex.target.class_id = cls(rng);
    if (ex.target.class_id == n_classes) {
      ex.target.box_delta = {0.0, 0.0, 0.0, 0.0};
    } else {
      for (double& v : ex.target.box_delta) v = delta(rng);
    }
  }
  return batch;
}

// Linearly separable fusion dataset: one sign-pattern prototype per
// class in each branch, light noise, zero box targets.
inline std::vector<FusionExample> separable_dataset(int n_classes,
                                                    int per_class, int base_in,
                                                    int novel_in, double scale,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> sign(0, 1);
  std::normal_distribution<double> noise(0.0, 0.05 * scale);
  std::vector<std::vector<double>> base_proto(n_classes), novel_proto(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    base_proto[c].resize(base_in);
    for (double& v : base_proto[c]) v = sign(rng) ? scale : -scale;
    novel_proto[c].resize(novel_in);
    for (double& v : novel_proto[c]) v = sign(rng) ? scale : -scale;
  }
  std::vector<FusionExample> dataset;
  dataset.reserve(static_cast<std::size_t>(n_classes) * per_class);
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      FusionExample ex;
      ex.input.base_branch = base_proto[c];
      for (double& v : ex.input.base_branch) v += noise(rng);
      ex.input.novel_branch = novel_proto[c];
      for (double& v : ex.input.novel_branch) v += noise(rng);
      ex.input.proposal_box = Box{10.0, 10.0, 30.0, 30.0};
      ex.target.class_id = c;
      ex.target.box_delta = {0.0, 0.0, 0.0, 0.0};
      dataset.push_back(std::move(ex));
    }
  }
  return dataset;
}

inline double classification_accuracy(const FusionNetParams& params,
                                      const std::vector<FusionExample>& dataset) {
  std::size_t correct = 0;
  for (const FusionExample& ex : dataset) {
    const FusionOutput out = forward(params, ex.input);
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < out.class_scores.size(); ++k) {
      if (out.class_scores[k] > out.class_scores[argmax]) argmax = k;
    }
    if (static_cast<int>(argmax) == ex.target.class_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

// ---- scene fixtures ---------------------------------------------------

inline DatasetHeader small_header() {
  DatasetHeader h;
  h.partition.base_classes = {"car", "person"};
  h.partition.novel_classes = {"rickshaw"};
  h.base_feature_dim = 3;
  h.novel_feature_dim = 2;
  h.base_logits_background = false;
  h.novel_logits_background = false;
  return h;
}

inline Proposal make_proposal(const Box& box, Source source, int feature_dim,
                              int logits_len, double objectness = 0.9) {
  Proposal p;
  p.box = box;
  p.predicted_box = box;
  p.objectness = objectness;
  p.feature.assign(feature_dim, 0.5);
  p.logits.assign(logits_len, 0.1);
  p.source = source;
  return p;
}

inline Detection make_detection(const Box& box, int class_id, double score,
                                Provenance provenance, int proposal_index = -1) {
  Detection d;
  d.box = box;
  d.class_id = class_id;
  d.score = score;
  d.provenance = provenance;
  d.proposal_index = proposal_index;
  return d;
}

inline SceneRecord valid_scene(const DatasetHeader& h,
                               const std::string& id = "img_0") {
  SceneRecord s;
  s.image_id = id;
  s.width = 100;
  s.height = 100;
  s.ground_truth.push_back(GroundTruthObject{Box{10, 10, 30, 30}, 0, false});
  s.base_output.source = Source::kBase;
  s.base_output.proposals.push_back(
      make_proposal(Box{10, 10, 30, 30}, Source::kBase, h.base_feature_dim,
                    h.base_logits_len()));
  s.base_output.detections.push_back(
      make_detection(Box{10, 10, 30, 30}, 0, 0.9, Provenance::kBase, 0));
  s.novel_output.source = Source::kNovel;
  s.novel_output.proposals.push_back(
      make_proposal(Box{60, 60, 80, 80}, Source::kNovel, h.novel_feature_dim,
                    h.novel_logits_len()));
  s.novel_output.detections.push_back(make_detection(
      Box{60, 60, 80, 80}, h.partition.num_base(), 0.8, Provenance::kNovel, 0));
  return s;
}

inline std::vector<Proposal> random_proposals(std::mt19937_64& rng,
                                              std::size_t max_n, Source source) {
  std::uniform_int_distribution<std::size_t> n_dist(0, max_n);
  const std::size_t n = n_dist(rng);
  std::vector<Proposal> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(make_proposal(random_real_box(rng), source, 2, 2));
  }
  return out;
}

// ---- equality ----------------------------------------------------------

inline bool box_eq(const Box& a, const Box& b) {
  return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
}

inline bool detection_eq(const Detection& a, const Detection& b) {
  return box_eq(a.box, b.box) && a.class_id == b.class_id &&
         a.score == b.score && a.provenance == b.provenance &&
         a.proposal_index == b.proposal_index;
}

inline bool proposal_eq(const Proposal& a, const Proposal& b) {
  return box_eq(a.box, b.box) && box_eq(a.predicted_box, b.predicted_box) &&
         a.objectness == b.objectness && a.feature == b.feature &&
         a.logits == b.logits && a.source == b.source;
}

inline bool output_eq(const DetectorOutput& a, const DetectorOutput& b) {
  if (a.source != b.source || a.proposals.size() != b.proposals.size() ||
      a.detections.size() != b.detections.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.proposals.size(); ++i) {
    if (!proposal_eq(a.proposals[i], b.proposals[i])) return false;
  }
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    if (!detection_eq(a.detections[i], b.detections[i])) return false;
  }
  return true;
}

inline bool scene_eq(const SceneRecord& a, const SceneRecord& b) {
  if (a.image_id != b.image_id || a.width != b.width || a.height != b.height ||
      a.ground_truth.size() != b.ground_truth.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.ground_truth.size(); ++i) {
    const GroundTruthObject& x = a.ground_truth[i];
    const GroundTruthObject& y = b.ground_truth[i];
    if (!box_eq(x.box, y.box) || x.class_id != y.class_id ||
        x.is_pseudo != y.is_pseudo) {
      return false;
    }
  }
  return output_eq(a.base_output, b.base_output) &&
         output_eq(a.novel_output, b.novel_output);
}

inline bool scenes_file_eq(const ScenesFile& a, const ScenesFile& b) {
  if (a.header.partition.base_classes != b.header.partition.base_classes ||
      a.header.partition.novel_classes != b.header.partition.novel_classes ||
      a.header.base_feature_dim != b.header.base_feature_dim ||
      a.header.novel_feature_dim != b.header.novel_feature_dim ||
      a.header.base_logits_background != b.header.base_logits_background ||
      a.header.novel_logits_background != b.header.novel_logits_background ||
      a.scenes.size() != b.scenes.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.scenes.size(); ++i) {
    if (!scene_eq(a.scenes[i], b.scenes[i])) return false;
  }
  return true;
}

inline bool params_eq(const FusionNetParams& a, const FusionNetParams& b) {
  if (a.base_in != b.base_in || a.novel_in != b.novel_in || a.d_h != b.d_h ||
      a.d_t != b.d_t || a.n_classes != b.n_classes) {
    return false;
  }
  const auto la = layer_ptrs(a);
  const auto lb = layer_ptrs(b);
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (la[i]->w != lb[i]->w || la[i]->b != lb[i]->b) return false;
  }
  return true;
}

// Order-independent comparison for merge outputs: sorted by a full key.
inline std::vector<Detection> canonical_order(std::vector<Detection> dets) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    return std::tie(b.score, a.provenance, a.class_id, a.box.x1, a.box.y1,
                    a.box.x2, a.box.y2, a.proposal_index) <
           std::tie(a.score, b.provenance, b.class_id, b.box.x1, b.box.y1,
                    b.box.x2, b.box.y2, b.proposal_index);
  });
  return dets;
}

inline bool detections_multiset_eq(const std::vector<Detection>& a,
                                   const std::vector<Detection>& b) {
  if (a.size() != b.size()) return false;
  const std::vector<Detection> ca = canonical_order(a);
  const std::vector<Detection> cb = canonical_order(b);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (!detection_eq(ca[i], cb[i])) return false;
  }
  return true;
}

}  // namespace support
