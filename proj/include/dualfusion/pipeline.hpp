#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dualfusion/errors.hpp"
#include "dualfusion/evaluation.hpp"
#include "dualfusion/fusion_net.hpp"
#include "dualfusion/io.hpp"
#include "dualfusion/merge.hpp"
#include "dualfusion/model.hpp"
#include "dualfusion/pseudo_label.hpp"
#include "dualfusion/segregation.hpp"

namespace dualfusion {

// One knob set for the whole pipeline. tau 0.5 treats a proposal as
// overlapping once half its area is covered; raising it (e.g. 0.8)
// routes more proposals through fusion training. shots is metadata about
// how many annotated instances each novel class had; nothing downstream
// consumes it.
struct PipelineConfig {
  double tau = 0.5;
  double cross_iou = 0.5;
  double pseudo_score_thresh = 0.7;
  double removal_iou = 0.5;
  double fusion_score_thresh = 0.5;
  double match_iou = 0.5;
  int epochs = 10;
  double lr = 0.001;
  int batch_size = 16;
  double momentum = 0.9;
  int d_h = 32;
  int d_t = 32;
  std::uint64_t seed = 1;
  int shots = 10;
};

inline void validate_pipeline_config(const PipelineConfig& cfg) {
  const auto fail = [](const std::string& msg) {
    throw ValidationError("pipeline config: " + msg);
  };
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(cfg.tau)) fail("tau must be in [0, 1]");
  if (!in_unit(cfg.cross_iou)) fail("cross_iou must be in [0, 1]");
  if (!in_unit(cfg.pseudo_score_thresh)) fail("pseudo_score_thresh must be in [0, 1]");
  if (!in_unit(cfg.removal_iou)) fail("removal_iou must be in [0, 1]");
  if (!in_unit(cfg.fusion_score_thresh)) fail("fusion_score_thresh must be in [0, 1]");
  if (!in_unit(cfg.match_iou)) fail("match_iou must be in [0, 1]");
  if (cfg.epochs <= 0) fail("epochs must be positive");
  if (!(cfg.lr > 0.0)) fail("lr must be positive");
  if (cfg.batch_size <= 0) fail("batch_size must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (cfg.d_h <= 0) fail("d_h must be positive");
  if (cfg.d_t <= 0) fail("d_t must be positive");
  if (cfg.shots <= 0) fail("shots must be positive");
}

// Per-detector fusion branch widths implied by a dataset header:
// feature vector, class logits, and the 4 predicted box coordinates.
inline std::pair<int, int> fusion_input_dims(const DatasetHeader& header) {
  return {header.base_feature_dim + header.base_logits_len() + 4,
          header.novel_feature_dim + header.novel_logits_len() + 4};
}

inline void require_same_header(const DatasetHeader& a, const DatasetHeader& b) {
  const auto fail = [](const std::string& field) {
    throw ValidationError("train and test headers disagree at " + field);
  };
  if (a.partition.base_classes != b.partition.base_classes) fail("base_classes");
  if (a.partition.novel_classes != b.partition.novel_classes) fail("novel_classes");
  if (a.base_feature_dim != b.base_feature_dim) fail("base_feature_dim");
  if (a.novel_feature_dim != b.novel_feature_dim) fail("novel_feature_dim");
  if (a.base_logits_background != b.base_logits_background) {
    fail("base_logits_background");
  }
  if (a.novel_logits_background != b.novel_logits_background) {
    fail("novel_logits_background");
  }
}

struct PipelineResult {
  FusionNetParams params;
  std::map<std::string, std::vector<Detection>> detections;
  EvalReport report;
  long confusion_before = 0;  // cross-detector IoU>cross_iou pairs in the naive union
  long confusion_after = 0;   // same count in the merged output
  std::size_t pseudo_labels = 0;
  std::size_t training_examples = 0;
  bool fusion_trained = false;
  std::vector<LossBreakdown> epoch_loss;
};

namespace detail {

template <typename Fn>
auto pipeline_stage(const std::string& stage, const std::string& scene_id, Fn&& fn) {
  const auto context = [&]() {
    return scene_id.empty() ? "stage " + stage + ": "
                            : "stage " + stage + ", scene " + scene_id + ": ";
  };
  try {
    return fn();
  } catch (const DivergenceError& e) {
    throw DivergenceError(context() + e.what());
  } catch (const ParseError& e) {
    throw ParseError(context() + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(context() + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(context() + e.what());
  }
}

inline constexpr double kFusionNmsIou = 0.5;

}  // namespace detail

// Inference for one scene: segregate both proposal sets, keep each
// detector's detections whose source proposals fell in that detector's
// valid bucket, run the fusion net over the overlapping bucket (with
// its own per-class NMS, standing in for detector-internal NMS), then
// merge across provenances.
inline std::vector<Detection> infer_scene(const SceneRecord& scene,
                                          const FusionNetParams& params,
                                          const PipelineConfig& cfg) {
  const SegregationResult seg = segregate(scene.base_output.proposals,
                                          scene.novel_output.proposals, cfg.tau);
  std::vector<bool> base_valid(scene.base_output.proposals.size(), false);
  std::vector<bool> novel_valid(scene.novel_output.proposals.size(), false);
  for (const std::size_t i : seg.valid_base) base_valid[i] = true;
  for (const std::size_t i : seg.valid_novel) novel_valid[i] = true;

  std::vector<Detection> combined;
  for (const Detection& d : scene.base_output.detections) {
    if (d.proposal_index >= 0 && base_valid[d.proposal_index]) combined.push_back(d);
  }
  for (const Detection& d : scene.novel_output.detections) {
    if (d.proposal_index >= 0 && novel_valid[d.proposal_index]) combined.push_back(d);
  }
  const std::vector<FusionInput> inputs = make_fusion_inputs(scene, seg);
  const std::vector<Detection> fused = nms_per_class(
      predict(params, inputs, cfg.fusion_score_thresh), detail::kFusionNmsIou);
  combined.insert(combined.end(), fused.begin(), fused.end());
  return merge_detections(combined, cfg.cross_iou);
}

// Steps 3 and 4 end to end: mine pseudo ground truth on the training
// scenes, build the fusion training set from overlapping proposals,
// train the fusion net, then run per-scene inference over the test
// scenes and evaluate. Training scenes are consumed by value because
// mining appends pseudo labels to them. When no overlapping proposals
// exist in the training data the fusion stage keeps its initialization
// (nothing for it to learn or do; valid-bucket selection still runs).
inline PipelineResult run_pipeline(ScenesFile train_file, const ScenesFile& test_file,
                                   const PipelineConfig& cfg) {
  validate_pipeline_config(cfg);
  require_same_header(train_file.header, test_file.header);
  const ClassPartition& partition = train_file.header.partition;

  PipelineResult result;
  const MiningConfig mining{cfg.pseudo_score_thresh, cfg.removal_iou};
  for (SceneRecord& scene : train_file.scenes) {
    result.pseudo_labels += detail::pipeline_stage(
        "mine", scene.image_id,
        [&] { return mine_scene(&scene, partition, mining); });
  }

  std::vector<FusionExample> training_set = detail::pipeline_stage(
      "build_training_set", "", [&] {
        return build_training_set(train_file.scenes, partition, cfg.tau,
                                  cfg.match_iou);
      });
  result.training_examples = training_set.size();

  const auto [base_in, novel_in] = fusion_input_dims(train_file.header);
  result.params = init_params(base_in, novel_in, cfg.d_h, cfg.d_t,
                              partition.num_classes(), cfg.seed);
  if (!training_set.empty()) {
    TrainConfig train_cfg;
    train_cfg.epochs = cfg.epochs;
    train_cfg.lr = cfg.lr;
    train_cfg.batch_size = cfg.batch_size;
    train_cfg.momentum = cfg.momentum;
    train_cfg.seed = cfg.seed;
    TrainResult trained = detail::pipeline_stage(
        "train", "", [&] { return train(result.params, training_set, train_cfg); });
    result.params = std::move(trained.params);
    result.epoch_loss = std::move(trained.epoch_loss);
    result.fusion_trained = true;
  }

  for (const SceneRecord& scene : test_file.scenes) {
    std::vector<Detection> naive;
    naive.insert(naive.end(), scene.base_output.detections.begin(),
                 scene.base_output.detections.end());
    naive.insert(naive.end(), scene.novel_output.detections.begin(),
                 scene.novel_output.detections.end());
    result.confusion_before += count_cross_provenance_pairs(naive, cfg.cross_iou);

    std::vector<Detection> merged = detail::pipeline_stage(
        "infer", scene.image_id,
        [&] { return infer_scene(scene, result.params, cfg); });
    result.confusion_after += count_cross_provenance_pairs(merged, cfg.cross_iou);
    result.detections.emplace(scene.image_id, std::move(merged));
  }

  result.report = detail::pipeline_stage("eval", "", [&] {
    return evaluate(test_file.scenes, result.detections, partition);
  });
  return result;
}

}  // namespace dualfusion
