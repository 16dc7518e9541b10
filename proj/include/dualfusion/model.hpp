#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dualfusion/errors.hpp"
#include "dualfusion/geometry.hpp"

namespace dualfusion {

enum class Source { kBase, kNovel };

enum class Provenance { kBase, kNovel, kFusion };

inline const char* to_string(Source s) {
  return s == Source::kBase ? "base" : "novel";
}

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kBase: return "base";
    case Provenance::kNovel: return "novel";
    default: return "fusion";
  }
}

// Class-name partition into base (abundant) and novel (few-shot) sets.
// Global ids are assigned base-block first: base classes get 0..|B|-1,
// novel classes |B|..|B|+|N|-1, and the background id is |B|+|N|. The
// fixed layout lets fusion targets and evaluation aggregates index
// without lookup tables.
struct ClassPartition {
  std::vector<std::string> base_classes;
  std::vector<std::string> novel_classes;

  int num_base() const { return static_cast<int>(base_classes.size()); }
  int num_novel() const { return static_cast<int>(novel_classes.size()); }
  int num_classes() const { return num_base() + num_novel(); }
  int background_id() const { return num_classes(); }

  bool is_base(int class_id) const {
    return class_id >= 0 && class_id < num_base();
  }
  bool is_novel(int class_id) const {
    return class_id >= num_base() && class_id < num_classes();
  }

  const std::string& name_of(int class_id) const {
    if (is_base(class_id)) return base_classes[class_id];
    if (is_novel(class_id)) return novel_classes[class_id - num_base()];
    throw ValidationError("class id " + std::to_string(class_id) +
                          " out of range");
  }
};

// Returns the global id of a class name; base names map below |B|.
inline int class_id_of(const ClassPartition& partition,
                       const std::string& name) {
  for (int i = 0; i < partition.num_base(); ++i) {
    if (partition.base_classes[i] == name) return i;
  }
  for (int i = 0; i < partition.num_novel(); ++i) {
    if (partition.novel_classes[i] == name) return partition.num_base() + i;
  }
  throw ValidationError("unknown class name \"" + name + "\"");
}

// Candidate region emitted by one detector, with the records the fusion
// network consumes: penultimate feature vector, per-class logits in the
// source detector's own class space, and the refined box prediction.
struct Proposal {
  Box box;
  double objectness = 0.0;
  std::vector<double> feature;
  std::vector<double> logits;
  Box predicted_box;
  Source source = Source::kBase;
};

// A scored detection. class_id is always a global id, for detector
// outputs as well as final outputs. proposal_index links a detector's
// detection back to the proposal it came from (-1 when the detection did
// not come from a proposal list, e.g. fusion outputs).
struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;
  Provenance provenance = Provenance::kBase;
  int proposal_index = -1;
};

struct GroundTruthObject {
  Box box;
  int class_id = 0;
  bool is_pseudo = false;
};

// Everything one detector produced for one image: its candidate
// proposals and its own final detections (post its internal NMS).
struct DetectorOutput {
  Source source = Source::kBase;
  std::vector<Proposal> proposals;
  std::vector<Detection> detections;
};

// Interchange unit: one image's ground truth plus both detectors' outputs.
struct SceneRecord {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthObject> ground_truth;
  DetectorOutput base_output;
  DetectorOutput novel_output;
};

// Per-dataset declarations carried in the scenes file header. Logits
// lengths are declared here rather than inferred per record, so
// malformed records fail loudly; the background-slot flags resolve
// whether each detector's logits carry an extra background entry.
struct DatasetHeader {
  ClassPartition partition;
  int base_feature_dim = 0;
  int novel_feature_dim = 0;
  bool base_logits_background = false;
  bool novel_logits_background = false;

  int base_logits_len() const {
    return partition.num_base() + (base_logits_background ? 1 : 0);
  }
  int novel_logits_len() const {
    return partition.num_novel() + (novel_logits_background ? 1 : 0);
  }
  int feature_dim(Source s) const {
    return s == Source::kBase ? base_feature_dim : novel_feature_dim;
  }
  int logits_len(Source s) const {
    return s == Source::kBase ? base_logits_len() : novel_logits_len();
  }
};

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void check_detector_output(const DetectorOutput& out, Source expected,
                                  const DatasetHeader& header,
                                  const std::string& path,
                                  std::vector<std::string>* violations) {
  const ClassPartition& partition = header.partition;
  if (out.source != expected) {
    violations->push_back("source mismatch at " + path + ".source");
  }
  for (std::size_t i = 0; i < out.proposals.size(); ++i) {
    const Proposal& p = out.proposals[i];
    const std::string at = path + ".proposals[" + std::to_string(i) + "]";
    if (p.source != expected) {
      violations->push_back("source mismatch at " + at + ".source");
    }
    if (!box_valid(p.box)) {
      violations->push_back("zero-area or non-finite box at " + at + ".box");
    }
    if (!box_valid(p.predicted_box)) {
      violations->push_back("zero-area or non-finite box at " + at +
                            ".predicted_box");
    }
    if (!(p.objectness >= 0.0 && p.objectness <= 1.0)) {
      violations->push_back("objectness outside [0,1] at " + at +
                            ".objectness");
    }
    if (static_cast<int>(p.feature.size()) != header.feature_dim(expected)) {
      violations->push_back(
          "feature length " + std::to_string(p.feature.size()) +
          " != declared " + std::to_string(header.feature_dim(expected)) +
          " at " + at + ".feature");
    }
    if (static_cast<int>(p.logits.size()) != header.logits_len(expected)) {
      violations->push_back(
          "logits length " + std::to_string(p.logits.size()) +
          " != declared " + std::to_string(header.logits_len(expected)) +
          " at " + at + ".logits");
    }
    if (!all_finite(p.feature)) {
      violations->push_back("non-finite feature value at " + at + ".feature");
    }
    if (!all_finite(p.logits)) {
      violations->push_back("non-finite logit at " + at + ".logits");
    }
  }
  for (std::size_t i = 0; i < out.detections.size(); ++i) {
    const Detection& d = out.detections[i];
    const std::string at = path + ".detections[" + std::to_string(i) + "]";
    const bool provenance_matches =
        (expected == Source::kBase && d.provenance == Provenance::kBase) ||
        (expected == Source::kNovel && d.provenance == Provenance::kNovel);
    if (!provenance_matches) {
      violations->push_back("provenance mismatch at " + at + ".provenance");
    }
    if (!box_valid(d.box)) {
      violations->push_back("zero-area or non-finite box at " + at + ".box");
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      violations->push_back("score outside [0,1] at " + at + ".score");
    }
    const bool class_in_block = expected == Source::kBase
                                    ? partition.is_base(d.class_id)
                                    : partition.is_novel(d.class_id);
    if (!class_in_block) {
      violations->push_back("class id " + std::to_string(d.class_id) +
                            " outside the " +
                            std::string(to_string(expected)) +
                            " block at " + at + ".class_id");
    }
    if (d.proposal_index < 0 ||
        d.proposal_index >= static_cast<int>(out.proposals.size())) {
      violations->push_back("proposal_index " +
                            std::to_string(d.proposal_index) +
                            " out of range at " + at + ".proposal_index");
    }
  }
}

}  // namespace detail

// Collects every invariant violation in a scene with a path to the
// offending field. An empty result means the record is well-formed.
// Violations are data, not failures.
inline std::vector<std::string> validate_scene(const SceneRecord& scene,
                                               const DatasetHeader& header) {
  std::vector<std::string> violations;
  const ClassPartition& partition = header.partition;
  if (scene.image_id.empty()) {
    violations.push_back("empty image_id");
  }
  if (scene.width <= 0 || scene.height <= 0) {
    violations.push_back("non-positive image dimensions at width/height");
  }
  for (std::size_t i = 0; i < scene.ground_truth.size(); ++i) {
    const GroundTruthObject& gt = scene.ground_truth[i];
    const std::string at = "ground_truth[" + std::to_string(i) + "]";
    if (!box_valid(gt.box)) {
      violations.push_back("zero-area or non-finite box at " + at + ".box");
    }
    if (gt.class_id < 0 || gt.class_id >= partition.num_classes()) {
      violations.push_back("class id " + std::to_string(gt.class_id) +
                           " out of range at " + at + ".class_id");
    }
  }
  detail::check_detector_output(scene.base_output, Source::kBase, header,
                                "base_output", &violations);
  detail::check_detector_output(scene.novel_output, Source::kNovel, header,
                                "novel_output", &violations);
  return violations;
}

}  // namespace dualfusion
