#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dualfusion/errors.hpp"
#include "dualfusion/geometry.hpp"
#include "dualfusion/merge.hpp"
#include "dualfusion/model.hpp"

namespace dualfusion {

// Synthetic two-detector scene generator. Each class owns a prototype
// feature vector in both detector feature spaces; object proposals are
// prototype plus Gaussian noise, with logits peaked on the true class.
// Confusable (base, novel) pairs share the first half of their
// prototype components, and the wrong detector emits an extra
// medium-confidence proposal on every object of either class in the
// pair. The confusion strength, canvas size, and decode thresholds are
// fixed; only the fields below are configurable.
struct SimConfig {
  int n_base = 0;
  int n_novel = 0;
  int base_feature_dim = 0;
  int novel_feature_dim = 0;
  int scenes = 0;
  int objects_min = 0;
  int objects_max = 0;
  double box_jitter = 2.0;       // pixels, std of per-coordinate noise
  double feature_noise = 0.1;    // std around the class prototype
  std::vector<std::pair<int, int>> confusable_pairs;  // (base id, novel id), global
  double detector_miss_rate = 0.0;
  double background_proposal_rate = 0.25;
  std::uint64_t seed = 1;
};

inline constexpr double kCanvasWidth = 1024.0;
inline constexpr double kCanvasHeight = 512.0;

namespace detail {

inline constexpr double kPeakLogit = 4.0;
inline constexpr double kConfusedLogit = 2.0;
inline constexpr double kLogitNoise = 0.3;
inline constexpr double kPeakNoise = 0.2;
inline constexpr double kDecodeScoreThresh = 0.3;
inline constexpr double kDecodeObjectnessThresh = 0.5;
inline constexpr double kDecodeNmsIou = 0.5;
inline constexpr int kBackgroundSlots = 4;
inline constexpr int kPlacementAttempts = 40;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

inline void validate_sim_config(const SimConfig& cfg) {
  const auto fail = [](const std::string& msg) { throw ValidationError("sim config: " + msg); };
  if (cfg.n_base <= 0) fail("n_base must be positive");
  if (cfg.n_novel <= 0) fail("n_novel must be positive");
  if (cfg.base_feature_dim <= 0) fail("base_feature_dim must be positive");
  if (cfg.novel_feature_dim <= 0) fail("novel_feature_dim must be positive");
  if (cfg.scenes <= 0) fail("scenes must be positive");
  if (cfg.objects_min < 0) fail("objects_min must be non-negative");
  if (cfg.objects_max < cfg.objects_min) fail("objects_max must be >= objects_min");
  if (!(cfg.box_jitter >= 0.0)) fail("box_jitter must be non-negative");
  if (!(cfg.feature_noise >= 0.0)) fail("feature_noise must be non-negative");
  if (!(cfg.detector_miss_rate >= 0.0 && cfg.detector_miss_rate <= 1.0)) {
    fail("detector_miss_rate must be in [0, 1]");
  }
  if (!(cfg.background_proposal_rate >= 0.0 && cfg.background_proposal_rate <= 1.0)) {
    fail("background_proposal_rate must be in [0, 1]");
  }
  for (const auto& [b, n] : cfg.confusable_pairs) {
    if (b < 0 || b >= cfg.n_base) fail("confusable pair base id out of range");
    if (n < cfg.n_base || n >= cfg.n_base + cfg.n_novel) {
      fail("confusable pair novel id out of range");
    }
  }
}

namespace detail {

inline std::string numbered_name(const char* prefix, int i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 2) digits.insert(digits.begin(), '0');
  return std::string(prefix) + "_" + digits;
}

}  // namespace detail

inline ClassPartition sim_partition(const SimConfig& cfg) {
  ClassPartition partition;
  for (int i = 0; i < cfg.n_base; ++i) {
    partition.base_classes.push_back(detail::numbered_name("base", i));
  }
  for (int i = 0; i < cfg.n_novel; ++i) {
    partition.novel_classes.push_back(detail::numbered_name("novel", i));
  }
  return partition;
}

inline DatasetHeader sim_header(const SimConfig& cfg) {
  DatasetHeader header;
  header.partition = sim_partition(cfg);
  header.base_feature_dim = cfg.base_feature_dim;
  header.novel_feature_dim = cfg.novel_feature_dim;
  header.base_logits_background = false;
  header.novel_logits_background = false;
  return header;
}

namespace detail {

// prototypes[space][class] for space 0 = base detector, 1 = novel.
inline std::vector<std::vector<std::vector<double>>> make_prototypes(const SimConfig& cfg) {
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xA5A5A5A5A5A5A5A5ull));
  std::normal_distribution<double> unit(0.0, 1.0);
  const int n_classes = cfg.n_base + cfg.n_novel;
  std::vector<std::vector<std::vector<double>>> protos(2);
  for (int space = 0; space < 2; ++space) {
    const int dim = space == 0 ? cfg.base_feature_dim : cfg.novel_feature_dim;
    protos[space].assign(n_classes, std::vector<double>(dim));
    for (int c = 0; c < n_classes; ++c) {
      for (int i = 0; i < dim; ++i) protos[space][c][i] = unit(rng);
    }
    for (const auto& [b, n] : cfg.confusable_pairs) {
      for (int i = 0; i < dim / 2; ++i) protos[space][n][i] = protos[space][b][i];
    }
  }
  return protos;
}

inline Box clamp_to_canvas(Box b) {
  b.x1 = std::clamp(b.x1, 0.0, kCanvasWidth - 2.0);
  b.y1 = std::clamp(b.y1, 0.0, kCanvasHeight - 2.0);
  b.x2 = std::clamp(b.x2, b.x1 + 1.0, kCanvasWidth);
  b.y2 = std::clamp(b.y2, b.y1 + 1.0, kCanvasHeight);
  return b;
}

inline Box jitter_box(const Box& b, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return b;
  std::normal_distribution<double> noise(0.0, sigma);
  Box out{b.x1 + noise(rng), b.y1 + noise(rng), b.x2 + noise(rng), b.y2 + noise(rng)};
  return clamp_to_canvas(out);
}

// Boxes are kept mutually separated so that with zero jitter no two
// proposals overlap enough to segregate as overlapping.
inline bool well_separated(const Box& candidate, const std::vector<Box>& placed,
                           double max_ioa) {
  for (const Box& other : placed) {
    if (ioa(candidate, other) > max_ioa || ioa(other, candidate) > max_ioa) return false;
  }
  return true;
}

inline bool try_place_box(std::vector<Box>& placed, double max_ioa,
                          std::mt19937_64& rng, Box& out) {
  std::uniform_real_distribution<double> w_dist(60.0, 180.0);
  std::uniform_real_distribution<double> h_dist(50.0, 150.0);
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    const double w = w_dist(rng);
    const double h = h_dist(rng);
    std::uniform_real_distribution<double> x_dist(0.0, kCanvasWidth - w);
    std::uniform_real_distribution<double> y_dist(0.0, kCanvasHeight - h);
    const double x = x_dist(rng);
    const double y = y_dist(rng);
    const Box candidate{x, y, x + w, y + h};
    if (well_separated(candidate, placed, max_ioa)) {
      placed.push_back(candidate);
      out = candidate;
      return true;
    }
  }
  return false;
}

inline std::vector<double> sample_feature(const std::vector<double>& proto,
                                          double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> f(proto);
  if (sigma > 0.0) {
    for (double& v : f) v += noise(rng);
  }
  return f;
}

inline std::vector<double> sample_logits(int len, int peak_index, double peak,
                                         std::mt19937_64& rng) {
  std::normal_distribution<double> other(0.0, kLogitNoise);
  std::normal_distribution<double> peak_noise(0.0, kPeakNoise);
  std::vector<double> logits(len);
  for (int i = 0; i < len; ++i) logits[i] = other(rng);
  if (peak_index >= 0) logits[peak_index] = peak + peak_noise(rng);
  return logits;
}

inline void append_proposal(DetectorOutput& out, const Box& box,
                            std::vector<double> feature, std::vector<double> logits,
                            double objectness) {
  Proposal p;
  p.box = box;
  p.predicted_box = box;
  p.objectness = objectness;
  p.feature = std::move(feature);
  p.logits = std::move(logits);
  p.source = out.source;
  out.proposals.push_back(std::move(p));
}

// Detector decode: softmax over class logits, keep the argmax class
// when the proposal clears the objectness and score thresholds, then
// per-class NMS. Logits carry no background slot, so background
// proposals are rejected by their low objectness.
inline void decode_detections(DetectorOutput& out, int class_id_offset) {
  std::vector<Detection> raw;
  for (std::size_t i = 0; i < out.proposals.size(); ++i) {
    const Proposal& p = out.proposals[i];
    if (p.objectness < kDecodeObjectnessThresh) continue;
    double max_logit = p.logits[0];
    int argmax = 0;
    for (int k = 1; k < static_cast<int>(p.logits.size()); ++k) {
      if (p.logits[k] > max_logit) {
        max_logit = p.logits[k];
        argmax = k;
      }
    }
    double denom = 0.0;
    for (const double v : p.logits) denom += std::exp(v - max_logit);
    const double score = 1.0 / denom;
    if (score < kDecodeScoreThresh) continue;
    Detection det;
    det.box = p.predicted_box;
    det.class_id = class_id_offset + argmax;
    det.score = score;
    det.provenance = out.source == Source::kBase ? Provenance::kBase : Provenance::kNovel;
    det.proposal_index = static_cast<int>(i);
    raw.push_back(det);
  }
  out.detections = nms_per_class(raw, kDecodeNmsIou);
}

}  // namespace detail

// Deterministic per seed. Scene i is generated from its own derived
// stream, so scene content is independent of how many scenes precede it.
inline std::vector<SceneRecord> generate(const SimConfig& cfg) {
  validate_sim_config(cfg);
  const auto protos = detail::make_prototypes(cfg);
  std::vector<SceneRecord> scenes;
  scenes.reserve(cfg.scenes);

  for (int s = 0; s < cfg.scenes; ++s) {
    std::mt19937_64 rng(detail::splitmix64(
        cfg.seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(s) + 1))));
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    SceneRecord scene;
    {
      std::string id = "scene_000000";
      int v = s;
      for (int pos = 11; pos >= 6; --pos) {
        id[pos] = static_cast<char>('0' + v % 10);
        v /= 10;
      }
      scene.image_id = id;
    }
    scene.width = static_cast<int>(kCanvasWidth);
    scene.height = static_cast<int>(kCanvasHeight);
    scene.base_output.source = Source::kBase;
    scene.novel_output.source = Source::kNovel;

    std::uniform_int_distribution<int> count_dist(cfg.objects_min, cfg.objects_max);
    const int n_objects = count_dist(rng);
    std::uniform_int_distribution<int> class_dist(0, cfg.n_base + cfg.n_novel - 1);
    std::uniform_real_distribution<double> real_objness(0.7, 1.0);
    std::uniform_real_distribution<double> confused_objness(0.6, 0.9);
    std::uniform_real_distribution<double> bg_objness(0.05, 0.3);

    std::vector<Box> placed;
    for (int obj = 0; obj < n_objects; ++obj) {
      const int c = class_dist(rng);
      Box gt_box;
      if (!detail::try_place_box(placed, 0.35, rng, gt_box)) continue;
      scene.ground_truth.push_back(GroundTruthObject{gt_box, c, false});

      const bool is_base_class = c < cfg.n_base;
      DetectorOutput& own = is_base_class ? scene.base_output : scene.novel_output;
      const int own_space = is_base_class ? 0 : 1;
      const int own_len = is_base_class ? cfg.n_base : cfg.n_novel;
      const int own_index = is_base_class ? c : c - cfg.n_base;
      if (coin(rng) >= cfg.detector_miss_rate) {
        const Box pbox = detail::jitter_box(gt_box, cfg.box_jitter, rng);
        detail::append_proposal(
            own, pbox,
            detail::sample_feature(protos[own_space][c], cfg.feature_noise, rng),
            detail::sample_logits(own_len, own_index, detail::kPeakLogit, rng),
            real_objness(rng));
      }

      for (const auto& [b, n] : cfg.confusable_pairs) {
        if (c != b && c != n) continue;
        const int wrong_class = c == b ? n : b;
        const bool wrong_is_base = wrong_class < cfg.n_base;
        DetectorOutput& wrong = wrong_is_base ? scene.base_output : scene.novel_output;
        const int wrong_space = wrong_is_base ? 0 : 1;
        const int wrong_len = wrong_is_base ? cfg.n_base : cfg.n_novel;
        const int wrong_index = wrong_is_base ? wrong_class : wrong_class - cfg.n_base;
        const Box pbox = detail::jitter_box(gt_box, cfg.box_jitter, rng);
        detail::append_proposal(
            wrong, pbox,
            detail::sample_feature(protos[wrong_space][wrong_class], cfg.feature_noise, rng),
            detail::sample_logits(wrong_len, wrong_index, detail::kConfusedLogit, rng),
            confused_objness(rng));
      }
    }

    for (DetectorOutput* out : {&scene.base_output, &scene.novel_output}) {
      const bool is_base_det = out->source == Source::kBase;
      const int dim = is_base_det ? cfg.base_feature_dim : cfg.novel_feature_dim;
      const int len = is_base_det ? cfg.n_base : cfg.n_novel;
      for (int slot = 0; slot < detail::kBackgroundSlots; ++slot) {
        if (coin(rng) >= cfg.background_proposal_rate) continue;
        Box bg_box;
        if (!detail::try_place_box(placed, 0.3, rng, bg_box)) continue;
        std::vector<double> feature(dim);
        std::normal_distribution<double> bg_feat(0.0, 1.0);
        for (double& v : feature) v = bg_feat(rng);
        detail::append_proposal(*out, bg_box, std::move(feature),
                                detail::sample_logits(len, -1, 0.0, rng),
                                bg_objness(rng));
      }
    }

    detail::decode_detections(scene.base_output, 0);
    detail::decode_detections(scene.novel_output, cfg.n_base);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace dualfusion
