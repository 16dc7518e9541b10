#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <string>
#include <vector>

#include "support.hpp"

using namespace dualfusion;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;
using Catch::Matchers::WithinAbs;

namespace {

SceneRecord bare_scene(const std::string& id) {
  SceneRecord s;
  s.image_id = id;
  s.width = 200;
  s.height = 200;
  s.base_output.source = Source::kBase;
  s.novel_output.source = Source::kNovel;
  return s;
}

GroundTruthObject gt(const Box& b, int cls, bool pseudo = false) {
  return GroundTruthObject{b, cls, pseudo};
}

}  // namespace

TEST_CASE("greedy matching follows score order and best iou") {
  const Box g0{0, 0, 20, 20};

  SECTION("the higher score claims the ground truth") {
    const std::vector<Detection> dets = {
        support::make_detection(Box{0, 0, 20, 22}, 0, 0.4, Provenance::kBase),
        support::make_detection(Box{0, 0, 20, 21}, 0, 0.9, Provenance::kBase)};
    const std::vector<bool> flags = match_detections(dets, {gt(g0, 0)}, 0.5);
    REQUIRE(flags.size() == 2);
    CHECK_FALSE(flags[0]);  // visited second, ground truth already taken
    CHECK(flags[1]);
  }

  SECTION("equal scores visit in input order") {
    const std::vector<Detection> dets = {
        support::make_detection(Box{0, 0, 20, 22}, 0, 0.6, Provenance::kBase),
        support::make_detection(Box{0, 0, 20, 21}, 0, 0.6, Provenance::kBase)};
    const std::vector<bool> flags = match_detections(dets, {gt(g0, 0)}, 0.5);
    CHECK(flags[0]);
    CHECK_FALSE(flags[1]);
  }

  SECTION("a detection picks its highest-iou unmatched ground truth") {
    const Box g1{0, 30, 20, 50};
    const std::vector<Detection> dets = {
        // Overlaps both boxes, g1 more strongly (iou 0.19 vs 0.316).
        support::make_detection(Box{0, 12, 20, 42}, 0, 0.9, Provenance::kBase),
        support::make_detection(Box{0, 0, 20, 19}, 0, 0.8, Provenance::kBase)};
    REQUIRE(iou(dets[0].box, g0) > 0.0);
    REQUIRE(iou(dets[0].box, g1) > iou(dets[0].box, g0));
    const std::vector<bool> flags =
        match_detections(dets, {gt(g0, 0), gt(g1, 0)}, 0.3);
    CHECK(flags[0]);  // takes g1, whose overlap clears the threshold
    CHECK(flags[1]);  // g0 still free
  }

  SECTION("iou exactly at the threshold is a true positive") {
    // iou({0,0,20,10},{0,0,20,20}) = 200/400 = 0.5.
    const std::vector<Detection> dets = {
        support::make_detection(Box{0, 0, 20, 10}, 0, 0.9, Provenance::kBase)};
    CHECK(match_detections(dets, {gt(g0, 0)}, 0.5)[0]);
    CHECK_FALSE(match_detections(dets, {gt(g0, 0)}, 0.51)[0]);
  }

  SECTION("each ground truth matches at most once") {
    const std::vector<Detection> dets = {
        support::make_detection(g0, 0, 0.9, Provenance::kBase),
        support::make_detection(g0, 0, 0.8, Provenance::kBase),
        support::make_detection(g0, 0, 0.7, Provenance::kBase)};
    const std::vector<bool> flags = match_detections(dets, {gt(g0, 0)}, 0.5);
    CHECK(flags[0]);
    CHECK_FALSE(flags[1]);
    CHECK_FALSE(flags[2]);
  }

  SECTION("pseudo ground truth never matches") {
    const std::vector<Detection> dets = {
        support::make_detection(g0, 0, 0.9, Provenance::kBase)};
    CHECK_FALSE(match_detections(dets, {gt(g0, 0, true)}, 0.5)[0]);
    // And it does not shadow a real box either.
    const std::vector<bool> flags =
        match_detections(dets, {gt(g0, 0, true), gt(g0, 0)}, 0.5);
    CHECK(flags[0]);
  }

  SECTION("no ground truth means all false positives") {
    const std::vector<Detection> dets = {
        support::make_detection(g0, 0, 0.9, Provenance::kBase)};
    CHECK_FALSE(match_detections(dets, {}, 0.5)[0]);
  }
}

TEST_CASE("average precision matches hand-computed envelopes") {
  SECTION("single true positive") {
    CHECK(ap50({{0.9, true}}, 1) == 1.0);
  }
  SECTION("false positive ranked above the true positive halves ap") {
    CHECK_THAT(ap50({{0.9, false}, {0.8, true}}, 1), WithinAbs(0.5, 1e-15));
  }
  SECTION("false positive ranked below does not hurt") {
    CHECK_THAT(ap50({{0.9, true}, {0.8, false}}, 1), WithinAbs(1.0, 1e-15));
  }
  SECTION("missing ground truth caps recall") {
    CHECK_THAT(ap50({{0.9, true}}, 2), WithinAbs(0.5, 1e-15));
  }
  SECTION("input order does not matter, scores do") {
    CHECK_THAT(ap50({{0.8, true}, {0.9, false}}, 1), WithinAbs(0.5, 1e-15));
  }
  SECTION("degenerate inputs give zero") {
    CHECK(ap50({}, 3) == 0.0);
    CHECK(ap50({{0.9, true}}, 0) == 0.0);
  }
  SECTION("zigzag sequence uses the precision envelope") {
    // TP FP TP with 2 gt: prec 1, 1/2, 2/3; recall 1/2, 1/2, 1.
    // Envelope at recall 1/2 is max(1, 2/3) = 1; ap = 1/2*1 + 1/2*2/3.
    CHECK_THAT(ap50({{0.9, true}, {0.8, false}, {0.7, true}}, 2),
               WithinAbs(0.5 + 0.5 * (2.0 / 3.0), 1e-15));
  }
}

TEST_CASE("evaluation agrees with prefix-recomputed average precision") {
  const DatasetHeader h = support::small_header();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_images(1, 5);
  std::uniform_int_distribution<int> n_dets(0, 5);
  std::uniform_int_distribution<int> n_gts(0, 5);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<int> pseudo_coin(0, 9);

  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    CAPTURE(trial);
    std::vector<SceneRecord> scenes;
    std::map<std::string, std::vector<Detection>> dets_by_image;
    std::vector<support::OracleImage> images;

    const int k = n_images(rng);
    for (int i = 0; i < k; ++i) {
      SceneRecord s = bare_scene("img_" + std::to_string(i));
      support::OracleImage oi;
      const int ng = n_gts(rng);
      for (int g = 0; g < ng; ++g) {
        // Boxes drawn from a small pool so detections actually overlap.
        const GroundTruthObject obj =
            gt(support::random_int_box(rng, 12), 0, pseudo_coin(rng) == 0);
        s.ground_truth.push_back(obj);
        oi.gts.push_back(obj);
      }
      const int nd = n_dets(rng);
      std::vector<Detection> dets;
      for (int d = 0; d < nd; ++d) {
        dets.push_back(support::make_detection(support::random_int_box(rng, 12),
                                               0, score(rng),
                                               Provenance::kBase));
      }
      oi.dets = dets;
      dets_by_image.emplace(s.image_id, std::move(dets));
      scenes.push_back(std::move(s));
      images.push_back(std::move(oi));
    }

    const EvalReport report = evaluate(scenes, dets_by_image, h.partition, 0.5);
    const double want = support::oracle_ap50(images, 0.5);
    const ClassEval& car = report.per_class[0];
    if (car.evaluated) {
      CHECK_THAT(car.ap50, WithinAbs(want, 1e-9));
      // Only the car class can be evaluated here, so the pooled mean
      // equals its ap and both aggregate means collapse onto it.
      CHECK_THAT(report.map50_all, WithinAbs(want, 1e-9));
      CHECK_THAT(report.map50_base, WithinAbs(want, 1e-9));
      CHECK(report.map50_novel == 0.0);
      ++compared;
    } else {
      CHECK(want == 0.0);
      CHECK(car.ap50 == 0.0);
    }
  }
  CHECK(compared > 100);  // the fixture family must mostly be non-degenerate
}

TEST_CASE("aggregates average per-class ap over classes with ground truth") {
  const DatasetHeader h = support::small_header();
  // Scene layout: car is found perfectly (ap 1), person has one of two
  // objects found (ap 0.5), rickshaw is found perfectly (ap 1).
  SceneRecord s = bare_scene("img_0");
  s.ground_truth.push_back(gt(Box{0, 0, 20, 20}, 0));
  s.ground_truth.push_back(gt(Box{40, 40, 60, 60}, 1));
  s.ground_truth.push_back(gt(Box{80, 80, 100, 100}, 1));
  s.ground_truth.push_back(gt(Box{120, 120, 140, 140}, 2));
  std::map<std::string, std::vector<Detection>> dets;
  dets["img_0"] = {
      support::make_detection(Box{0, 0, 20, 20}, 0, 0.9, Provenance::kBase),
      support::make_detection(Box{40, 40, 60, 60}, 1, 0.8, Provenance::kBase),
      support::make_detection(Box{120, 120, 140, 140}, 2, 0.7,
                              Provenance::kNovel)};

  const EvalReport report = evaluate({s}, dets, h.partition, 0.5);
  REQUIRE(report.per_class.size() == 3);
  CHECK(report.per_class[0].ap50 == 1.0);
  CHECK_THAT(report.per_class[1].ap50, WithinAbs(0.5, 1e-15));
  CHECK(report.per_class[2].ap50 == 1.0);
  CHECK(report.per_class[0].tp == 1);
  CHECK(report.per_class[0].fp == 0);
  CHECK(report.per_class[1].gt_count == 2);

  CHECK_THAT(report.map50_base, WithinAbs(0.75, 1e-15));
  CHECK_THAT(report.map50_novel, WithinAbs(1.0, 1e-15));
  // Mean over all three classes, not the mean of the two aggregates.
  CHECK_THAT(report.map50_all, WithinAbs(2.5 / 3.0, 1e-15));
  CHECK(report.excluded_classes.empty());
  CHECK(report.interpolation == "all_point");
}

TEST_CASE("classes without ground truth are excluded from aggregates") {
  const DatasetHeader h = support::small_header();
  SceneRecord s = bare_scene("img_0");
  s.ground_truth.push_back(gt(Box{0, 0, 20, 20}, 0));
  // A pseudo-only class does not count as having ground truth.
  s.ground_truth.push_back(gt(Box{40, 40, 60, 60}, 1, true));

  std::map<std::string, std::vector<Detection>> dets;
  dets["img_0"] = {
      support::make_detection(Box{0, 0, 20, 20}, 0, 0.9, Provenance::kBase),
      // Stray person detection: pooled as fp but the class stays excluded.
      support::make_detection(Box{40, 40, 60, 60}, 1, 0.8, Provenance::kBase)};

  const EvalReport report = evaluate({s}, dets, h.partition, 0.5);
  CHECK(report.per_class[0].evaluated);
  CHECK_FALSE(report.per_class[1].evaluated);
  CHECK(report.per_class[1].gt_count == 0);
  CHECK(report.per_class[1].fp == 1);
  CHECK(report.per_class[1].ap50 == 0.0);
  CHECK_FALSE(report.per_class[2].evaluated);
  REQUIRE(report.excluded_classes.size() == 2);
  CHECK(report.excluded_classes[0] == 1);
  CHECK(report.excluded_classes[1] == 2);
  // Aggregates ignore excluded classes entirely.
  CHECK(report.map50_base == 1.0);
  CHECK(report.map50_novel == 0.0);
  CHECK(report.map50_all == 1.0);
}

TEST_CASE("evaluation input checking") {
  const DatasetHeader h = support::small_header();
  const SceneRecord s = bare_scene("img_0");

  SECTION("unknown image ids are named in the error") {
    std::map<std::string, std::vector<Detection>> dets;
    dets["img_7"] = {};
    CHECK_THROWS_MATCHES(evaluate({s}, dets, h.partition), ValidationError,
                         MessageMatches(ContainsSubstring("img_7")));
  }

  SECTION("scenes missing from the map count as having no detections") {
    SceneRecord with_gt = bare_scene("img_0");
    with_gt.ground_truth.push_back(gt(Box{0, 0, 20, 20}, 0));
    const EvalReport report =
        evaluate({with_gt}, {}, h.partition, 0.5);
    CHECK(report.per_class[0].evaluated);
    CHECK(report.per_class[0].ap50 == 0.0);
    CHECK(report.per_class[0].gt_count == 1);
    CHECK(report.per_class[0].tp == 0);
  }
}
