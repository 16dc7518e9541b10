#include <charconv>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <dualfusion/dualfusion.hpp>

namespace df = dualfusion;

namespace {

std::vector<std::pair<int, int>> parse_confusable(const std::string& spec) {
  std::vector<std::pair<int, int>> pairs;
  if (spec.empty()) return pairs;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string item = spec.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    const std::size_t colon = item.find(':');
    int b = 0, n = 0;
    bool ok = colon != std::string::npos;
    if (ok) {
      const auto rb = std::from_chars(item.data(), item.data() + colon, b);
      const auto rn = std::from_chars(item.data() + colon + 1,
                                      item.data() + item.size(), n);
      ok = rb.ec == std::errc() && rb.ptr == item.data() + colon &&
           rn.ec == std::errc() && rn.ptr == item.data() + item.size();
    }
    if (!ok) {
      throw df::ValidationError("bad confusable pair \"" + item +
                                "\", expected <base id>:<novel id>");
    }
    pairs.emplace_back(b, n);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return pairs;
}

void print_report_summary(const df::EvalReport& report, bool per_class) {
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "          " << std::setw(8) << "base" << std::setw(8) << "novel"
            << std::setw(8) << "all" << "\n";
  std::cout << "  mAP50   " << std::setw(8) << report.map50_base << std::setw(8)
            << report.map50_novel << std::setw(8) << report.map50_all << "\n";
  if (!report.excluded_classes.empty()) {
    std::cout << "  classes without ground truth (excluded):";
    for (const int c : report.excluded_classes) {
      std::cout << " " << report.per_class[c].name;
    }
    std::cout << "\n";
  }
  if (per_class) {
    std::cout << "  per class:\n";
    for (const df::ClassEval& ce : report.per_class) {
      if (!ce.evaluated) continue;
      std::cout << "    " << std::setw(12) << std::left << ce.name << std::right
                << " ap50 " << std::setw(7) << ce.ap50 << "  gt " << std::setw(4)
                << ce.gt_count << "  tp " << std::setw(4) << ce.tp << "  fp "
                << std::setw(4) << ce.fp << "\n";
    }
  }
  std::cout.unsetf(std::ios::fixed);
}

df::FusionNetParams load_checkpoint_for(const df::ScenesFile& file,
                                        const std::string& path) {
  df::FusionNetParams params = df::parse_checkpoint_file(path);
  const auto [base_in, novel_in] = df::fusion_input_dims(file.header);
  if (params.base_in != base_in || params.novel_in != novel_in ||
      params.n_classes != file.header.partition.num_classes()) {
    throw df::ValidationError(
        "checkpoint dimensions (base_in " + std::to_string(params.base_in) +
        ", novel_in " + std::to_string(params.novel_in) + ", n_classes " +
        std::to_string(params.n_classes) +
        ") do not match the scenes header (base_in " + std::to_string(base_in) +
        ", novel_in " + std::to_string(novel_in) + ", n_classes " +
        std::to_string(file.header.partition.num_classes()) + ")");
  }
  return params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-detector fusion toolkit: simulate, segregate, mine, train, "
               "infer, eval, pipeline"};
  app.require_subcommand(1);

  // simulate
  struct {
    std::string out;
    std::string confusable;
    df::SimConfig cfg{.n_base = 10,
                      .n_novel = 4,
                      .base_feature_dim = 16,
                      .novel_feature_dim = 12,
                      .scenes = 100,
                      .objects_min = 1,
                      .objects_max = 4};
  } sim;
  {
    CLI::App* sub = app.add_subcommand(
        "simulate", "Generate a synthetic two-detector scenes file");
    sub->set_config("--config", "", "Read options from a config file");
    sub->add_option("--out", sim.out, "Output scenes file")->required();
    sub->add_option("--n-base", sim.cfg.n_base, "Base class count");
    sub->add_option("--n-novel", sim.cfg.n_novel, "Novel class count");
    sub->add_option("--base-feature-dim", sim.cfg.base_feature_dim,
                    "Base detector feature length");
    sub->add_option("--novel-feature-dim", sim.cfg.novel_feature_dim,
                    "Novel detector feature length");
    sub->add_option("--scenes", sim.cfg.scenes, "Number of scenes");
    sub->add_option("--objects-min", sim.cfg.objects_min,
                    "Minimum objects per scene");
    sub->add_option("--objects-max", sim.cfg.objects_max,
                    "Maximum objects per scene");
    sub->add_option("--box-jitter", sim.cfg.box_jitter,
                    "Std of proposal box noise, pixels");
    sub->add_option("--feature-noise", sim.cfg.feature_noise,
                    "Std of feature noise around class prototypes");
    sub->add_option("--confusable", sim.confusable,
                    "Confusable class pairs, e.g. \"0:10,1:11\" (base:novel "
                    "global ids)");
    sub->add_option("--miss-rate", sim.cfg.detector_miss_rate,
                    "Probability a detector misses an object");
    sub->add_option("--background-rate", sim.cfg.background_proposal_rate,
                    "Fill probability of each background proposal slot");
    sub->add_option("--seed", sim.cfg.seed, "Generator seed");
    sub->callback([&] {
      sim.cfg.confusable_pairs = parse_confusable(sim.confusable);
      df::ScenesFile file;
      file.header = df::sim_header(sim.cfg);
      file.scenes = df::generate(sim.cfg);
      df::write_scenes_file(sim.out, file);
      std::cout << "wrote " << file.scenes.size() << " scenes to " << sim.out
                << "\n";
    });
  }

  // segregate
  struct {
    std::string scenes;
    double tau = 0.5;
    bool assignments = false;
  } seg_args;
  {
    CLI::App* sub = app.add_subcommand(
        "segregate", "Report per-scene proposal bucket counts");
    sub->set_config("--config", "", "Read options from a config file");
    sub->add_option("--scenes", seg_args.scenes, "Scenes file")->required();
    sub->add_option("--tau", seg_args.tau, "Intersection-over-area threshold");
    sub->add_flag("--assignments", seg_args.assignments,
                  "Also print one line per proposal");
    sub->callback([&] {
      if (!(seg_args.tau >= 0.0 && seg_args.tau <= 1.0)) {
        throw df::ValidationError("tau must be in [0, 1]");
      }
      const df::ScenesFile file = df::parse_scenes_file(seg_args.scenes);
      std::size_t tb = 0, tn = 0, to = 0;
      for (const df::SceneRecord& scene : file.scenes) {
        const df::SegregationResult seg =
            df::segregate(scene.base_output.proposals,
                          scene.novel_output.proposals, seg_args.tau);
        tb += seg.valid_base.size();
        tn += seg.valid_novel.size();
        to += seg.overlapping.size();
        std::cout << scene.image_id << " valid_base=" << seg.valid_base.size()
                  << " valid_novel=" << seg.valid_novel.size()
                  << " overlapping=" << seg.overlapping.size() << "\n";
        if (seg_args.assignments) {
          for (const std::size_t i : seg.valid_base) {
            std::cout << "  base[" << i << "] valid\n";
          }
          for (const std::size_t i : seg.valid_novel) {
            std::cout << "  novel[" << i << "] valid\n";
          }
          for (const auto& [source, i] : seg.overlapping) {
            std::cout << "  " << df::to_string(source) << "[" << i
                      << "] overlapping\n";
          }
        }
      }
      std::cout << "total valid_base=" << tb << " valid_novel=" << tn
                << " overlapping=" << to << "\n";
    });
  }

  // mine
  struct {
    std::string scenes;
    std::string out;
    df::MiningConfig cfg;
  } mine_args;
  {
    CLI::App* sub = app.add_subcommand(
        "mine", "Append pseudo ground truth mined from base detections");
    sub->set_config("--config", "", "Read options from a config file");
    sub->add_option("--scenes", mine_args.scenes, "Input scenes file")->required();
    sub->add_option("--out", mine_args.out, "Output scenes file")->required();
    sub->add_option("--score-thresh", mine_args.cfg.score_thresh,
                    "Minimum detection score to trust");
    sub->add_option("--removal-iou", mine_args.cfg.removal_iou,
                    "Drop detections overlapping novel ground truth above this "
                    "IoU");
    sub->callback([&] {
      df::ScenesFile file = df::parse_scenes_file(mine_args.scenes);
      const df::ClassPartition& partition = file.header.partition;
      std::vector<long> counts(partition.num_classes(), 0);
      for (df::SceneRecord& scene : file.scenes) {
        const std::size_t before = scene.ground_truth.size();
        df::mine_scene(&scene, partition, mine_args.cfg);
        for (std::size_t i = before; i < scene.ground_truth.size(); ++i) {
          ++counts[scene.ground_truth[i].class_id];
        }
      }
      df::write_scenes_file(mine_args.out, file);
      long total = 0;
      int covered = 0;
      for (int c = 0; c < partition.num_classes(); ++c) {
        if (counts[c] == 0) continue;
        std::cout << partition.name_of(c) << ": " << counts[c]
                  << " pseudo labels\n";
        total += counts[c];
        ++covered;
      }
      std::cout << "mined " << total << " pseudo labels across " << covered
                << " of " << partition.num_base() << " base classes\n";
    });
  }

  // train
  struct {
    std::string scenes;
    std::string out;
    bool mine = true;
    df::PipelineConfig cfg;
  } train_args;
  {
    CLI::App* sub = app.add_subcommand(
        "train", "Train the fusion network and write a checkpoint");
    sub->set_config("--config", "", "Read options from a config file");
    sub->add_option("--scenes", train_args.scenes, "Training scenes file")
        ->required();
    sub->add_option("--out", train_args.out, "Output checkpoint file")->required();
    sub->add_flag("--mine,!--no-mine", train_args.mine,
                  "Mine pseudo labels before building the training set "
                  "(disable when the file already carries them)");
    sub->add_option("--tau", train_args.cfg.tau, "Segregation threshold");
    sub->add_option("--match-iou", train_args.cfg.match_iou,
                    "Minimum IoU to assign a ground-truth target");
    sub->add_option("--score-thresh", train_args.cfg.pseudo_score_thresh,
                    "Pseudo-label score threshold");
    sub->add_option("--removal-iou", train_args.cfg.removal_iou,
                    "Pseudo-label novel-overlap removal threshold");
    sub->add_option("--epochs", train_args.cfg.epochs, "Training epochs");
    sub->add_option("--lr", train_args.cfg.lr, "Learning rate");
    sub->add_option("--batch-size", train_args.cfg.batch_size, "Minibatch size");
    sub->add_option("--momentum", train_args.cfg.momentum, "SGD momentum");
    sub->add_option("--d-h", train_args.cfg.d_h, "Branch hidden width");
    sub->add_option("--d-t", train_args.cfg.d_t, "Trunk width");
    sub->add_option("--seed", train_args.cfg.seed, "Init and shuffle seed");
    sub->callback([&] {
      df::validate_pipeline_config(train_args.cfg);
      df::ScenesFile file = df::parse_scenes_file(train_args.scenes);
      const df::ClassPartition& partition = file.header.partition;
      if (train_args.mine) {
        const df::MiningConfig mining{train_args.cfg.pseudo_score_thresh,
                                      train_args.cfg.removal_iou};
        for (df::SceneRecord& scene : file.scenes) {
          df::mine_scene(&scene, partition, mining);
        }
      }
      const std::vector<df::FusionExample> dataset = df::build_training_set(
          file.scenes, partition, train_args.cfg.tau, train_args.cfg.match_iou);
      if (dataset.empty()) {
        throw df::ValidationError(
            "training set is empty: no overlapping proposals in " +
            train_args.scenes);
      }
      const auto [base_in, novel_in] = df::fusion_input_dims(file.header);
      df::TrainConfig tc;
      tc.epochs = train_args.cfg.epochs;
      tc.lr = train_args.cfg.lr;
      tc.batch_size = train_args.cfg.batch_size;
      tc.momentum = train_args.cfg.momentum;
      tc.seed = train_args.cfg.seed;
      const df::FusionNetParams init = df::init_params(
          base_in, novel_in, train_args.cfg.d_h, train_args.cfg.d_t,
          partition.num_classes(), train_args.cfg.seed);
      const df::TrainResult result = df::train(init, dataset, tc);
      df::write_checkpoint_file(train_args.out, result.params);
      std::cout << "trained on " << dataset.size() << " examples\n";
      std::cout << std::fixed << std::setprecision(6);
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        const df::LossBreakdown& lb = result.epoch_loss[e];
        std::cout << "epoch " << (e + 1) << " loss " << lb.total
                  << " (class " << lb.classification << ", box " << lb.box
                  << ")\n";
      }
      std::cout.unsetf(std::ios::fixed);
      std::cout << "wrote checkpoint to " << train_args.out << "\n";
    });
  }

  // infer
  struct {
    std::string scenes;
    std::string checkpoint;
    std::string out;
    df::PipelineConfig cfg;
  } infer_args;
  {
    CLI::App* sub = app.add_subcommand(
        "infer", "Run segregation, fusion, and merging; write detections");
    sub->set_config("--config", "", "Read options from a config file");
    sub->add_option("--scenes", infer_args.scenes, "Scenes file")->required();
    sub->add_option("--checkpoint", infer_args.checkpoint,
                    "Fusion network checkpoint")
        ->required();
    sub->add_option("--out", infer_args.out, "Output detections file")->required();
    sub->add_option("--tau", infer_args.cfg.tau, "Segregation threshold");
    sub->add_option("--cross-iou", infer_args.cfg.cross_iou,
                    "Cross-detector merge threshold");
    sub->add_option("--fusion-score-thresh", infer_args.cfg.fusion_score_thresh,
                    "Minimum fusion score to emit a detection");
    sub->callback([&] {
      df::validate_pipeline_config(infer_args.cfg);
      const df::ScenesFile file = df::parse_scenes_file(infer_args.scenes);
      const df::FusionNetParams params =
          load_checkpoint_for(file, infer_args.checkpoint);
      std::map<std::string, std::vector<df::Detection>> by_image;
      for (const df::SceneRecord& scene : file.scenes) {
        by_image.emplace(scene.image_id,
                         df::infer_scene(scene, params, infer_args.cfg));
      }
      df::write_detections_file(infer_args.out, by_image);
      std::cout << "wrote detections for " << by_image.size() << " scenes to "
                << infer_args.out << "\n";
    });
  }

  // eval
  struct {
    std::string scenes;
    std::string detections;
    std::string out;
    bool per_class = false;
  } eval_args;
  {
    CLI::App* sub =
        app.add_subcommand("eval", "Score a detections file against a scenes file");
    sub->set_config("--config", "", "Read options from a config file");
    sub->add_option("--scenes", eval_args.scenes, "Scenes file")->required();
    sub->add_option("--detections", eval_args.detections, "Detections file")
        ->required();
    sub->add_option("--out", eval_args.out, "Write the report as JSON");
    sub->add_flag("--per-class", eval_args.per_class, "Print per-class rows");
    sub->callback([&] {
      const df::ScenesFile file = df::parse_scenes_file(eval_args.scenes);
      const auto by_image = df::parse_detections_file(eval_args.detections);
      const df::EvalReport report =
          df::evaluate(file.scenes, by_image, file.header.partition);
      print_report_summary(report, eval_args.per_class);
      if (!eval_args.out.empty()) {
        df::write_report_file(eval_args.out, report);
        std::cout << "wrote report to " << eval_args.out << "\n";
      }
    });
  }

  // pipeline
  struct {
    std::string train_scenes;
    std::string test_scenes;
    std::string checkpoint_out;
    std::string detections_out;
    std::string report_out;
    bool per_class = false;
    df::PipelineConfig cfg;
  } pipe_args;
  {
    CLI::App* sub = app.add_subcommand(
        "pipeline", "Mine, train, infer, and evaluate in one run");
    sub->set_config("--config", "", "Read options from a config file");
    sub->add_option("--train-scenes", pipe_args.train_scenes,
                    "Training scenes file")
        ->required();
    sub->add_option("--test-scenes", pipe_args.test_scenes, "Test scenes file")
        ->required();
    sub->add_option("--checkpoint-out", pipe_args.checkpoint_out,
                    "Write the trained checkpoint here");
    sub->add_option("--detections-out", pipe_args.detections_out,
                    "Write final detections here");
    sub->add_option("--report-out", pipe_args.report_out,
                    "Write the evaluation report here");
    sub->add_flag("--per-class", pipe_args.per_class, "Print per-class rows");
    sub->add_option("--tau", pipe_args.cfg.tau, "Segregation threshold");
    sub->add_option("--cross-iou", pipe_args.cfg.cross_iou,
                    "Cross-detector merge threshold");
    sub->add_option("--score-thresh", pipe_args.cfg.pseudo_score_thresh,
                    "Pseudo-label score threshold");
    sub->add_option("--removal-iou", pipe_args.cfg.removal_iou,
                    "Pseudo-label novel-overlap removal threshold");
    sub->add_option("--fusion-score-thresh", pipe_args.cfg.fusion_score_thresh,
                    "Minimum fusion score to emit a detection");
    sub->add_option("--match-iou", pipe_args.cfg.match_iou,
                    "Minimum IoU to assign a ground-truth target");
    sub->add_option("--epochs", pipe_args.cfg.epochs, "Training epochs");
    sub->add_option("--lr", pipe_args.cfg.lr, "Learning rate");
    sub->add_option("--batch-size", pipe_args.cfg.batch_size, "Minibatch size");
    sub->add_option("--momentum", pipe_args.cfg.momentum, "SGD momentum");
    sub->add_option("--d-h", pipe_args.cfg.d_h, "Branch hidden width");
    sub->add_option("--d-t", pipe_args.cfg.d_t, "Trunk width");
    sub->add_option("--seed", pipe_args.cfg.seed, "Init and shuffle seed");
    sub->add_option("--shots", pipe_args.cfg.shots,
                    "Annotated instances per novel class (metadata)");
    sub->callback([&] {
      const df::ScenesFile train_file =
          df::parse_scenes_file(pipe_args.train_scenes);
      const df::ScenesFile test_file =
          df::parse_scenes_file(pipe_args.test_scenes);
      const df::PipelineResult result =
          df::run_pipeline(train_file, test_file, pipe_args.cfg);
      std::cout << "pseudo labels: " << result.pseudo_labels << "\n";
      std::cout << "fusion training examples: " << result.training_examples
                << "\n";
      if (result.fusion_trained) {
        std::cout << std::fixed << std::setprecision(6);
        std::cout << "final epoch loss: " << result.epoch_loss.back().total
                  << "\n";
        std::cout.unsetf(std::ios::fixed);
      } else {
        std::cout << "fusion not trained (no overlapping proposals)\n";
      }
      std::cout << "cross-detector duplicates: " << result.confusion_before
                << " before merge, " << result.confusion_after << " after\n";
      print_report_summary(result.report, pipe_args.per_class);
      if (!pipe_args.checkpoint_out.empty()) {
        df::write_checkpoint_file(pipe_args.checkpoint_out, result.params);
        std::cout << "wrote checkpoint to " << pipe_args.checkpoint_out << "\n";
      }
      if (!pipe_args.detections_out.empty()) {
        df::write_detections_file(pipe_args.detections_out, result.detections);
        std::cout << "wrote detections to " << pipe_args.detections_out << "\n";
      }
      if (!pipe_args.report_out.empty()) {
        df::write_report_file(pipe_args.report_out, result.report);
        std::cout << "wrote report to " << pipe_args.report_out << "\n";
      }
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const df::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const df::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const df::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
