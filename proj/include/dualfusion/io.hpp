#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "dualfusion/errors.hpp"
#include "dualfusion/evaluation.hpp"
#include "dualfusion/fusion_net.hpp"
#include "dualfusion/model.hpp"

// Serialized interchange formats. Scenes and detections are
// line-delimited JSON (one header record, then one record per line);
// checkpoints are a plain text listing of layer matrices. All formats
// parse strictly: unknown fields are rejected, and every diagnostic
// carries the line number and the path to the offending field. Reals
// round-trip exactly (shortest representation that parses back equal).

namespace dualfusion {

struct ScenesFile {
  DatasetHeader header;
  std::vector<SceneRecord> scenes;
};

namespace detail {

using json = nlohmann::json;

struct Cursor {
  int line = 0;
  std::string path;

  Cursor at(const std::string& key) const {
    return Cursor{line, path.empty() ? key : path + "." + key};
  }
  Cursor index(std::size_t i) const {
    return Cursor{line, path + "[" + std::to_string(i) + "]"};
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("line " + std::to_string(line) + ": " + msg +
                     (path.empty() ? "" : " at " + path));
  }
};

inline void require_known_keys(const json& obj,
                               std::initializer_list<const char*> allowed,
                               const Cursor& cur) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) cur.at(item.key()).fail("unknown field");
  }
}

inline const json& require_field(const json& obj, const char* key,
                                 const Cursor& cur) {
  const auto it = obj.find(key);
  if (it == obj.end()) cur.at(key).fail("missing field");
  return *it;
}

inline double parse_double(const json& v, const Cursor& cur) {
  if (!v.is_number()) cur.fail("expected a number");
  return v.get<double>();
}

inline int parse_int(const json& v, const Cursor& cur) {
  if (!v.is_number_integer()) cur.fail("expected an integer");
  return v.get<int>();
}

inline bool parse_bool(const json& v, const Cursor& cur) {
  if (!v.is_boolean()) cur.fail("expected a boolean");
  return v.get<bool>();
}

inline std::string parse_string(const json& v, const Cursor& cur) {
  if (!v.is_string()) cur.fail("expected a string");
  return v.get<std::string>();
}

inline std::vector<double> parse_double_array(const json& v, const Cursor& cur) {
  if (!v.is_array()) cur.fail("expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(parse_double(v[i], cur.index(i)));
  }
  return out;
}

inline std::vector<std::string> parse_string_array(const json& v,
                                                   const Cursor& cur) {
  if (!v.is_array()) cur.fail("expected an array");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(parse_string(v[i], cur.index(i)));
  }
  return out;
}

inline Box parse_box(const json& v, const Cursor& cur) {
  const std::vector<double> coords = parse_double_array(v, cur);
  if (coords.size() != 4) cur.fail("expected 4 box coordinates");
  return Box{coords[0], coords[1], coords[2], coords[3]};
}

inline json box_to_json(const Box& b) {
  return json::array({b.x1, b.y1, b.x2, b.y2});
}

inline Provenance parse_provenance(const json& v, const Cursor& cur) {
  const std::string s = parse_string(v, cur);
  if (s == "base") return Provenance::kBase;
  if (s == "novel") return Provenance::kNovel;
  if (s == "fusion") return Provenance::kFusion;
  cur.fail("expected one of base/novel/fusion, got \"" + s + "\"");
}

inline json parse_json_line(const std::string& line, int line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " +
                     std::string(e.what()));
  }
}

inline Proposal parse_proposal(const json& v, Source source, const Cursor& cur) {
  if (!v.is_object()) cur.fail("expected an object");
  require_known_keys(
      v, {"box", "predicted_box", "objectness", "feature", "logits"}, cur);
  Proposal p;
  p.source = source;
  p.box = parse_box(require_field(v, "box", cur), cur.at("box"));
  p.predicted_box = parse_box(require_field(v, "predicted_box", cur),
                              cur.at("predicted_box"));
  p.objectness =
      parse_double(require_field(v, "objectness", cur), cur.at("objectness"));
  p.feature =
      parse_double_array(require_field(v, "feature", cur), cur.at("feature"));
  p.logits =
      parse_double_array(require_field(v, "logits", cur), cur.at("logits"));
  return p;
}

inline Detection parse_detection(const json& v, const Cursor& cur,
                                 bool with_provenance, Provenance fixed) {
  if (!v.is_object()) cur.fail("expected an object");
  if (with_provenance) {
    require_known_keys(
        v, {"box", "class_id", "score", "provenance", "proposal_index"}, cur);
  } else {
    require_known_keys(v, {"box", "class_id", "score", "proposal_index"}, cur);
  }
  Detection d;
  d.box = parse_box(require_field(v, "box", cur), cur.at("box"));
  d.class_id =
      parse_int(require_field(v, "class_id", cur), cur.at("class_id"));
  d.score = parse_double(require_field(v, "score", cur), cur.at("score"));
  d.provenance = with_provenance
                     ? parse_provenance(require_field(v, "provenance", cur),
                                        cur.at("provenance"))
                     : fixed;
  d.proposal_index = parse_int(require_field(v, "proposal_index", cur),
                               cur.at("proposal_index"));
  return d;
}

inline DetectorOutput parse_detector_output(const json& v, Source source,
                                            const Cursor& cur) {
  if (!v.is_object()) cur.fail("expected an object");
  require_known_keys(v, {"proposals", "detections"}, cur);
  DetectorOutput out;
  out.source = source;
  const json& props = require_field(v, "proposals", cur);
  if (!props.is_array()) cur.at("proposals").fail("expected an array");
  for (std::size_t i = 0; i < props.size(); ++i) {
    out.proposals.push_back(
        parse_proposal(props[i], source, cur.at("proposals").index(i)));
  }
  const json& dets = require_field(v, "detections", cur);
  if (!dets.is_array()) cur.at("detections").fail("expected an array");
  const Provenance prov =
      source == Source::kBase ? Provenance::kBase : Provenance::kNovel;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    out.detections.push_back(
        parse_detection(dets[i], cur.at("detections").index(i), false, prov));
  }
  return out;
}

inline SceneRecord parse_scene_record(const json& v, const Cursor& cur) {
  if (!v.is_object()) cur.fail("expected an object");
  require_known_keys(v,
                     {"image_id", "width", "height", "ground_truth",
                      "base_output", "novel_output"},
                     cur);
  SceneRecord scene;
  scene.image_id =
      parse_string(require_field(v, "image_id", cur), cur.at("image_id"));
  scene.width = parse_int(require_field(v, "width", cur), cur.at("width"));
  scene.height = parse_int(require_field(v, "height", cur), cur.at("height"));
  const json& gts = require_field(v, "ground_truth", cur);
  if (!gts.is_array()) cur.at("ground_truth").fail("expected an array");
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const Cursor at = cur.at("ground_truth").index(i);
    const json& g = gts[i];
    if (!g.is_object()) at.fail("expected an object");
    require_known_keys(g, {"box", "class_id", "is_pseudo"}, at);
    GroundTruthObject gt;
    gt.box = parse_box(require_field(g, "box", at), at.at("box"));
    gt.class_id =
        parse_int(require_field(g, "class_id", at), at.at("class_id"));
    gt.is_pseudo =
        parse_bool(require_field(g, "is_pseudo", at), at.at("is_pseudo"));
    scene.ground_truth.push_back(gt);
  }
  scene.base_output = parse_detector_output(
      require_field(v, "base_output", cur), Source::kBase, cur.at("base_output"));
  scene.novel_output =
      parse_detector_output(require_field(v, "novel_output", cur),
                            Source::kNovel, cur.at("novel_output"));
  return scene;
}

inline json detection_to_json(const Detection& d, bool with_provenance) {
  json v;
  v["box"] = box_to_json(d.box);
  v["class_id"] = d.class_id;
  v["score"] = d.score;
  if (with_provenance) v["provenance"] = to_string(d.provenance);
  v["proposal_index"] = d.proposal_index;
  return v;
}

inline json detector_output_to_json(const DetectorOutput& out) {
  json v;
  v["proposals"] = json::array();
  for (const Proposal& p : out.proposals) {
    json pj;
    pj["box"] = box_to_json(p.box);
    pj["predicted_box"] = box_to_json(p.predicted_box);
    pj["objectness"] = p.objectness;
    pj["feature"] = p.feature;
    pj["logits"] = p.logits;
    v["proposals"].push_back(std::move(pj));
  }
  v["detections"] = json::array();
  for (const Detection& d : out.detections) {
    v["detections"].push_back(detection_to_json(d, false));
  }
  return v;
}

inline std::string fmt_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline constexpr const char* kScenesFileType = "dualfusion_scenes";
inline constexpr const char* kDetectionsFileType = "dualfusion_detections";
inline constexpr int kFormatVersion = 1;

// Reads a scenes stream: one header line declaring the class partition
// and per-detector record shapes, then one scene per line. Every scene
// is checked against the header's invariants; duplicate image ids are
// rejected.
inline ScenesFile parse_scenes(std::istream& in) {
  std::string line;
  int line_no = 0;
  ScenesFile file;
  bool have_header = false;
  std::map<std::string, int> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const detail::json v = detail::parse_json_line(line, line_no);
    detail::Cursor cur{line_no, ""};
    if (!have_header) {
      if (!v.is_object()) cur.fail("expected a header object");
      detail::require_known_keys(
          v,
          {"type", "version", "base_classes", "novel_classes",
           "base_feature_dim", "novel_feature_dim", "base_logits_background",
           "novel_logits_background"},
          cur);
      const std::string type = detail::parse_string(
          detail::require_field(v, "type", cur), cur.at("type"));
      if (type != kScenesFileType) {
        cur.at("type").fail("expected \"" + std::string(kScenesFileType) +
                            "\", got \"" + type + "\"");
      }
      const int version = detail::parse_int(
          detail::require_field(v, "version", cur), cur.at("version"));
      if (version != kFormatVersion) {
        cur.at("version").fail("unsupported version " + std::to_string(version));
      }
      file.header.partition.base_classes = detail::parse_string_array(
          detail::require_field(v, "base_classes", cur), cur.at("base_classes"));
      file.header.partition.novel_classes = detail::parse_string_array(
          detail::require_field(v, "novel_classes", cur),
          cur.at("novel_classes"));
      file.header.base_feature_dim =
          detail::parse_int(detail::require_field(v, "base_feature_dim", cur),
                            cur.at("base_feature_dim"));
      file.header.novel_feature_dim =
          detail::parse_int(detail::require_field(v, "novel_feature_dim", cur),
                            cur.at("novel_feature_dim"));
      file.header.base_logits_background = detail::parse_bool(
          detail::require_field(v, "base_logits_background", cur),
          cur.at("base_logits_background"));
      file.header.novel_logits_background = detail::parse_bool(
          detail::require_field(v, "novel_logits_background", cur),
          cur.at("novel_logits_background"));
      have_header = true;
      continue;
    }
    SceneRecord scene = detail::parse_scene_record(v, cur);
    const auto [it, inserted] = seen_ids.emplace(scene.image_id, line_no);
    if (!inserted) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate image_id \"" + scene.image_id +
                            "\" (first seen at line " +
                            std::to_string(it->second) + ")");
    }
    const std::vector<std::string> violations =
        validate_scene(scene, file.header);
    if (!violations.empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            violations.front());
    }
    file.scenes.push_back(std::move(scene));
  }
  if (!have_header) throw ParseError("empty scenes file, expected a header line");
  return file;
}

inline void write_scenes(std::ostream& out, const ScenesFile& file) {
  detail::json header;
  header["type"] = kScenesFileType;
  header["version"] = kFormatVersion;
  header["base_classes"] = file.header.partition.base_classes;
  header["novel_classes"] = file.header.partition.novel_classes;
  header["base_feature_dim"] = file.header.base_feature_dim;
  header["novel_feature_dim"] = file.header.novel_feature_dim;
  header["base_logits_background"] = file.header.base_logits_background;
  header["novel_logits_background"] = file.header.novel_logits_background;
  out << header.dump() << "\n";
  for (const SceneRecord& scene : file.scenes) {
    detail::json v;
    v["image_id"] = scene.image_id;
    v["width"] = scene.width;
    v["height"] = scene.height;
    v["ground_truth"] = detail::json::array();
    for (const GroundTruthObject& gt : scene.ground_truth) {
      detail::json g;
      g["box"] = detail::box_to_json(gt.box);
      g["class_id"] = gt.class_id;
      g["is_pseudo"] = gt.is_pseudo;
      v["ground_truth"].push_back(std::move(g));
    }
    v["base_output"] = detail::detector_output_to_json(scene.base_output);
    v["novel_output"] = detail::detector_output_to_json(scene.novel_output);
    out << v.dump() << "\n";
  }
}

// Final detections, keyed by image. The header line carries only the
// format tag; detections carry their provenance explicitly.
inline std::map<std::string, std::vector<Detection>> parse_detections(
    std::istream& in) {
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::map<std::string, std::vector<Detection>> by_image;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const detail::json v = detail::parse_json_line(line, line_no);
    detail::Cursor cur{line_no, ""};
    if (!have_header) {
      if (!v.is_object()) cur.fail("expected a header object");
      detail::require_known_keys(v, {"type", "version"}, cur);
      const std::string type = detail::parse_string(
          detail::require_field(v, "type", cur), cur.at("type"));
      if (type != kDetectionsFileType) {
        cur.at("type").fail("expected \"" + std::string(kDetectionsFileType) +
                            "\", got \"" + type + "\"");
      }
      const int version = detail::parse_int(
          detail::require_field(v, "version", cur), cur.at("version"));
      if (version != kFormatVersion) {
        cur.at("version").fail("unsupported version " + std::to_string(version));
      }
      have_header = true;
      continue;
    }
    if (!v.is_object()) cur.fail("expected an object");
    detail::require_known_keys(v, {"image_id", "detections"}, cur);
    const std::string image_id = detail::parse_string(
        detail::require_field(v, "image_id", cur), cur.at("image_id"));
    if (by_image.count(image_id) != 0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate image_id \"" + image_id + "\"");
    }
    const detail::json& dets = detail::require_field(v, "detections", cur);
    if (!dets.is_array()) cur.at("detections").fail("expected an array");
    std::vector<Detection> parsed;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      parsed.push_back(detail::parse_detection(
          dets[i], cur.at("detections").index(i), true, Provenance::kBase));
    }
    by_image.emplace(image_id, std::move(parsed));
  }
  if (!have_header) {
    throw ParseError("empty detections file, expected a header line");
  }
  return by_image;
}

inline void write_detections(
    std::ostream& out,
    const std::map<std::string, std::vector<Detection>>& by_image) {
  detail::json header;
  header["type"] = kDetectionsFileType;
  header["version"] = kFormatVersion;
  out << header.dump() << "\n";
  for (const auto& [image_id, dets] : by_image) {
    detail::json v;
    v["image_id"] = image_id;
    v["detections"] = detail::json::array();
    for (const Detection& d : dets) {
      v["detections"].push_back(detail::detection_to_json(d, true));
    }
    out << v.dump() << "\n";
  }
}

// Checkpoint text format: a magic line, one dims line, then each layer
// as a "layer <name> <out> <in>" line followed by <out> weight rows and
// one bias row. Values use the shortest decimal form that parses back
// to the identical double.
inline void write_checkpoint(std::ostream& out, const FusionNetParams& params) {
  out << "dualfusion_checkpoint v" << kFormatVersion << "\n";
  out << "dims " << params.base_in << " " << params.novel_in << " "
      << params.d_h << " " << params.d_t << " " << params.n_classes << "\n";
  for_each_layer(params, [&](const char* name, const Affine& layer) {
    out << "layer " << name << " " << layer.out << " " << layer.in << "\n";
    for (int r = 0; r < layer.out; ++r) {
      for (int c = 0; c < layer.in; ++c) {
        if (c > 0) out << " ";
        out << detail::fmt_double(layer.w[static_cast<std::size_t>(r) * layer.in + c]);
      }
      out << "\n";
    }
    for (int r = 0; r < layer.out; ++r) {
      if (r > 0) out << " ";
      out << detail::fmt_double(layer.b[r]);
    }
    out << "\n";
  });
}

namespace detail {

struct LineReader {
  std::istream& in;
  int line_no = 0;

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty()) return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("line " + std::to_string(line_no) + ": " + msg);
  }
};

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

inline double parse_double_token(const std::string& tok, const LineReader& reader) {
  double value = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    reader.fail("expected a real number, got \"" + tok + "\"");
  }
  return value;
}

inline int parse_int_token(const std::string& tok, const LineReader& reader) {
  int value = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    reader.fail("expected an integer, got \"" + tok + "\"");
  }
  return value;
}

inline std::vector<double> parse_value_row(LineReader& reader, int expected,
                                           const std::string& what) {
  std::string line;
  if (!reader.next(line)) reader.fail("unexpected end of file in " + what);
  const std::vector<std::string> tokens = split_ws(line);
  if (static_cast<int>(tokens.size()) != expected) {
    reader.fail(what + ": expected " + std::to_string(expected) +
                " values, got " + std::to_string(tokens.size()));
  }
  std::vector<double> values(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    values[i] = parse_double_token(tokens[i], reader);
  }
  return values;
}

}  // namespace detail

inline FusionNetParams parse_checkpoint(std::istream& in) {
  detail::LineReader reader{in};
  std::string line;
  if (!reader.next(line)) reader.fail("empty checkpoint file");
  if (line != std::string("dualfusion_checkpoint v") +
                  std::to_string(kFormatVersion)) {
    reader.fail("bad magic line \"" + line + "\"");
  }
  if (!reader.next(line)) reader.fail("missing dims line");
  const std::vector<std::string> dims = detail::split_ws(line);
  if (dims.size() != 6 || dims[0] != "dims") {
    reader.fail("expected \"dims <base_in> <novel_in> <d_h> <d_t> <n_classes>\"");
  }
  FusionNetParams params = make_fusion_net(
      detail::parse_int_token(dims[1], reader),
      detail::parse_int_token(dims[2], reader),
      detail::parse_int_token(dims[3], reader),
      detail::parse_int_token(dims[4], reader),
      detail::parse_int_token(dims[5], reader));
  const auto layers = layer_ptrs(params);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Affine& layer = *layers[li];
    if (!reader.next(line)) reader.fail("unexpected end of file, expected a layer");
    const std::vector<std::string> tokens = detail::split_ws(line);
    if (tokens.size() != 4 || tokens[0] != "layer") {
      reader.fail("expected \"layer <name> <out> <in>\", got \"" + line + "\"");
    }
    if (tokens[1] != kLayerNames[li]) {
      reader.fail("expected layer " + std::string(kLayerNames[li]) + ", got " +
                  tokens[1]);
    }
    const int out_dim = detail::parse_int_token(tokens[2], reader);
    const int in_dim = detail::parse_int_token(tokens[3], reader);
    if (out_dim != layer.out || in_dim != layer.in) {
      reader.fail("layer " + tokens[1] + ": shape " + tokens[2] + "x" +
                  tokens[3] + " does not match dims line (" +
                  std::to_string(layer.out) + "x" + std::to_string(layer.in) +
                  ")");
    }
    for (int r = 0; r < layer.out; ++r) {
      const std::vector<double> row = detail::parse_value_row(
          reader, layer.in, "layer " + tokens[1] + " row " + std::to_string(r));
      std::copy(row.begin(), row.end(),
                layer.w.begin() + static_cast<std::size_t>(r) * layer.in);
    }
    layer.b = detail::parse_value_row(reader, layer.out,
                                      "layer " + tokens[1] + " bias");
  }
  if (reader.next(line)) reader.fail("unexpected trailing content");
  return params;
}

// Evaluation report as one indented JSON document.
inline void write_report(std::ostream& out, const EvalReport& report) {
  detail::json v;
  v["interpolation"] = report.interpolation;
  v["map50_base"] = report.map50_base;
  v["map50_novel"] = report.map50_novel;
  v["map50_all"] = report.map50_all;
  v["excluded_classes"] = report.excluded_classes;
  v["per_class"] = detail::json::array();
  for (const ClassEval& ce : report.per_class) {
    detail::json c;
    c["class_id"] = ce.class_id;
    c["name"] = ce.name;
    c["ap50"] = ce.ap50;
    c["gt_count"] = ce.gt_count;
    c["tp"] = ce.tp;
    c["fp"] = ce.fp;
    c["evaluated"] = ce.evaluated;
    v["per_class"].push_back(std::move(c));
  }
  out << v.dump(2) << "\n";
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path + " for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  return out;
}

}  // namespace detail

inline ScenesFile parse_scenes_file(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  try {
    return parse_scenes(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void write_scenes_file(const std::string& path, const ScenesFile& file) {
  std::ofstream out = detail::open_output(path);
  write_scenes(out, file);
}

inline std::map<std::string, std::vector<Detection>> parse_detections_file(
    const std::string& path) {
  std::ifstream in = detail::open_input(path);
  try {
    return parse_detections(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void write_detections_file(
    const std::string& path,
    const std::map<std::string, std::vector<Detection>>& by_image) {
  std::ofstream out = detail::open_output(path);
  write_detections(out, by_image);
}

inline FusionNetParams parse_checkpoint_file(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  try {
    return parse_checkpoint(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_checkpoint_file(const std::string& path,
                                  const FusionNetParams& params) {
  std::ofstream out = detail::open_output(path);
  write_checkpoint(out, params);
}

inline void write_report_file(const std::string& path, const EvalReport& report) {
  std::ofstream out = detail::open_output(path);
  write_report(out, report);
}

}  // namespace dualfusion
