/*
 * Copyright 2026 The liftmesh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Pose files are JSON Lines, one record per line:
//   {"id": <string|number>, "topology": "h36m17",
//    "joints": [[x, y], ...], "conf": [c, ...],   (conf optional)
//    "gt3d": [[x, y, z], ...]}                     (optional, mm)
// Blank lines are skipped.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "liftmesh/core/error.hpp"
#include "liftmesh/skeleton.hpp"
#include "json.hpp"

namespace liftmesh {

using json = nlohmann::json;

struct PoseRecord {
  json id;
  std::string topology = "h36m17";
  Pose2D pose;
  std::optional<Tensor> gt3d;  // mm
};

namespace detail {

inline Tensor rows_from_json(const json& j, std::size_t width, const std::string& what) {
  if (!j.is_array() || j.empty()) throw FormatError(what + " must be a non-empty array of rows");
  Tensor out({j.size(), width});
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != width)
      throw FormatError(what + " row " + std::to_string(r) + " must have " + std::to_string(width) + " numbers");
    for (std::size_t c = 0; c < width; ++c) {
      if (!row[c].is_number()) throw FormatError(what + " row " + std::to_string(r) + " holds a non-number");
      out(r, c) = row[c].get<double>();
    }
  }
  return out;
}

}  // namespace detail

inline json rows_to_json(const Tensor& t) {
  json out = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    json row = json::array();
    for (double v : t.row(r)) row.push_back(v);
    out.push_back(std::move(row));
  }
  return out;
}

inline PoseRecord parse_pose_record(const std::string& line, std::size_t line_no = 0) {
  const std::string where = "pose file line " + std::to_string(line_no);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(where + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw FormatError(where + ": record must be an object");
  PoseRecord rec;
  rec.id = j.value("id", json(line_no));
  if (j.contains("topology")) {
    if (!j["topology"].is_string()) throw FormatError(where + ": topology must be a string");
    rec.topology = j["topology"].get<std::string>();
  }
  if (!j.contains("joints")) throw FormatError(where + ": missing joints");
  Tensor coords = detail::rows_from_json(j["joints"], 2, where + ": joints");
  std::size_t expected = 0;
  try {
    expected = find_topology(rec.topology).joint_count();
  } catch (const NotFoundError&) {
    throw FormatError(where + ": unknown topology '" + rec.topology + "'");
  }
  if (coords.rows() != expected)
    throw FormatError(where + ": " + std::to_string(coords.rows()) + " joints for topology '" + rec.topology +
                      "', expected " + std::to_string(expected));
  std::vector<double> conf;
  if (j.contains("conf")) {
    if (!j["conf"].is_array()) throw FormatError(where + ": conf must be an array");
    for (const json& c : j["conf"]) {
      if (!c.is_number()) throw FormatError(where + ": conf holds a non-number");
      conf.push_back(c.get<double>());
    }
  }
  try {
    rec.pose = make_pose2d(std::move(coords), std::move(conf));
  } catch (const ContractViolation& e) {
    throw FormatError(where + ": " + e.what());
  }
  if (j.contains("gt3d")) rec.gt3d = detail::rows_from_json(j["gt3d"], 3, where + ": gt3d");
  return rec;
}

inline json pose_record_to_json(const PoseRecord& rec) {
  json j;
  j["id"] = rec.id;
  j["topology"] = rec.topology;
  j["joints"] = rows_to_json(rec.pose.coords);
  if (!rec.pose.confidence.empty()) j["conf"] = rec.pose.confidence;
  if (rec.gt3d) j["gt3d"] = rows_to_json(*rec.gt3d);
  return j;
}

inline std::vector<PoseRecord> parse_pose_file(std::istream& in) {
  std::vector<PoseRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_pose_record(line, n));
  }
  return out;
}

inline std::vector<PoseRecord> read_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file '" + path.string() + "'");
  return parse_pose_file(in);
}

inline void write_pose_file(std::ostream& out, const std::vector<PoseRecord>& records) {
  for (const PoseRecord& r : records) out << pose_record_to_json(r).dump() << '\n';
}

inline void write_pose_file(const std::filesystem::path& path, const std::vector<PoseRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_pose_file(out, records);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// COCO keypoint annotations

struct CocoPerson {
  json annotation_id;
  json image_id;
  Pose2D pose;  // coco17 order
};

/// Reads every annotation in a COCO keypoints JSON document. Each needs 17
/// (x, y, v) triplets; confidence is 1 where v > 0, else 0.
inline std::vector<CocoPerson> parse_coco_keypoints(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IngestionError(std::string("COCO file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("annotations") || !doc["annotations"].is_array())
    throw IngestionError("COCO file has no annotations array");
  std::vector<CocoPerson> out;
  std::size_t pos = 0;
  for (const json& ann : doc["annotations"]) {
    const json id = ann.is_object() ? ann.value("id", json(pos)) : json(pos);
    const std::string tag = "annotation " + id.dump();
    if (!ann.is_object()) throw IngestionError(tag + " is not an object");
    if (!ann.contains("keypoints") || !ann["keypoints"].is_array())
      throw IngestionError(tag + " has no keypoints array");
    const json& kp = ann["keypoints"];
    if (kp.size() != 17 * 3)
      throw IngestionError(tag + " has " + std::to_string(kp.size()) + " keypoint values, expected 51");
    Tensor coords({17, 2});
    std::vector<double> conf(17);
    for (std::size_t j = 0; j < 17; ++j) {
      for (std::size_t c = 0; c < 3; ++c)
        if (!kp[3 * j + c].is_number()) throw IngestionError(tag + " keypoint " + std::to_string(j) + " is not numeric");
      coords(j, 0) = kp[3 * j].get<double>();
      coords(j, 1) = kp[3 * j + 1].get<double>();
      conf[j] = kp[3 * j + 2].get<double>() > 0.0 ? 1.0 : 0.0;
    }
    out.push_back({id, ann.value("image_id", json()), make_pose2d(std::move(coords), std::move(conf))});
    ++pos;
  }
  return out;
}

inline std::vector<CocoPerson> read_coco_keypoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open COCO file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_coco_keypoints(ss.str());
}

}  // namespace liftmesh
