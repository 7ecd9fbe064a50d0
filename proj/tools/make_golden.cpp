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

// Regenerates the frozen fixtures under tests/data:
//
//   make_golden <dir>
//
// Outputs are regression goldens: rerun only when a numerical change is
// intended, and review the diff.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "json.hpp"
#include "liftmesh/liftmesh.hpp"

namespace {

using liftmesh::json;

const char* kToyConfig =
    "# small model used by the fixture tests\n"
    "seed = 7\n"
    "lifter.dim = 16\n"
    "lifter.branches = 2\n"
    "lifter.blocks = 1\n"
    "lifter.heads = 2\n"
    "pse.dim = 16\n"
    "pse.tokens = 8\n"
    "pse.hidden = 32\n"
    "train.steps = 20\n"
    "train.batch_size = 8\n"
    "train.lr = 0.005\n"
    "data.samples = 8\n"
    "data.seed = 3\n";

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw liftmesh::IoError("cannot write " + path);
  f << text;
}

json rows(const liftmesh::Tensor& t) { return liftmesh::rows_to_json(t); }

json flat(const liftmesh::Tensor& t) { return json(t.values()); }

double total(const liftmesh::Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace liftmesh;
  if (argc != 2) {
    std::cerr << "usage: make_golden <dir>\n";
    return 1;
  }
  const std::string dir = argv[1];
  try {
    write_text(dir + "/toy.cfg", kToyConfig);
    const PipelineConfig cfg = parse_config(kToyConfig);
    PipelineModel m = build_pipeline(cfg);
    const auto data = make_synth_dataset(cfg.data_samples, m.body, cfg.data_seed, cfg.data_noise);
    train_loop(cfg.train, data, m.lifter, m.pse, m.body);
    save_pipeline(dir + "/toy_checkpoint.lmtc", m);

    // held-out poses, with ground truth in mm
    const auto held = make_synth_dataset(4, m.body, 99);
    std::vector<PoseRecord> records;
    for (std::size_t i = 0; i < held.size(); ++i) {
      PoseRecord r;
      r.id = "pose" + std::to_string(i);
      r.topology = "h36m17";
      r.pose = make_pose2d(held[i].pose2d);
      r.gt3d = scaled(held[i].gt_joints3d, kMillimetersPerMeter);
      records.push_back(r);
    }
    write_pose_file(std::filesystem::path(dir + "/poses.jsonl"), records);

    json golden = json::array();
    for (const PoseRecord& r : records) {
      const MeshResult res = full_pipeline(r.pose, m.lifter, m.pse, m.body);
      const LifterOutput lo = lifter_forward(r.pose, m.lifter);
      const Tensor fused = pse_forward(m.pse.config.source, lo.features, m.body, m.pse);
      golden.push_back({{"id", r.id},
                        {"joints3d", rows(res.joints3d)},
                        {"shape", flat(res.beta)},
                        {"camera", flat(res.camera)},
                        {"features", rows(lo.features)},
                        {"fused_sum", total(fused)},
                        {"theta", rows(res.theta)},
                        {"vertices", rows(res.vertices)}});
    }
    write_text(dir + "/golden_outputs.json", golden.dump(1) + "\n");

    // a fixed container with one tensor of each kind
    TensorMap known;
    known["a.weight"] = Tensor::matrix({{1.0, -2.5}, {0.125, 3.0}});
    known["b.index"] = IntTensor{{3}, {-1, 0, 7}};
    known["c.scalar"] = Tensor::vector({0.1});
    save_checkpoint(dir + "/known_map.lmtc", known);

    // two people with both visible and unlabelled keypoints
    json coco;
    coco["images"] = json::array({{{"id", 11}, {"file_name", "a.jpg"}}, {{"id", 12}, {"file_name", "b.jpg"}}});
    coco["annotations"] = json::array();
    for (int person = 0; person < 2; ++person) {
      json kp = json::array();
      for (int k = 0; k < 17; ++k) {
        kp.push_back(100 + 10 * k + person);
        kp.push_back(200 - 5 * k + 3 * person);
        kp.push_back(k % 7 == 3 ? 0 : (k % 2 ? 1 : 2));
      }
      coco["annotations"].push_back(
          {{"id", 501 + person}, {"image_id", 11 + person}, {"category_id", 1}, {"num_keypoints", 17}, {"keypoints", kp}});
    }
    write_text(dir + "/coco_two_people.json", coco.dump(1) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "make_golden: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
