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

// liftmesh command-line front end. `run` is the whole program; main()
// only forwards argv and the standard streams.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "liftmesh/liftmesh.hpp"

namespace liftmesh::cli {

enum ExitStatus : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : Error {
  using Error::Error;
};

namespace detail {

inline std::size_t float_param_count(const PipelineModel& m) {
  std::size_t n = 0;
  m.lifter.visit([&](const std::string&, const Tensor& t) { n += t.size(); });
  m.pse.visit([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

inline std::ostream& open_out(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  return file;
}

// Records of a JSON-lines file, in order.
inline std::vector<json> read_json_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw FormatError(path + " line " + std::to_string(n) + ": invalid JSON (" + e.what() + ")");
    }
  }
  return out;
}

// First present key among `keys` parsed as rows of `width` numbers.
inline Tensor rows_field(const json& rec, std::initializer_list<const char*> keys, std::size_t width,
                         const std::string& where) {
  for (const char* k : keys)
    if (rec.is_object() && rec.contains(k)) return liftmesh::detail::rows_from_json(rec[k], width, where + ": " + k);
  std::string names;
  for (const char* k : keys) names += std::string(names.empty() ? "" : "|") + k;
  throw FormatError(where + ": record has no " + names + " field");
}

inline Pose2D checked_pose(const PoseRecord& rec, const SkeletonTopology& topo) {
  if (rec.topology != topo.name)
    throw FormatError("pose " + rec.id.dump() + " uses topology '" + rec.topology + "' but the model expects '" +
                      topo.name + "'");
  return rec.pose;
}

inline std::string file_stem_for(const json& id, std::size_t index) {
  std::string s = id.is_string() ? id.get<std::string>() : id.dump();
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << '_' << s;
  return os.str();
}

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

struct LiftArgs {
  std::string ckpt, poses, out;
};

inline int cmd_lift(const LiftArgs& a, std::ostream& out) {
  const LifterParams lifter = take_lifter(load_checkpoint(a.ckpt));
  const auto records = read_pose_file(a.poses);
  std::ofstream file;
  std::ostream& os = detail::open_out(a.out, file, out);
  for (const PoseRecord& rec : records) {
    const LifterOutput r = lifter_forward(detail::checked_pose(rec, lifter.topology), lifter);
    json j;
    j["id"] = rec.id;
    j["topology"] = lifter.topology.name;
    j["joints3d"] = rows_to_json(scaled(r.joints3d, kMillimetersPerMeter));
    j["shape"] = r.shape.values();
    j["camera"] = r.camera.values();
    j["features"] = rows_to_json(r.features);
    os << j.dump() << '\n';
  }
  return kOk;
}

struct MeshArgs {
  std::string ckpt, body, poses, out_dir;
  bool obj = false;
};

inline int cmd_mesh(const MeshArgs& a, std::ostream& out) {
  const TensorMap ck = load_checkpoint(a.ckpt);
  PipelineModel m;
  m.lifter = take_lifter(ck);
  m.pse = take_pse(ck);
  m.body = take_body_model(load_checkpoint(a.body));
  for (std::size_t i : m.pse.template_indices)
    if (i >= m.body.vertex_count()) throw FormatError("checkpoint template tokens exceed the body model's vertex count");
  const auto records = read_pose_file(a.poses);
  std::filesystem::create_directories(a.out_dir);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const PoseRecord& rec = records[i];
    const MeshResult r = full_pipeline(detail::checked_pose(rec, m.lifter.topology), m.lifter, m.pse, m.body);
    const std::string stem = detail::file_stem_for(rec.id, i);
    json j;
    j["id"] = rec.id;
    j["vertices"] = rows_to_json(scaled(r.vertices, kMillimetersPerMeter));
    j["joints"] = rows_to_json(scaled(r.joints, kMillimetersPerMeter));
    j["theta"] = rows_to_json(r.theta);
    j["beta"] = r.beta.values();
    j["camera"] = r.camera.values();
    j["joints3d"] = rows_to_json(scaled(r.joints3d, kMillimetersPerMeter));
    const std::filesystem::path json_path = std::filesystem::path(a.out_dir) / (stem + ".json");
    {
      std::ofstream f(json_path);
      if (!f) throw IoError("cannot open '" + json_path.string() + "' for writing");
      f << j.dump() << '\n';
    }
    json line = {{"id", rec.id}, {"mesh", json_path.string()}};
    if (a.obj) {
      const std::filesystem::path obj_path = std::filesystem::path(a.out_dir) / (stem + ".obj");
      write_obj(obj_path, r.vertices, m.body.faces);
      line["obj"] = obj_path.string();
    }
    out << line.dump() << '\n';
  }
  return kOk;
}

struct EvalArgs {
  std::string pred, gt, mesh_pred, mesh_gt;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.mesh_pred.empty() != a.mesh_gt.empty()) throw UsageError("--mesh-pred and --mesh-gt must be given together");
  auto load_joints = [](const std::string& path) {
    std::vector<Pose3D> poses;
    std::vector<json> ids;
    const auto recs = detail::read_json_lines(path);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      poses.push_back(make_pose3d(detail::rows_field(recs[i], {"joints3d", "gt3d"}, 3, path + " record " + std::to_string(i + 1))));
      ids.push_back(recs[i].value("id", json()));
    }
    return std::pair{poses, ids};
  };
  auto load_meshes = [](const std::string& path) {
    std::vector<Tensor> meshes;
    const auto recs = detail::read_json_lines(path);
    for (std::size_t i = 0; i < recs.size(); ++i)
      meshes.push_back(detail::rows_field(recs[i], {"vertices"}, 3, path + " record " + std::to_string(i + 1)));
    return meshes;
  };
  const auto [preds, pred_ids] = load_joints(a.pred);
  const auto [gts, gt_ids] = load_joints(a.gt);
  if (preds.size() != gts.size())
    throw FormatError("prediction file has " + std::to_string(preds.size()) + " records, ground truth has " +
                      std::to_string(gts.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!pred_ids[i].is_null() && !gt_ids[i].is_null() && pred_ids[i] != gt_ids[i])
      throw FormatError("record " + std::to_string(i + 1) + " ids differ: " + pred_ids[i].dump() + " vs " + gt_ids[i].dump());
    if (preds[i].joint_count() != gts[i].joint_count())
      throw FormatError("record " + std::to_string(i + 1) + " joint counts differ");
  }
  std::vector<Tensor> mp, mg;
  if (!a.mesh_pred.empty()) {
    mp = load_meshes(a.mesh_pred);
    mg = load_meshes(a.mesh_gt);
    if (mp.size() != mg.size()) throw FormatError("mesh prediction and ground-truth record counts differ");
    for (std::size_t i = 0; i < mp.size(); ++i)
      if (mp[i].dims() != mg[i].dims()) throw FormatError("mesh record " + std::to_string(i + 1) + " vertex counts differ");
  }
  const EvalReport r = evaluate(preds, gts, mp, mg);
  json j;
  j["n_samples"] = r.n_samples;
  j["mpjpe_mm"] = r.mpjpe_mm;
  j["pa_mpjpe_mm"] = r.pa_mpjpe_mm;
  if (r.mpve_mm) j["mpve_mm"] = *r.mpve_mm;
  out << j.dump() << '\n';
  return kOk;
}

struct TrainArgs {
  std::string config, out, mode, data, loss_csv;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (!a.mode.empty()) cfg.train.mode = parse_train_mode(a.mode);
  if (a.seed) cfg.seed = cfg.train.seed = *a.seed;
  if (a.steps) cfg.train.steps = *a.steps;
  validate(cfg.train);
  PipelineModel m = build_pipeline(cfg);
  const std::vector<SynthSample> data = a.data.empty()
                                            ? make_synth_dataset(cfg.data_samples, m.body, cfg.data_seed, cfg.data_noise)
                                            : read_synth_file(a.data);
  if (data.empty()) throw FormatError("training data is empty");
  const std::filesystem::path out_path(a.out);
  auto hook = [&](std::size_t step) {
    save_pipeline(out_path, m);
    err << "checkpoint at step " << step << " -> " << out_path.string() << '\n';
  };
  const TrainResult result = train_loop(cfg.train, data, m.lifter, m.pse, m.body, hook);
  save_pipeline(out_path, m);
  const std::string csv_path = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  {
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot open '" + csv_path + "' for writing");
    csv << "step,loss,mpjpe\n";
    csv.precision(10);
    for (const LossRecord& r : result.curve) csv << r.step << ',' << r.loss << ',' << r.mpjpe_mm << '\n';
  }
  json j;
  j["checkpoint"] = a.out;
  j["loss_csv"] = csv_path;
  j["mode"] = to_string(cfg.train.mode);
  j["steps"] = result.curve.size();
  j["initial_loss"] = result.curve.front().loss;
  j["final_loss"] = result.curve.back().loss;
  j["initial_mpjpe_mm"] = result.curve.front().mpjpe_mm;
  j["final_mpjpe_mm"] = result.curve.back().mpjpe_mm;
  out << j.dump() << '\n';
  return kOk;
}

struct SynthArgs {
  std::size_t n = 32;
  std::string body, out;
  std::uint64_t seed = 0;
  double noise = 0.0;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (!(a.noise >= 0.0)) throw UsageError("--noise must be >= 0");
  if (a.n < 1) throw UsageError("--n must be >= 1");
  const BodyModel body = a.body.empty() ? make_desk_body_model() : take_body_model(load_checkpoint(a.body));
  const auto data = make_synth_dataset(a.n, body, a.seed, a.noise);
  std::ofstream file;
  std::ostream& os = detail::open_out(a.out, file, out);
  for (std::size_t i = 0; i < data.size(); ++i) os << synth_to_json(data[i], i).dump() << '\n';
  if (&os == &file) out << json{{"samples", data.size()}, {"out", a.out}}.dump() << '\n';
  return kOk;
}

struct BenchArgs {
  std::string ckpt, config;
  std::size_t iters = 100;
  bool no_timing = false;
  std::uint64_t seed = 0;
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.iters < 100) throw UsageError("--iters must be >= 100");
  if (!a.ckpt.empty() && !a.config.empty()) throw UsageError("--ckpt and --config are exclusive");
  PipelineModel m;
  std::string source = "default-config";
  if (!a.ckpt.empty()) {
    m = load_pipeline(a.ckpt);
    source = a.ckpt;
  } else {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
    if (!a.config.empty()) source = a.config;
    m = build_pipeline(cfg);
  }
  json j;
  j["source"] = source;
  j["param_count"] = detail::float_param_count(m);
  std::size_t lifter_n = 0, pse_n = 0;
  m.lifter.visit([&](const std::string&, const Tensor& t) { lifter_n += t.size(); });
  m.pse.visit([&](const std::string&, const Tensor& t) { pse_n += t.size(); });
  j["lifter_params"] = lifter_n;
  j["pse_params"] = pse_n;
  j["iters"] = a.iters;
  Rng rng(a.seed);
  const Pose2D pose = make_pose2d(rng.uniform_tensor({m.lifter.joints(), 2}, -0.5, 0.5));
  std::vector<double> ms;
  ms.reserve(a.iters);
  double checksum = 0.0;
  for (std::size_t i = 0; i < a.iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const MeshResult r = full_pipeline(pose, m.lifter, m.pse, m.body);
    const auto t1 = std::chrono::steady_clock::now();
    checksum += r.vertices[0];
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  j["output_checksum"] = checksum;
  if (!a.no_timing) {
    j["median_ms"] = detail::percentile(ms, 0.5);
    j["p95_ms"] = detail::percentile(ms, 0.95);
  }
  out << j.dump() << '\n';
  return kOk;
}

struct ConvertArgs {
  std::string in, out;
};

inline int cmd_convert_coco(const ConvertArgs& a, std::ostream& out) {
  const auto people = read_coco_keypoints(a.in);
  std::vector<PoseRecord> recs;
  for (const CocoPerson& p : people) {
    PoseRecord r;
    r.id = p.annotation_id;
    r.topology = "h36m17";
    r.pose = map_coco_to_h36m(p.pose);
    recs.push_back(std::move(r));
  }
  std::ofstream file;
  std::ostream& os = detail::open_out(a.out, file, out);
  write_pose_file(os, recs);
  if (&os == &file) {
    if (!file) throw IoError("failed writing '" + a.out + "'");
    out << json{{"poses", recs.size()}, {"out", a.out}}.dump() << '\n';
  }
  return kOk;
}

struct InitArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

inline int cmd_init(const InitArgs& a, std::ostream& out) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const PipelineModel m = build_pipeline(cfg);
  save_pipeline(a.out, m);
  out << json{{"checkpoint", a.out}, {"param_count", detail::float_param_count(m)}}.dump() << '\n';
  return kOk;
}

struct BodyArgs {
  std::string out;
  std::size_t vertices = 120;
  bool hard_weights = false;
};

inline int cmd_body(const BodyArgs& a, std::ostream& out) {
  if (a.vertices < 4 * kBodyJoints) throw UsageError("--vertices must be >= 96");
  TensorMap map;
  const BodyModel body = make_desk_body_model(a.vertices, a.hard_weights);
  put_body_model(map, body);
  save_checkpoint(a.out, map);
  out << json{{"body", a.out}, {"vertices", body.vertex_count()}, {"faces", body.faces.size()}}.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"liftmesh: 2D pose to 3D joints and body mesh"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  LiftArgs lift;
  auto* c_lift = app.add_subcommand("lift", "Lift 2D poses to 3D joints (JSON lines)");
  c_lift->add_option("--ckpt", lift.ckpt, "Checkpoint")->required();
  c_lift->add_option("--poses", lift.poses, "Pose file (JSON lines)")->required();
  c_lift->add_option("--out", lift.out, "Output file (default: stdout)");

  MeshArgs mesh;
  auto* c_mesh = app.add_subcommand("mesh", "Run the full pipeline and write one mesh per pose");
  c_mesh->add_option("--ckpt", mesh.ckpt, "Checkpoint")->required();
  c_mesh->add_option("--body", mesh.body, "Body model container")->required();
  c_mesh->add_option("--poses", mesh.poses, "Pose file")->required();
  c_mesh->add_option("--out-dir", mesh.out_dir, "Output directory")->required();
  c_mesh->add_flag("--obj", mesh.obj, "Also write OBJ meshes");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "MPJPE / PA-MPJPE / MPVE report");
  c_eval->add_option("--pred", ev.pred, "Predicted joints (JSON lines with joints3d or gt3d)")->required();
  c_eval->add_option("--gt", ev.gt, "Ground-truth joints")->required();
  c_eval->add_option("--mesh-pred", ev.mesh_pred, "Predicted meshes (JSON lines with vertices)");
  c_eval->add_option("--mesh-gt", ev.mesh_gt, "Ground-truth meshes");

  TrainArgs tr;
  std::uint64_t train_seed = 0;
  std::size_t train_steps = 0;
  auto* c_train = app.add_subcommand("train", "Train on synthetic data");
  c_train->add_option("--config", tr.config, "Config file (key=value)");
  c_train->add_option("--out", tr.out, "Output checkpoint")->required();
  c_train->add_option("--mode", tr.mode, "lifter-only | pse-only | end-to-end");
  c_train->add_option("--data", tr.data, "Synthetic data file from `synth` (default: generate from config)");
  c_train->add_option("--loss-csv", tr.loss_csv, "Loss curve CSV (default: <out>.loss.csv)");
  auto* o_train_seed = c_train->add_option("--seed", train_seed, "Seed (overrides config)");
  auto* o_train_steps = c_train->add_option("--steps", train_steps, "Steps (overrides config)");

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Emit a synthetic dataset");
  c_synth->add_option("--n", sy.n, "Sample count");
  c_synth->add_option("--body", sy.body, "Body model container (default: built-in desk model)");
  c_synth->add_option("--seed", sy.seed, "Seed");
  c_synth->add_option("--noise", sy.noise, "2D noise sigma");
  c_synth->add_option("--out", sy.out, "Output file (default: stdout)");

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Parameter count and forward latency");
  c_bench->add_option("--ckpt", be.ckpt, "Checkpoint (default: seeded default config)");
  c_bench->add_option("--config", be.config, "Config file to build from instead of a checkpoint");
  c_bench->add_option("--iters", be.iters, "Timed forward passes (>= 100)");
  c_bench->add_option("--seed", be.seed, "Seed of the benchmark input pose");
  c_bench->add_flag("--no-timing", be.no_timing, "Omit latency fields");

  ConvertArgs co;
  auto* c_coco = app.add_subcommand("convert-coco", "COCO keypoints JSON to an h36m17 pose file");
  c_coco->add_option("--in", co.in, "COCO annotations JSON")->required();
  c_coco->add_option("--out", co.out, "Output pose file (default: stdout)");

  InitArgs in;
  std::uint64_t init_seed = 0;
  auto* c_init = app.add_subcommand("init", "Write a seeded, untrained checkpoint");
  c_init->add_option("--config", in.config, "Config file");
  c_init->add_option("--out", in.out, "Output checkpoint")->required();
  auto* o_init_seed = c_init->add_option("--seed", init_seed, "Seed (overrides config)");

  BodyArgs bo;
  auto* c_body = app.add_subcommand("body", "Write the built-in desk body model container");
  c_body->add_option("--out", bo.out, "Output file")->required();
  c_body->add_option("--vertices", bo.vertices, "Vertex count (>= 96)");
  c_body->add_flag("--hard-weights", bo.hard_weights, "One skin weight per vertex");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    err << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    err << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*c_lift) return cmd_lift(lift, out);
    if (*c_mesh) return cmd_mesh(mesh, out);
    if (*c_eval) return cmd_eval(ev, out);
    if (*c_train) {
      if (*o_train_seed) tr.seed = train_seed;
      if (*o_train_steps) tr.steps = train_steps;
      return cmd_train(tr, out, err);
    }
    if (*c_synth) return cmd_synth(sy, out);
    if (*c_bench) return cmd_bench(be, out);
    if (*c_coco) return cmd_convert_coco(co, out);
    if (*c_init) {
      if (*o_init_seed) in.seed = init_seed;
      return cmd_init(in, out);
    }
    if (*c_body) return cmd_body(bo, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure at step " << e.step() << ": " << e.what() << '\n';
    return kNumerical;
  } catch (const AlignmentError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace liftmesh::cli
