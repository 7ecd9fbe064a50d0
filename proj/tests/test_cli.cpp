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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

namespace liftmesh {
namespace {

namespace fs = std::filesystem;
using testing::data_path;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("liftmesh_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// Parameter count from layer dimensions alone.
std::size_t block_params(std::size_t d, std::size_t ff) {
  const std::size_t dff = d * ff;
  const std::size_t gcn = d * d, attn = 4 * d * d, ffn = d * dff + dff + dff * d + d, norms = 4 * d;
  return gcn + attn + ffn + norms;
}

std::size_t oracle_params(const PipelineConfig& c, std::size_t joints) {
  const auto& t = c.lifter.trunk;
  const std::size_t d = t.dim, db = d / t.branches;
  const std::size_t lifter = 2 * d + joints * d + t.branches * (d * db + t.blocks * block_params(db, t.ff_mult)) +
                             (d * 3 + 3) + (d * 10 + 10) + (d * 3 + 3);
  const auto& p = c.pse;
  const std::size_t in = p.source == PoseSource::features ? d : 3;
  const std::size_t stacks = p.tie_branch_weights ? 1 : 2;
  const std::size_t h = p.hidden;
  const std::size_t pse = in * p.dim + p.dim + joints * p.dim + 3 * p.dim +
                          stacks * p.blocks * block_params(p.dim, p.ff_mult) + (p.dim + 72) * h + h + h * h + h +
                          h * 72 + 72;
  return lifter + pse;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"lift", "--poses", "x"}).code, 1);
  EXPECT_EQ(cli({"bench", "--iters", "5"}).code, 1);
  EXPECT_EQ(cli({"eval", "--pred", "a", "--gt", "b", "--mesh-pred", "c"}).code, 1);
  const CliRun help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.err.find("lift"), std::string::npos);
}

TEST(Cli, MissingCheckpointIsDataError) {
  const CliRun r = cli({"lift", "--ckpt", scratch("nope.lmtc").string(), "--poses", data_path("poses.jsonl")});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, LiftMatchesFixture) {
  const CliRun r = cli({"lift", "--ckpt", data_path("toy_checkpoint.lmtc"), "--poses", data_path("poses.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(data_path("golden_outputs.json"));
  const json golden = json::parse(in);
  const auto recs = lines(r.out);
  ASSERT_EQ(recs.size(), golden.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i]["id"], golden[i]["id"]);
    for (std::size_t j = 0; j < 17; ++j)
      for (std::size_t c = 0; c < 3; ++c)
        EXPECT_NEAR(recs[i]["joints3d"][j][c].get<double>(), 1000.0 * golden[i]["joints3d"][j][c].get<double>(), 1e-6);
  }
}

TEST(Cli, EvalOfIdenticalFilesIsZero) {
  const CliRun r = cli({"eval", "--pred", data_path("poses.jsonl"), "--gt", data_path("poses.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["n_samples"], 4);
  EXPECT_EQ(j["mpjpe_mm"].get<double>(), 0.0);
  EXPECT_EQ(j["pa_mpjpe_mm"].get<double>(), 0.0);
  EXPECT_FALSE(j.contains("mpve_mm"));
}

TEST(Cli, EvalOfLiftedPosesAgainstGroundTruth) {
  const fs::path lifted = scratch("lifted.jsonl");
  ASSERT_EQ(cli({"lift", "--ckpt", data_path("toy_checkpoint.lmtc"), "--poses", data_path("poses.jsonl"), "--out",
                 lifted.string()})
                .code,
            0);
  const CliRun r = cli({"eval", "--pred", lifted.string(), "--gt", data_path("poses.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_GT(j["mpjpe_mm"].get<double>(), 0.0);
  EXPECT_LE(j["pa_mpjpe_mm"].get<double>(), j["mpjpe_mm"].get<double>() + 1e-9);

  std::ofstream(scratch("short.jsonl")) << slurp(data_path("poses.jsonl")).substr(0, slurp(data_path("poses.jsonl")).find('\n') + 1);
  EXPECT_EQ(cli({"eval", "--pred", lifted.string(), "--gt", scratch("short.jsonl").string()}).code, 2);
}

TEST(Cli, BenchParamCountMatchesOracle) {
  const CliRun r = cli({"bench", "--no-timing"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["param_count"].get<std::size_t>(), oracle_params(PipelineConfig{}, 17));
  EXPECT_EQ(j["param_count"].get<std::size_t>(), 138968u);

  const CliRun toy = cli({"bench", "--no-timing", "--config", data_path("toy.cfg")});
  ASSERT_EQ(toy.code, 0) << toy.err;
  EXPECT_EQ(json::parse(toy.out)["param_count"].get<std::size_t>(),
            oracle_params(load_config(data_path("toy.cfg")), 17));

  const PipelineConfig tied = parse_config("pse.tie_weights = true\npse.source = joints\nlifter.branches = 2\n");
  std::ofstream(scratch("tied.cfg")) << to_text(tied);
  const CliRun t = cli({"bench", "--no-timing", "--config", scratch("tied.cfg").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(json::parse(t.out)["param_count"].get<std::size_t>(), oracle_params(tied, 17));
}

TEST(Cli, BenchWithoutTimingIsReproducible) {
  const CliRun a = cli({"bench", "--no-timing", "--seed", "3"});
  const CliRun b = cli({"bench", "--no-timing", "--seed", "3"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_FALSE(json::parse(a.out).contains("median_ms"));
  EXPECT_TRUE(json::parse(cli({"bench"}).out).contains("median_ms"));
}

TEST(Cli, ConvertCocoThenLift) {
  const fs::path poses = scratch("coco.jsonl");
  const CliRun r = cli({"convert-coco", "--in", data_path("coco_two_people.json"), "--out", poses.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = read_pose_file(poses);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].id, 501);
  EXPECT_EQ(recs[0].topology, "h36m17");
  const CliRun l = cli({"lift", "--ckpt", data_path("toy_checkpoint.lmtc"), "--poses", poses.string()});
  EXPECT_EQ(l.code, 0) << l.err;
  EXPECT_EQ(lines(l.out).size(), 2u);

  std::ofstream(scratch("bad_coco.json")) << R"({"annotations":[{"id":9,"keypoints":[1,2]}]})";
  const CliRun bad = cli({"convert-coco", "--in", scratch("bad_coco.json").string(), "--out", scratch("x.jsonl").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("9"), std::string::npos);
}

TEST(Cli, MeshWritesJsonAndObj) {
  const fs::path dir = scratch("meshes");
  const CliRun r = cli({"mesh", "--ckpt", data_path("toy_checkpoint.lmtc"), "--body", data_path("toy_checkpoint.lmtc"),
                     "--poses", data_path("poses.jsonl"), "--out-dir", dir.string(), "--obj"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = lines(r.out);
  ASSERT_EQ(recs.size(), 4u);
  std::ifstream in(data_path("golden_outputs.json"));
  const json golden = json::parse(in);
  const json mesh = json::parse(slurp(recs[2]["mesh"].get<std::string>()));
  for (std::size_t v = 0; v < 120; ++v)
    EXPECT_NEAR(mesh["vertices"][v][1].get<double>(), 1000.0 * golden[2]["vertices"][v][1].get<double>(), 1e-6);
  const std::string obj = slurp(recs[0]["obj"].get<std::string>());
  std::size_t nv = 0, nf = 0;
  std::istringstream is(obj);
  std::string line;
  while (std::getline(is, line)) {
    nv += line.rfind("v ", 0) == 0;
    nf += line.rfind("f ", 0) == 0;
  }
  EXPECT_EQ(nv, 120u);
  EXPECT_EQ(nf, make_desk_body_model().faces.size());
}

TEST(Cli, SynthTrainIsDeterministic) {
  const fs::path data = scratch("synth.jsonl");
  ASSERT_EQ(cli({"synth", "--n", "4", "--seed", "2", "--out", data.string()}).code, 0);
  auto train = [&](const std::string& name) {
    const fs::path out = scratch(name);
    const CliRun r = cli({"train", "--config", data_path("toy.cfg"), "--data", data.string(), "--steps", "3", "--out",
                       out.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return out;
  };
  const fs::path a = train("a.lmtc"), b = train("b.lmtc");
  EXPECT_EQ(slurp(a), slurp(b));
  const std::string csv = slurp(a.string() + ".loss.csv");
  EXPECT_EQ(csv.rfind("step,loss,mpjpe\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NO_THROW(load_pipeline(a));
}

TEST(Cli, DivergingTrainingIsNumericalError) {
  std::ofstream(scratch("hot.cfg")) << slurp(data_path("toy.cfg")) << "train.adam_eps = 1e-300\n"
                                    << "train.checkpoint_every = 0\n";
  std::string cfg = slurp(scratch("hot.cfg"));
  cfg.replace(cfg.find("train.lr = 0.005"), 16, "train.lr = 1e300");
  std::ofstream(scratch("hot.cfg")) << cfg;
  const CliRun r = cli({"train", "--config", scratch("hot.cfg").string(), "--steps", "5", "--out", scratch("hot.lmtc").string()});
  EXPECT_EQ(r.code, 3) << r.out << r.err;
}

TEST(Cli, InitAndBody) {
  const CliRun i = cli({"init", "--out", scratch("init.lmtc").string(), "--seed", "4"});
  ASSERT_EQ(i.code, 0) << i.err;
  EXPECT_EQ(json::parse(i.out)["param_count"], 138968);
  const CliRun b = cli({"body", "--out", scratch("body.lmtc").string(), "--vertices", "200", "--hard-weights"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(take_body_model(load_checkpoint(scratch("body.lmtc"))).vertex_count(), 200u);
  EXPECT_EQ(cli({"body", "--out", scratch("b2.lmtc").string(), "--vertices", "10"}).code, 1);
}

}  // namespace
}  // namespace liftmesh
