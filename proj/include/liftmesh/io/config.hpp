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

// Flat key=value configuration. '#' starts a comment; blank lines are
// ignored; unknown keys are rejected. Every key has a default, so an
// empty file is a valid config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "liftmesh/io/model_io.hpp"
#include "liftmesh/training.hpp"

namespace liftmesh {

struct PipelineConfig {
  std::string topology = "h36m17";
  std::optional<SkeletonTopology> custom_topology;  // from topology.* keys
  std::uint64_t seed = 0;
  LifterConfig lifter;
  PseConfig pse;
  std::size_t body_vertices = 120;
  TrainConfig train;
  std::size_t data_samples = 32;
  double data_noise = 0.0;
  std::uint64_t data_seed = 1;

  SkeletonTopology resolve_topology() const { return custom_topology ? *custom_topology : find_topology(topology); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  return x;
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' expects true|false, got '" + v + "'");
}

inline std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + " is not key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(n) + " has an empty key");
    if (!kv.emplace(key, detail::trim(line.substr(eq + 1))).second)
      throw ConfigError("config key '" + key + "' is set twice");
  }
  return kv;
}

inline PipelineConfig parse_config(const std::string& text) {
  const auto kv = parse_key_values(text);
  PipelineConfig c;
  std::map<std::string, std::string> topo_kv;
  for (const auto& [k, v] : kv) {
    auto u = [&] { return static_cast<std::size_t>(detail::parse_uint(k, v)); };
    auto r = [&] { return detail::parse_real(k, v); };
    if (k.rfind("topology.", 0) == 0) topo_kv[k] = v;
    else if (k == "topology") c.topology = v;
    else if (k == "seed") c.seed = detail::parse_uint(k, v);
    else if (k == "lifter.dim") c.lifter.trunk.dim = u();
    else if (k == "lifter.branches") c.lifter.trunk.branches = u();
    else if (k == "lifter.blocks") c.lifter.trunk.blocks = u();
    else if (k == "lifter.heads") c.lifter.trunk.heads = u();
    else if (k == "lifter.ff_mult") c.lifter.trunk.ff_mult = u();
    else if (k == "pse.dim") c.pse.dim = u();
    else if (k == "pse.blocks") c.pse.blocks = u();
    else if (k == "pse.heads") c.pse.heads = u();
    else if (k == "pse.ff_mult") c.pse.ff_mult = u();
    else if (k == "pse.tokens") c.pse.tokens = u();
    else if (k == "pse.iterations") c.pse.iterations = u();
    else if (k == "pse.hidden") c.pse.hidden = u();
    else if (k == "pse.source") {
      try {
        c.pse.source = parse_pose_source(v);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    } else if (k == "pse.tie_weights") c.pse.tie_branch_weights = detail::parse_bool(k, v);
    else if (k == "body.vertices") c.body_vertices = u();
    else if (k == "train.mode") c.train.mode = parse_train_mode(v);
    else if (k == "train.loss") c.train.loss = parse_loss_kind(v);
    else if (k == "train.lambda_3d") c.train.weights.joints3d = r();
    else if (k == "train.lambda_2d") c.train.weights.reproj = r();
    else if (k == "train.lambda_theta") c.train.weights.theta = r();
    else if (k == "train.lambda_beta") c.train.weights.beta = r();
    else if (k == "train.lambda_vert") c.train.weights.vertices = r();
    else if (k == "train.lr") c.train.lr = r();
    else if (k == "train.adam_beta1") c.train.adam_beta1 = r();
    else if (k == "train.adam_beta2") c.train.adam_beta2 = r();
    else if (k == "train.adam_eps") c.train.adam_eps = r();
    else if (k == "train.batch_size") c.train.batch_size = u();
    else if (k == "train.steps") c.train.steps = u();
    else if (k == "train.checkpoint_every") c.train.checkpoint_every = u();
    else if (k == "data.samples") c.data_samples = u();
    else if (k == "data.noise") c.data_noise = r();
    else if (k == "data.seed") c.data_seed = detail::parse_uint(k, v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  if (!topo_kv.empty()) {
    c.custom_topology = parse_topology(topo_kv);
    c.topology = c.custom_topology->name;
  } else {
    try {
      find_topology(c.topology);
    } catch (const NotFoundError& e) {
      throw ConfigError(e.what());
    }
  }
  c.train.seed = c.seed;
  validate(c.train);
  validate(c.lifter.trunk);
  if (c.data_samples < 1) throw ConfigError("data.samples must be >= 1");
  if (!(c.data_noise >= 0.0)) throw ConfigError("data.noise must be >= 0");
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every key with its current value; parse_config(to_text(c)) == c.
inline std::string to_text(const PipelineConfig& c) {
  std::ostringstream os;
  if (c.custom_topology) os << serialize_topology(*c.custom_topology);
  else os << "topology=" << c.topology << '\n';
  const ParallelConfig& t = c.lifter.trunk;
  const TrainConfig& tr = c.train;
  os << "seed=" << c.seed << '\n'
     << "lifter.dim=" << t.dim << '\n'
     << "lifter.branches=" << t.branches << '\n'
     << "lifter.blocks=" << t.blocks << '\n'
     << "lifter.heads=" << t.heads << '\n'
     << "lifter.ff_mult=" << t.ff_mult << '\n'
     << "pse.dim=" << c.pse.dim << '\n'
     << "pse.blocks=" << c.pse.blocks << '\n'
     << "pse.heads=" << c.pse.heads << '\n'
     << "pse.ff_mult=" << c.pse.ff_mult << '\n'
     << "pse.tokens=" << c.pse.tokens << '\n'
     << "pse.iterations=" << c.pse.iterations << '\n'
     << "pse.hidden=" << c.pse.hidden << '\n'
     << "pse.source=" << to_string(c.pse.source) << '\n'
     << "pse.tie_weights=" << (c.pse.tie_branch_weights ? "true" : "false") << '\n'
     << "body.vertices=" << c.body_vertices << '\n'
     << "train.mode=" << to_string(tr.mode) << '\n'
     << "train.loss=" << to_string(tr.loss) << '\n'
     << "train.lambda_3d=" << detail::fmt_real(tr.weights.joints3d) << '\n'
     << "train.lambda_2d=" << detail::fmt_real(tr.weights.reproj) << '\n'
     << "train.lambda_theta=" << detail::fmt_real(tr.weights.theta) << '\n'
     << "train.lambda_beta=" << detail::fmt_real(tr.weights.beta) << '\n'
     << "train.lambda_vert=" << detail::fmt_real(tr.weights.vertices) << '\n'
     << "train.lr=" << detail::fmt_real(tr.lr) << '\n'
     << "train.adam_beta1=" << detail::fmt_real(tr.adam_beta1) << '\n'
     << "train.adam_beta2=" << detail::fmt_real(tr.adam_beta2) << '\n'
     << "train.adam_eps=" << detail::fmt_real(tr.adam_eps) << '\n'
     << "train.batch_size=" << tr.batch_size << '\n'
     << "train.steps=" << tr.steps << '\n'
     << "train.checkpoint_every=" << tr.checkpoint_every << '\n'
     << "data.samples=" << c.data_samples << '\n'
     << "data.noise=" << detail::fmt_real(c.data_noise) << '\n'
     << "data.seed=" << c.data_seed << '\n';
  return os.str();
}

/// Seeded initial parameters for every module the config describes. The
/// lifter and pse draw from distinct seeds derived from the config seed.
inline PipelineModel build_pipeline(const PipelineConfig& c) {
  PipelineModel m;
  m.body = make_desk_body_model(c.body_vertices);
  Rng lifter_rng(c.seed * 4 + 1), pse_rng(c.seed * 4 + 2);
  m.lifter = make_lifter(c.resolve_topology(), c.lifter, &lifter_rng);
  m.pse = make_pse(c.pse, m.lifter.joints(), m.lifter.dim(), m.body.vertex_count(), &pse_rng);
  return m;
}

}  // namespace liftmesh
