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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "liftmesh/body_model.hpp"
#include "liftmesh/core/error.hpp"

namespace liftmesh {

/// Wavefront OBJ text: one `v` line per vertex (meters) and one `f` line
/// per face with 1-based indices.
inline std::string to_obj(const Tensor& vertices, const std::vector<std::array<std::int64_t, 3>>& faces) {
  require(vertices.rank() == 2 && vertices.cols() == 3, "OBJ export needs V x 3 vertices");
  std::ostringstream os;
  char buf[96];
  for (std::size_t v = 0; v < vertices.rows(); ++v) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", vertices(v, 0), vertices(v, 1), vertices(v, 2));
    os << buf;
  }
  for (const auto& f : faces) {
    for (std::int64_t i : f)
      require(i >= 0 && static_cast<std::size_t>(i) < vertices.rows(), "OBJ face index out of range");
    os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  return os.str();
}

inline void write_obj(const std::filesystem::path& path, const Tensor& vertices,
                      const std::vector<std::array<std::int64_t, 3>>& faces) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_obj(vertices, faces);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace liftmesh
