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

// Binary tensor container.
//
//   header : "LMTC" | u32 version | u64 entry count
//   entry  : u32 name length | name bytes (UTF-8) | u32 dtype (0 = f64, 1 = i64)
//            | u32 rank | u64 dims[rank] | payload (8 bytes per element)
//
// All integers and payloads are little-endian. Entries are written sorted
// by name; readers rely only on declared lengths.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unistd.h>
#include <variant>
#include <vector>

#include "liftmesh/core/error.hpp"
#include "liftmesh/core/tensor.hpp"

namespace liftmesh {

inline constexpr std::array<char, 4> kCheckpointMagic{'L', 'M', 'T', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct IntTensor {
  Shape dims;
  std::vector<std::int64_t> data;

  IntTensor() = default;
  IntTensor(Shape d, std::vector<std::int64_t> v) : dims(std::move(d)), data(std::move(v)) {
    require(!dims.empty() && element_count(dims) == data.size(), "int tensor data does not match dims");
  }
  static IntTensor vector(std::vector<std::int64_t> v) {
    const std::size_t n = v.size();
    return IntTensor({n}, std::move(v));
  }
  friend bool operator==(const IntTensor&, const IntTensor&) = default;
};

using Entry = std::variant<Tensor, IntTensor>;
using TensorMap = std::map<std::string, Entry>;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}

  std::size_t remaining() const { return b_.size() - pos_; }

  std::uint64_t uint(int width, const std::string& what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string bytes(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const std::string& what) const {
    if (remaining() < n) throw FormatError("checkpoint truncated: " + what);
  }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const TensorMap& entries) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, entries.size());
  for (const auto& [name, entry] : entries) {
    require(!name.empty(), "checkpoint entry names must be non-empty");
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const bool is_float = std::holds_alternative<Tensor>(entry);
    const Shape& dims = is_float ? std::get<Tensor>(entry).dims() : std::get<IntTensor>(entry).dims;
    require(!dims.empty(), "checkpoint entry '" + name + "' has no dims");
    detail::put_u32(out, is_float ? 0 : 1);
    detail::put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (std::size_t d : dims) detail::put_u64(out, d);
    if (is_float)
      for (double v : std::get<Tensor>(entry).data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    else
      for (std::int64_t v : std::get<IntTensor>(entry).data) detail::put_u64(out, static_cast<std::uint64_t>(v));
  }
  return out;
}

inline TensorMap decode_checkpoint(const std::string& bytes) {
  detail::Reader r(bytes);
  const std::string magic = r.bytes(4, "magic");
  if (magic != std::string(kCheckpointMagic.begin(), kCheckpointMagic.end()))
    throw FormatError("not a liftmesh checkpoint (bad magic)");
  const auto version = r.uint(4, "version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto count = r.uint(8, "entry count");
  TensorMap out;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::string where = "entry #" + std::to_string(e);
    const auto name_len = r.uint(4, where + " name length");
    if (name_len == 0) throw FormatError(where + " has an empty name");
    const std::string name = r.bytes(name_len, where + " name");
    const std::string tag = "entry '" + name + "'";
    const auto dtype = r.uint(4, tag + " dtype");
    if (dtype > 1) throw FormatError(tag + " has unknown dtype " + std::to_string(dtype));
    const auto rank = r.uint(4, tag + " rank");
    if (rank == 0 || rank > 8) throw FormatError(tag + " has invalid rank " + std::to_string(rank));
    Shape dims;
    std::uint64_t n = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      const auto d = r.uint(8, tag + " dims");
      if (d == 0) throw FormatError(tag + " has a zero dimension");
      if (n > (r.remaining() / 8) / d) throw FormatError("checkpoint truncated: " + tag + " payload");
      n *= d;
      dims.push_back(static_cast<std::size_t>(d));
    }
    if (r.remaining() / 8 < n) throw FormatError("checkpoint truncated: " + tag + " payload");
    Entry entry;
    if (dtype == 0) {
      std::vector<double> v(n);
      for (auto& x : v) x = std::bit_cast<double>(r.uint(8, tag + " payload"));
      entry = Tensor(dims, std::move(v));
    } else {
      std::vector<std::int64_t> v(n);
      for (auto& x : v) x = static_cast<std::int64_t>(r.uint(8, tag + " payload"));
      entry = IntTensor(dims, std::move(v));
    }
    if (!out.emplace(name, std::move(entry)).second) throw FormatError("duplicate " + tag);
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  return out;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

/// Writes to a sibling temporary file and renames it into place, so a
/// reader never sees a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move checkpoint into place at '" + path.string() + "'");
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const TensorMap& entries) {
  write_file_atomic(path, encode_checkpoint(entries));
}

inline TensorMap load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

inline const Tensor& get_tensor(const TensorMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw FormatError("checkpoint is missing entry '" + name + "'");
  if (!std::holds_alternative<Tensor>(it->second)) throw FormatError("entry '" + name + "' is not a float tensor");
  return std::get<Tensor>(it->second);
}

inline const IntTensor& get_int_tensor(const TensorMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw FormatError("checkpoint is missing entry '" + name + "'");
  if (!std::holds_alternative<IntTensor>(it->second)) throw FormatError("entry '" + name + "' is not an int tensor");
  return std::get<IntTensor>(it->second);
}

}  // namespace liftmesh
