#pragma once

// Binary vector file:
//   "SVEC" | u32 version (=1) | u32 dim | u64 count |
//   count x [u16 id length | id bytes (UTF-8) | dim x f32]
// All integers and floats little-endian.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "scitech/common.hpp"

namespace scitech {

/// Ordered set of named float vectors sharing one dimensionality. File order is
/// kept so that a load/save cycle reproduces the input bytes.
struct VectorSet {
  std::uint32_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> values;  // ids.size() x dim, row-major
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

  const float* find(const std::string& id) const {
    auto it = index.find(id);
    return it == index.end() ? nullptr : values.data() + it->second * dim;
  }

  void add(std::string id, std::span<const float> v) {
    if (v.size() != dim) throw Error("vector for '" + id + "' has wrong dimension");
    if (!index.emplace(id, ids.size()).second) throw Error("duplicate vector id: " + id);
    ids.push_back(std::move(id));
    values.insert(values.end(), v.begin(), v.end());
  }
};

/// Vectors produced outside the pipeline (e.g. a transformer document encoder).
using ExternalVectorSet = VectorSet;

inline constexpr std::uint32_t kVectorFileVersion = 1;

inline std::string encode_vectors(const VectorSet& set) {
  ByteWriter w;
  w.bytes("SVEC");
  w.le<std::uint32_t>(kVectorFileVersion);
  w.le<std::uint32_t>(set.dim);
  w.le<std::uint64_t>(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& id = set.ids[i];
    if (id.size() > 0xFFFF) throw Error("vector id longer than 65535 bytes: " + id.substr(0, 40));
    w.le<std::uint16_t>(static_cast<std::uint16_t>(id.size()));
    w.bytes(id);
    for (float x : set.row(i)) w.le<float>(x);
  }
  return w.take();
}

inline VectorSet decode_vectors(std::string_view bytes, const std::string& context = "vector file") {
  ByteReader r(bytes, context);
  if (bytes.size() < 4 || r.bytes(4) != "SVEC") {
    throw Error(context + ": magic mismatch at byte offset 0 (expected \"SVEC\")");
  }
  const auto version = r.le<std::uint32_t>();
  if (version != kVectorFileVersion) {
    throw Error(context + ": unsupported version " + std::to_string(version) +
                " at byte offset 4");
  }
  VectorSet set;
  set.dim = r.le<std::uint32_t>();
  if (set.dim == 0) throw Error(context + ": dim must be positive (byte offset 8)");
  const auto count = r.le<std::uint64_t>();
  // Each record needs at least 2 + 4*dim bytes; reject absurd counts before reserving.
  const std::size_t min_record = 2 + 4 * static_cast<std::size_t>(set.dim);
  if (count > (bytes.size() - r.offset()) / min_record + 1) {
    throw Error(context + ": truncated payload at byte offset " + std::to_string(r.offset()) +
                " (header declares " + std::to_string(count) + " records)");
  }
  set.ids.reserve(count);
  set.values.reserve(count * set.dim);
  std::vector<float> v(set.dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = r.le<std::uint16_t>();
    std::string id(r.bytes(len));
    for (std::uint32_t d = 0; d < set.dim; ++d) {
      const std::size_t at = r.offset();
      v[d] = r.le<float>();
      if (!std::isfinite(v[d])) {
        throw Error(context + ": non-finite component at byte offset " + std::to_string(at) +
                    " (id '" + id + "')");
      }
    }
    if (set.index.contains(id)) throw Error(context + ": duplicate id '" + id + "'");
    set.add(std::move(id), v);
  }
  if (!r.at_end()) {
    throw Error(context + ": trailing bytes at byte offset " + std::to_string(r.offset()));
  }
  return set;
}

inline VectorSet load_vectors(const std::filesystem::path& path) {
  return decode_vectors(read_file(path), path.string());
}

inline void save_vectors(const std::filesystem::path& path, const VectorSet& set) {
  write_file_atomic(path, encode_vectors(set));
}

}  // namespace scitech
