// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "grounder/error.hpp"
#include "grounder/tensor.hpp"

namespace grounder {

// Checkpoint file: little-endian binary.
//   u32 format version, u32 parameter count, then per parameter:
//   u32 name length, name bytes, u32 rank, u32 dims[rank], f32 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw Error(ErrorCategory::Io, "cannot open checkpoint for writing: " + path.string());
  }
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(store.count()));
  for (const auto& p : store.items()) {
    detail::write_u32(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(p->shape.size()));
    for (int d : p->shape) detail::write_u32(os, static_cast<std::uint32_t>(d));
    for (T v : p->value) detail::write_f32(os, static_cast<float>(v));
  }
  if (!os) {
    throw Error(ErrorCategory::Io, "failed while writing checkpoint: " + path.string());
  }
}

/// Loads values into an already-registered store; every file entry must match
/// a known parameter of identical shape.
template <typename T>
void load_checkpoint(ParamStore<T>& store, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCategory::Io, "cannot open checkpoint: " + path.string());
  }
  const std::uint32_t version = detail::read_u32(is);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCategory::Data,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = detail::read_u32(is);
  if (count != store.count()) {
    throw Error(ErrorCategory::Data,
                "checkpoint holds " + std::to_string(count) + " parameters, model has " +
                    std::to_string(store.count()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = detail::read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t rank = detail::read_u32(is);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(detail::read_u32(is));
    if (!is) {
      throw Error(ErrorCategory::Data, "truncated checkpoint: " + path.string());
    }
    Parameter<T>* p = store.find(name);
    if (!p) {
      throw Error(ErrorCategory::Data, "checkpoint parameter not in model: " + name);
    }
    if (p->shape != shape) {
      throw Error(ErrorCategory::Data, "checkpoint shape mismatch for " + name + ": file " +
                                           shape_str(shape) + ", model " + shape_str(p->shape));
    }
    for (auto& v : p->value) v = static_cast<T>(detail::read_f32(is));
    if (!is) {
      throw Error(ErrorCategory::Data, "truncated checkpoint: " + path.string());
    }
  }
}

}  // namespace grounder
