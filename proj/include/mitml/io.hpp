/*
 * Copyright 2026 The mitml Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MITML_IO_HPP
#define MITML_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mitml/tensor.hpp"

// Binary serialization. All multi-byte fields are little-endian regardless of
// host order, so files travel between machines.
//
//   tensor file       "MTNS" | u8 rank | u32 dim[rank] | f64 data[numel]
//   checkpoint file   "MCKP" | u32 count | count x (u16 len | name | tensor)
//
// Entry names in a checkpoint are unique; readers reject duplicates, bad
// magic bytes, truncation and trailing bytes.

namespace mitml {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw IoError("write failed");
}

inline void get_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw IoError("unexpected end of stream");
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

inline void put_u16(std::ostream& os, std::uint16_t v) {
  const std::uint8_t b[2] = {static_cast<std::uint8_t>(v & 0xff),
                             static_cast<std::uint8_t>(v >> 8)};
  put_bytes(os, b, 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  put_bytes(os, b, 4);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(u >> (8 * i));
  put_bytes(os, b, 8);
}

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(os, u);
}

inline std::uint8_t get_u8(std::istream& is) {
  std::uint8_t v;
  get_bytes(is, &v, 1);
  return v;
}

inline std::uint16_t get_u16(std::istream& is) {
  std::uint8_t b[2];
  get_bytes(is, b, 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is) {
  std::uint8_t b[4];
  get_bytes(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) {
  std::uint8_t b[8];
  get_bytes(is, b, 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

inline float get_f32(std::istream& is) {
  const std::uint32_t u = get_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline void expect_magic(std::istream& is, const char (&magic)[5],
                         const char* what) {
  char got[4];
  get_bytes(is, got, 4);
  if (std::memcmp(got, magic, 4) != 0)
    throw IoError(cat(what, ": bad magic, expected '", magic, "'"));
}

inline void expect_eof(std::istream& is, const char* what) {
  if (is.peek() != std::char_traits<char>::eof())
    throw IoError(cat(what, ": trailing bytes after payload"));
}

}  // namespace detail

inline constexpr int kMaxTensorRank = 8;

inline void write_tensor(std::ostream& os, const Tensor& t) {
  MITML_CHECK(t.defined(), "write_tensor: undefined tensor");
  MITML_CHECK(t.rank() >= 1 && t.rank() <= kMaxTensorRank,
              "write_tensor: unsupported rank ", t.rank());
  detail::put_bytes(os, "MTNS", 4);
  detail::put_u8(os, static_cast<std::uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i)
    detail::put_u32(os, static_cast<std::uint32_t>(t.dim(i)));
  for (double v : t.data()) detail::put_f64(os, v);
}

inline Tensor read_tensor(std::istream& is) {
  detail::expect_magic(is, "MTNS", "tensor");
  const int rank = detail::get_u8(is);
  if (rank < 1 || rank > kMaxTensorRank)
    throw IoError(detail::cat("tensor: unsupported rank ", rank));
  Shape shape(static_cast<std::size_t>(rank));
  std::int64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    const std::uint32_t d = detail::get_u32(is);
    if (d == 0 || d > (1u << 24))
      throw IoError(detail::cat("tensor: dimension ", d, " out of range"));
    shape[static_cast<std::size_t>(i)] = static_cast<int>(d);
    count *= d;
    if (count > (std::int64_t{1} << 31))
      throw IoError("tensor: element count out of range");
  }
  std::vector<double> data(static_cast<std::size_t>(count));
  for (auto& v : data) v = detail::get_f64(is);
  return Tensor::from_data(std::move(shape), std::move(data));
}

inline void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  write_tensor(os, t);
  os.close();
  if (!os) throw IoError("write failed: " + path);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  Tensor t = read_tensor(is);
  detail::expect_eof(is, "tensor");
  return t;
}

/// Ordered list of named tensors. Order is preserved through save/load, so a
/// round trip reproduces the file byte for byte.
class Checkpoint {
 public:
  void add(const std::string& name, Tensor t) {
    MITML_CHECK(!name.empty() && name.size() <= 0xffff,
                "checkpoint: bad entry name length ", name.size());
    MITML_CHECK(find(name) == nullptr, "checkpoint: duplicate entry '", name,
                "'");
    entries_.emplace_back(name, std::move(t));
  }

  const Tensor* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return &e.second;
    return nullptr;
  }

  const Tensor& at(const std::string& name) const {
    const Tensor* t = find(name);
    MITML_CHECK(t != nullptr, "checkpoint: missing entry '", name, "'");
    return *t;
  }

  bool has(const std::string& name) const { return find(name) != nullptr; }

  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::size_t size() const { return entries_.size(); }

  void write(std::ostream& os) const {
    detail::put_bytes(os, "MCKP", 4);
    detail::put_u32(os, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, tensor] : entries_) {
      detail::put_u16(os, static_cast<std::uint16_t>(name.size()));
      detail::put_bytes(os, name.data(), name.size());
      write_tensor(os, tensor);
    }
  }

  static Checkpoint read(std::istream& is) {
    detail::expect_magic(is, "MCKP", "checkpoint");
    const std::uint32_t count = detail::get_u32(is);
    if (count > (1u << 20)) throw IoError("checkpoint: entry count too large");
    Checkpoint ck;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint16_t len = detail::get_u16(is);
      if (len == 0) throw IoError("checkpoint: empty entry name");
      std::string name(len, '\0');
      detail::get_bytes(is, name.data(), len);
      if (ck.has(name))
        throw IoError("checkpoint: duplicate entry '" + name + "'");
      ck.entries_.emplace_back(std::move(name), read_tensor(is));
    }
    return ck;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    write(os);
    os.close();
    if (!os) throw IoError("write failed: " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    Checkpoint ck = read(is);
    detail::expect_eof(is, "checkpoint");
    return ck;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace mitml

#endif  // MITML_IO_HPP
