// Copyright 2026 The metassign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian byte packing shared by the dataset and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "metassign/errors.hpp"

namespace metassign::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_tag(const char (&tag)[5]) { out_.append(tag, 4); }
  void put_bytes(std::string_view bytes) { out_.append(bytes); }
  void put_doubles(std::span<const double> values) {
    put<std::uint64_t>(values.size());
    out_.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }
  void put_ints(std::span<const std::int32_t> values) {
    put<std::uint64_t>(values.size());
    out_.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(std::int32_t));
  }
  const std::string& bytes() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : in_(bytes) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  void expect_tag(const char (&tag)[5]) {
    need(4);
    if (in_.substr(pos_, 4) != std::string_view(tag, 4)) {
      throw IntegrityError(std::string("expected section '") + tag + "'");
    }
    pos_ += 4;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto view = in_.substr(pos_, n);
    pos_ += n;
    return view;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint64_t>();
    if (n > remaining() / sizeof(double)) throw IntegrityError("array length exceeds remaining bytes");
    std::vector<double> values(n);
    std::memcpy(values.data(), in_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return values;
  }
  std::vector<std::int32_t> get_ints() {
    const auto n = get<std::uint64_t>();
    if (n > remaining() / sizeof(std::int32_t)) throw IntegrityError("array length exceeds remaining bytes");
    std::vector<std::int32_t> values(n);
    std::memcpy(values.data(), in_.data() + pos_, n * sizeof(std::int32_t));
    pos_ += n * sizeof(std::int32_t);
    return values;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw IntegrityError("unexpected end of data (truncated file?)");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

// magic | u32 version | u64 payload length | payload | u64 fnv1a64(payload)
inline std::string frame(const char (&magic)[4], std::uint32_t version, const std::string& payload) {
  ByteWriter w;
  w.put_bytes(std::string_view(magic, 4));
  w.put<std::uint32_t>(version);
  w.put<std::uint64_t>(payload.size());
  w.put_bytes(payload);
  w.put<std::uint64_t>(fnv1a64(payload));
  return w.take();
}

inline std::string_view unframe(const char (&magic)[4], std::uint32_t version, std::string_view bytes,
                                const char* what) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(magic, 4)) {
    throw IntegrityError(std::string(what) + ": bad magic bytes");
  }
  ByteReader r(bytes.substr(4));
  const auto found = r.get<std::uint32_t>();
  if (found != version) {
    throw UnsupportedVersionError(std::string(what) + ": version " + std::to_string(found) +
                                  " is not supported (expected " + std::to_string(version) + ")");
  }
  const auto length = r.get<std::uint64_t>();
  if (length > r.remaining() || r.remaining() - length != sizeof(std::uint64_t)) {
    throw IntegrityError(std::string(what) + ": payload length does not match file size");
  }
  const auto payload = r.get_bytes(length);
  if (r.get<std::uint64_t>() != fnv1a64(payload)) throw IntegrityError(std::string(what) + ": checksum mismatch");
  return payload;
}

}  // namespace metassign::detail
