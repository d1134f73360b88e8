// Copyright 2026 the svtpm-sim authors
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

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "svtpm/result.hpp"

namespace svtpm {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;
using Digest = std::array<uint8_t, 32>;
using Uuid = std::array<uint8_t, 16>;

inline Bytes to_bytes(ByteView v) { return Bytes(v.begin(), v.end()); }

inline Bytes to_bytes(const std::string& s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteView v) {
  return std::string(v.begin(), v.end());
}

inline ByteView view(const Digest& d) { return ByteView(d.data(), d.size()); }
inline ByteView view(const Uuid& u) { return ByteView(u.data(), u.size()); }

inline Bytes operator+(ByteView a, ByteView b) {
  Bytes out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline std::string hex_encode(ByteView data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Rejects odd length and non-hex characters.
inline Result<Bytes> hex_decode(const std::string& hex) {
  if (hex.size() % 2 != 0) return Err::BadParam;
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return Err::BadParam;
    out.push_back(static_cast<uint8_t>((hi << 4) | lo));
  }
  return out;
}

// Big-endian serializer. All on-disk and on-wire formats in this project go
// through ByteWriter/ByteReader so the encodings stay canonical.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
  }
  void u32(uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
      buf_.push_back(static_cast<uint8_t>(v >> shift));
  }
  void u64(uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
      buf_.push_back(static_cast<uint8_t>(v >> shift));
  }
  void raw(ByteView v) { buf_.insert(buf_.end(), v.begin(), v.end()); }
  // Length-prefixed byte strings.
  void vec16(ByteView v) {
    u16(static_cast<uint16_t>(v.size()));
    raw(v);
  }
  void vec32(ByteView v) {
    u32(static_cast<uint32_t>(v.size()));
    raw(v);
  }

  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

// Big-endian reader over a borrowed buffer. Reads past the end latch the
// failed() flag and return zeroes; callers check failed() once at the end.
class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  uint8_t u8() {
    if (!need(1)) return 0;
    return data_[pos_++];
  }
  uint16_t u16() {
    if (!need(2)) return 0;
    uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    if (!need(4)) return 0;
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    if (!need(8)) return 0;
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 8;
    return v;
  }
  Bytes raw(size_t n) {
    if (!need(n)) return {};
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  template <size_t N>
  std::array<uint8_t, N> arr() {
    std::array<uint8_t, N> out{};
    if (!need(N)) return out;
    std::memcpy(out.data(), data_.data() + pos_, N);
    pos_ += N;
    return out;
  }
  Bytes vec16() { return raw(u16()); }
  Bytes vec32() {
    uint32_t n = u32();
    if (n > data_.size() - std::min<size_t>(pos_, data_.size())) {
      failed_ = true;
      return {};
    }
    return raw(n);
  }

  bool failed() const { return failed_; }
  size_t remaining() const { return failed_ ? 0 : data_.size() - pos_; }
  // A well-formed parse consumes the whole buffer.
  bool done() const { return !failed_ && pos_ == data_.size(); }

 private:
  bool need(size_t n) {
    if (failed_ || data_.size() - pos_ < n) {
      failed_ = true;
      return false;
    }
    return true;
  }

  ByteView data_;
  size_t pos_ = 0;
  bool failed_ = false;
};

}  // namespace svtpm
