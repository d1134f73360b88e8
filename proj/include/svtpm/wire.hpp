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

#include "svtpm/bytes.hpp"
#include "svtpm/result.hpp"

namespace svtpm {

// Wire framing: big-endian u16 tag, u32 total size, u32 code, payload.
// Payload layouts per command are documented in docs/wire.md.

inline constexpr uint16_t kCommandTag = 0x8001;
inline constexpr uint16_t kResponseTag = 0x8002;
inline constexpr size_t kHeaderSize = 2 + 4 + 4;

// Response codes: 0 for success, otherwise the error marker bit OR'ed with
// the Err value.
inline constexpr uint32_t kErrorBit = 0x80000000;

enum class CommandCode : uint32_t {
  PcrRead = 0x101,
  PcrExtend = 0x102,
  CreatePrimary = 0x103,
  Seal = 0x104,
  Unseal = 0x105,
  Sign = 0x106,
  Verify = 0x107,
  Encrypt = 0x108,
  Decrypt = 0x109,
  NvWrite = 0x10a,
  NvRead = 0x10b,
};

struct Command {
  // Kept as a raw integer so frames with unknown codes still decode; the
  // dispatcher answers them with a typed error instead of failing to parse.
  uint32_t code = 0;
  Bytes payload;

  Command() = default;
  Command(CommandCode c, Bytes p)
      : code(static_cast<uint32_t>(c)), payload(std::move(p)) {}

  Bytes encode() const {
    ByteWriter w;
    w.u16(kCommandTag);
    w.u32(static_cast<uint32_t>(kHeaderSize + payload.size()));
    w.u32(code);
    w.raw(payload);
    return w.take();
  }

  static Result<Command> decode(ByteView frame) {
    if (frame.size() < kHeaderSize) return Err::Truncated;
    ByteReader r(frame);
    uint16_t tag = r.u16();
    uint32_t size = r.u32();
    if (tag != kCommandTag) return Err::BadTag;
    if (size != frame.size()) return Err::Truncated;
    Command cmd;
    cmd.code = r.u32();
    cmd.payload = r.raw(r.remaining());
    return cmd;
  }

  bool operator==(const Command&) const = default;
};

struct Response {
  Err error = Err::None;
  Bytes payload;  // empty on error

  bool ok() const { return error == Err::None; }

  static Response success(Bytes payload) {
    return Response{Err::None, std::move(payload)};
  }
  static Response failure(Err e) { return Response{e, {}}; }

  Bytes encode() const {
    ByteWriter w;
    w.u16(kResponseTag);
    w.u32(static_cast<uint32_t>(kHeaderSize + payload.size()));
    w.u32(error == Err::None
              ? 0
              : (kErrorBit | static_cast<uint32_t>(error)));
    w.raw(payload);
    return w.take();
  }

  static Result<Response> decode(ByteView frame) {
    if (frame.size() < kHeaderSize) return Err::Truncated;
    ByteReader r(frame);
    uint16_t tag = r.u16();
    uint32_t size = r.u32();
    if (tag != kResponseTag) return Err::BadTag;
    if (size != frame.size()) return Err::Truncated;
    uint32_t code = r.u32();
    Response resp;
    if (code != 0) {
      if ((code & kErrorBit) == 0) return Err::BadParam;
      resp.error = static_cast<Err>(code & ~kErrorBit);
      if (resp.error == Err::None) return Err::BadParam;
    }
    resp.payload = r.raw(r.remaining());
    if (!resp.ok() && !resp.payload.empty()) return Err::BadParam;
    return resp;
  }

  bool operator==(const Response&) const = default;
};

}  // namespace svtpm
