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

#include "svtpm/tpm_state.hpp"
#include "svtpm/wire.hpp"

// Command builders and response parsers, the caller-side half of the wire
// schema in docs/wire.md.

namespace svtpm::client {

inline Command pcr_read_all() { return Command(CommandCode::PcrRead, {}); }

inline Command pcr_read(uint8_t index) {
  return Command(CommandCode::PcrRead, Bytes{index});
}

inline Command pcr_extend(uint8_t index, const Digest& digest) {
  ByteWriter w;
  w.u8(index);
  w.raw(view(digest));
  return Command(CommandCode::PcrExtend, w.take());
}

inline Command create_primary(uint32_t hierarchy, KeyKind kind, uint16_t bits,
                              ByteView label, ByteView hierarchy_auth,
                              ByteView new_auth) {
  ByteWriter w;
  w.u32(hierarchy);
  w.u8(static_cast<uint8_t>(kind));
  w.u16(bits);
  w.vec16(label);
  w.vec16(hierarchy_auth);
  w.vec16(new_auth);
  return Command(CommandCode::CreatePrimary, w.take());
}

inline Command seal(uint32_t parent, ByteView parent_auth, ByteView data,
                    ByteView new_auth, const std::vector<PcrCheck>& policy) {
  ByteWriter w;
  w.u32(parent);
  w.vec16(parent_auth);
  w.vec16(data);
  w.vec16(new_auth);
  w.u8(static_cast<uint8_t>(policy.size()));
  for (const PcrCheck& c : policy) {
    w.u8(c.index);
    w.raw(view(c.expected));
  }
  return Command(CommandCode::Seal, w.take());
}

inline Command unseal(uint32_t handle, ByteView auth) {
  ByteWriter w;
  w.u32(handle);
  w.vec16(auth);
  return Command(CommandCode::Unseal, w.take());
}

inline Command sign(uint32_t handle, ByteView auth, ByteView message) {
  ByteWriter w;
  w.u32(handle);
  w.vec16(auth);
  w.vec16(message);
  return Command(CommandCode::Sign, w.take());
}

inline Command verify(uint32_t handle, ByteView message, ByteView signature) {
  ByteWriter w;
  w.u32(handle);
  w.vec16(message);
  w.vec32(signature);
  return Command(CommandCode::Verify, w.take());
}

inline Command encrypt(uint32_t handle, ByteView auth, ByteView plaintext) {
  ByteWriter w;
  w.u32(handle);
  w.vec16(auth);
  w.vec16(plaintext);
  return Command(CommandCode::Encrypt, w.take());
}

inline Command decrypt(uint32_t handle, ByteView auth, ByteView ciphertext) {
  ByteWriter w;
  w.u32(handle);
  w.vec16(auth);
  w.vec32(ciphertext);
  return Command(CommandCode::Decrypt, w.take());
}

inline Command nv_write(uint32_t index, ByteView data) {
  ByteWriter w;
  w.u32(index);
  w.vec32(data);
  return Command(CommandCode::NvWrite, w.take());
}

inline Command nv_read(uint32_t index) {
  ByteWriter w;
  w.u32(index);
  return Command(CommandCode::NvRead, w.take());
}

// --- response parsers ------------------------------------------------------

struct CreatedKey {
  uint32_t handle = 0;
  Bytes public_part;
};

inline Result<CreatedKey> parse_created(const Response& resp) {
  if (!resp.ok()) return resp.error;
  ByteReader r(resp.payload);
  CreatedKey out;
  out.handle = r.u32();
  out.public_part = r.vec32();
  if (!r.done()) return Err::Corrupt;
  return out;
}

inline Result<uint32_t> parse_handle(const Response& resp) {
  if (!resp.ok()) return resp.error;
  ByteReader r(resp.payload);
  uint32_t handle = r.u32();
  if (!r.done()) return Err::Corrupt;
  return handle;
}

inline Result<Bytes> parse_vec16(const Response& resp) {
  if (!resp.ok()) return resp.error;
  ByteReader r(resp.payload);
  Bytes out = r.vec16();
  if (!r.done()) return Err::Corrupt;
  return out;
}

inline Result<Bytes> parse_vec32(const Response& resp) {
  if (!resp.ok()) return resp.error;
  ByteReader r(resp.payload);
  Bytes out = r.vec32();
  if (!r.done()) return Err::Corrupt;
  return out;
}

inline Result<bool> parse_verdict(const Response& resp) {
  if (!resp.ok()) return resp.error;
  if (resp.payload.size() != 1) return Err::Corrupt;
  return resp.payload[0] != 0;
}

inline Result<Digest> parse_digest(const Response& resp) {
  if (!resp.ok()) return resp.error;
  if (resp.payload.size() != 32) return Err::Corrupt;
  Digest d{};
  std::memcpy(d.data(), resp.payload.data(), 32);
  return d;
}

inline Result<std::array<Digest, kPcrCount>> parse_pcr_bank(
    const Response& resp) {
  if (!resp.ok()) return resp.error;
  if (resp.payload.size() != kPcrCount * 32) return Err::Corrupt;
  std::array<Digest, kPcrCount> bank{};
  for (size_t i = 0; i < kPcrCount; ++i)
    std::memcpy(bank[i].data(), resp.payload.data() + i * 32, 32);
  return bank;
}

}  // namespace svtpm::client
