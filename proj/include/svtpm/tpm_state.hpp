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

#include <map>
#include <vector>

#include "svtpm/bytes.hpp"
#include "svtpm/crypto.hpp"
#include "svtpm/result.hpp"

namespace svtpm {

inline constexpr size_t kPcrCount = 16;

// Hierarchy root handles, reused as the parent of primary keys.
inline constexpr uint32_t kRhOwner = 0x40000001;        // storage hierarchy
inline constexpr uint32_t kRhEndorsement = 0x4000000b;
inline constexpr uint32_t kRhPlatform = 0x4000000c;

inline constexpr uint32_t kFirstTransientHandle = 0x81000000;

inline bool is_hierarchy_handle(uint32_t h) {
  return h == kRhOwner || h == kRhEndorsement || h == kRhPlatform;
}

enum class KeyKind : uint8_t {
  RsaSigning = 1,
  RsaDecryption = 2,
  AesSymmetric = 3,
  SealedData = 4,
};

struct PcrCheck {
  uint8_t index = 0;
  Digest expected{};
  bool operator==(const PcrCheck&) const = default;
};

// private_part is plaintext in memory. At rest it is wrapped under the key
// of the hierarchy the object chains up to; see wrap_private below.
//   RsaSigning / RsaDecryption: private_part = 32-byte derivation secret,
//     public_part = SubjectPublicKeyInfo DER of the derived key.
//   AesSymmetric: private_part = 32-byte key, public_part = its SHA-256.
//   SealedData: private_part = sealed payload, public_part empty.
struct KeyObject {
  KeyKind kind = KeyKind::SealedData;
  uint32_t parent = 0;
  Bytes public_part;
  Bytes private_part;
  Bytes auth_value;
  std::vector<PcrCheck> pcr_policy;
  bool operator==(const KeyObject&) const = default;
};

struct LockoutRecord {
  uint32_t failed_tries = 0;
  uint32_t max_tries = 3;
  bool has_deadline = false;      // set iff failed_tries == max_tries
  uint64_t deadline_ms = 0;
  uint64_t recovery_interval_ms = 10000;
  bool operator==(const LockoutRecord&) const = default;

  bool locked(uint64_t now_ms) const {
    return has_deadline && now_ms < deadline_ms;
  }
};

struct TpmState {
  Digest eps{};  // endorsement primary seed
  Digest sps{};  // storage primary seed
  Digest pps{};  // platform primary seed
  uint64_t startup_counter = 0;
  std::array<Digest, kPcrCount> pcr_bank{};
  LockoutRecord lockout;
  std::map<uint32_t, Bytes> nv_store;
  std::map<uint32_t, KeyObject> loaded_keys;
  bool operator==(const TpmState&) const = default;

  static TpmState provision(ByteView root_secret) {
    TpmState s;
    Digest prk = hkdf_extract(to_bytes(std::string("svtpm/seeds/v1")),
                              root_secret);
    s.eps = hkdf_key32(view(prk), to_bytes(std::string("eps")), {});
    s.sps = hkdf_key32(view(prk), to_bytes(std::string("sps")), {});
    s.pps = hkdf_key32(view(prk), to_bytes(std::string("pps")), {});
    return s;
  }

  const Digest& hierarchy_seed(uint32_t hierarchy_handle) const {
    switch (hierarchy_handle) {
      case kRhEndorsement: return eps;
      case kRhPlatform: return pps;
      default: return sps;
    }
  }

  // Walks the parent chain of a key up to its hierarchy root handle.
  uint32_t root_hierarchy(uint32_t parent) const {
    while (!is_hierarchy_handle(parent)) {
      auto it = loaded_keys.find(parent);
      if (it == loaded_keys.end()) return kRhOwner;  // unreachable by design
      parent = it->second.parent;
    }
    return parent;
  }
};

namespace detail {

inline std::array<uint8_t, 32> hierarchy_wrap_key(const TpmState& s,
                                                  uint32_t parent) {
  const Digest& seed = s.hierarchy_seed(s.root_hierarchy(parent));
  return hkdf_key32({}, view(seed),
                    to_bytes(std::string("svtpm/private-part-wrap/v1")));
}

// Deterministic at-rest encryption of a key object's private part. The
// nonce is a PRF of the content, so identical state serializes to
// identical bytes while distinct objects never share a nonce.
inline Bytes wrap_private(const TpmState& s, uint32_t handle,
                          const KeyObject& key) {
  auto wk = hierarchy_wrap_key(s, key.parent);
  ByteWriter nw;
  nw.u32(handle);
  nw.raw(key.private_part);
  Digest nd = hmac_sha256(view(wk), nw.bytes());
  std::array<uint8_t, 12> nonce{};
  std::memcpy(nonce.data(), nd.data(), 12);
  ByteWriter aad;
  aad.u32(handle);
  aad.u8(static_cast<uint8_t>(key.kind));
  aad.u32(key.parent);
  AeadSealed sealed = aes256gcm_seal(wk, nonce, aad.bytes(), key.private_part);
  ByteWriter w;
  w.raw(nonce);
  w.raw(sealed.ciphertext);
  w.raw(sealed.tag);
  return w.take();
}

inline Result<Bytes> unwrap_private(const TpmState& s, uint32_t handle,
                                    const KeyObject& key, ByteView wrapped) {
  if (wrapped.size() < 12 + 16) return Err::Corrupt;
  auto wk = hierarchy_wrap_key(s, key.parent);
  std::array<uint8_t, 12> nonce{};
  std::memcpy(nonce.data(), wrapped.data(), 12);
  std::array<uint8_t, 16> tag{};
  std::memcpy(tag.data(), wrapped.data() + wrapped.size() - 16, 16);
  ByteView ct = wrapped.subspan(12, wrapped.size() - 12 - 16);
  ByteWriter aad;
  aad.u32(handle);
  aad.u8(static_cast<uint8_t>(key.kind));
  aad.u32(key.parent);
  return aes256gcm_open(wk, nonce, aad.bytes(), ct, tag);
}

}  // namespace detail

inline constexpr uint16_t kStateFormatVersion = 1;

// Canonical encoding: maps iterate in key order, so identical state always
// produces identical bytes. Private parts leave memory only in wrapped form.
inline Bytes serialize_state(const TpmState& s) {
  ByteWriter w;
  w.raw(to_bytes(std::string("SVST")));
  w.u16(kStateFormatVersion);
  w.raw(view(s.eps));
  w.raw(view(s.sps));
  w.raw(view(s.pps));
  w.u64(s.startup_counter);
  for (const Digest& pcr : s.pcr_bank) w.raw(view(pcr));
  w.u32(s.lockout.failed_tries);
  w.u32(s.lockout.max_tries);
  w.u8(s.lockout.has_deadline ? 1 : 0);
  w.u64(s.lockout.deadline_ms);
  w.u64(s.lockout.recovery_interval_ms);
  w.u32(static_cast<uint32_t>(s.nv_store.size()));
  for (const auto& [index, data] : s.nv_store) {
    w.u32(index);
    w.vec32(data);
  }
  w.u32(static_cast<uint32_t>(s.loaded_keys.size()));
  for (const auto& [handle, key] : s.loaded_keys) {
    w.u32(handle);
    w.u8(static_cast<uint8_t>(key.kind));
    w.u32(key.parent);
    w.vec32(key.public_part);
    w.vec32(detail::wrap_private(s, handle, key));
    w.vec16(key.auth_value);
    w.u8(static_cast<uint8_t>(key.pcr_policy.size()));
    for (const PcrCheck& c : key.pcr_policy) {
      w.u8(c.index);
      w.raw(view(c.expected));
    }
  }
  return w.take();
}

inline Result<TpmState> deserialize_state(ByteView data) {
  ByteReader r(data);
  if (to_string(r.raw(4)) != "SVST") return Err::Corrupt;
  if (r.u16() != kStateFormatVersion) return Err::Corrupt;
  TpmState s;
  s.eps = r.arr<32>();
  s.sps = r.arr<32>();
  s.pps = r.arr<32>();
  s.startup_counter = r.u64();
  for (Digest& pcr : s.pcr_bank) pcr = r.arr<32>();
  s.lockout.failed_tries = r.u32();
  s.lockout.max_tries = r.u32();
  s.lockout.has_deadline = r.u8() != 0;
  s.lockout.deadline_ms = r.u64();
  s.lockout.recovery_interval_ms = r.u64();
  uint32_t nv_count = r.u32();
  for (uint32_t i = 0; i < nv_count && !r.failed(); ++i) {
    uint32_t index = r.u32();
    s.nv_store[index] = r.vec32();
  }
  struct PendingKey {
    uint32_t handle;
    Bytes wrapped;
  };
  std::vector<PendingKey> pending;
  uint32_t key_count = r.u32();
  for (uint32_t i = 0; i < key_count && !r.failed(); ++i) {
    uint32_t handle = r.u32();
    KeyObject key;
    key.kind = static_cast<KeyKind>(r.u8());
    key.parent = r.u32();
    key.public_part = r.vec32();
    Bytes wrapped = r.vec32();
    key.auth_value = r.vec16();
    uint8_t policy_count = r.u8();
    for (uint8_t j = 0; j < policy_count && !r.failed(); ++j) {
      PcrCheck c;
      c.index = r.u8();
      c.expected = r.arr<32>();
      key.pcr_policy.push_back(c);
    }
    s.loaded_keys[handle] = std::move(key);
    pending.push_back({handle, std::move(wrapped)});
  }
  if (!r.done()) return Err::Corrupt;
  // Unwrap after the whole map is present so parent chains resolve.
  for (const PendingKey& p : pending) {
    KeyObject& key = s.loaded_keys[p.handle];
    auto plain = detail::unwrap_private(s, p.handle, key, p.wrapped);
    if (!plain.ok()) return plain.error();
    key.private_part = plain.take();
  }
  return s;
}

}  // namespace svtpm
