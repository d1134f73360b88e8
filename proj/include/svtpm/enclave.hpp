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

#include "svtpm/crypto.hpp"
#include "svtpm/result.hpp"

// The measured-identity and policy-keyed sealing half of the simulated
// enclave services. These functions are pure given the platform secret, so
// "enclave A cannot read enclave B's data" reduces to key separation.

namespace svtpm {

struct EnclaveIdentity {
  Digest mrenclave{};  // hash of the enclave code blob
  Digest mrsigner{};   // hash of the signer's public key
  bool operator==(const EnclaveIdentity&) const = default;
};

inline EnclaveIdentity measure(ByteView code_blob, ByteView signer_pub) {
  return EnclaveIdentity{sha256(code_blob), sha256(signer_pub)};
}

enum class SealPolicy : uint8_t {
  ByEnclave = 1,  // key bound to mrenclave
  BySigner = 2,   // key bound to mrsigner
};

inline const Digest& policy_register(const EnclaveIdentity& id,
                                     SealPolicy policy) {
  return policy == SealPolicy::ByEnclave ? id.mrenclave : id.mrsigner;
}

// AES-GCM container. The header fields ride as associated data, so any
// modified field fails authentication, not just the ciphertext.
struct SealedBlob {
  uint16_t version = 1;
  SealPolicy policy = SealPolicy::BySigner;
  Digest key_id{};  // value of the deriving register
  std::array<uint8_t, 12> nonce{};
  Bytes ciphertext;
  std::array<uint8_t, 16> tag{};
  bool operator==(const SealedBlob&) const = default;

  Bytes header() const {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVSB")));
    w.u16(version);
    w.u8(static_cast<uint8_t>(policy));
    w.raw(view(key_id));
    return w.take();
  }

  Bytes serialize() const {
    ByteWriter w;
    w.raw(header());
    w.raw(nonce);
    w.vec32(ciphertext);
    w.raw(tag);
    return w.take();
  }

  static Result<SealedBlob> parse(ByteView data) {
    ByteReader r(data);
    if (to_string(r.raw(4)) != "SVSB") return Err::Corrupt;
    SealedBlob b;
    b.version = r.u16();
    b.policy = static_cast<SealPolicy>(r.u8());
    b.key_id = r.arr<32>();
    b.nonce = r.arr<12>();
    b.ciphertext = r.vec32();
    b.tag = r.arr<16>();
    if (!r.done()) return Err::Corrupt;
    if (b.policy != SealPolicy::ByEnclave && b.policy != SealPolicy::BySigner)
      return Err::Corrupt;
    return b;
  }
};

namespace detail {

inline std::array<uint8_t, 32> seal_key(ByteView platform_secret,
                                        SealPolicy policy,
                                        const Digest& reg) {
  ByteWriter info;
  info.raw(to_bytes(std::string("svtpm/seal-key/v1")));
  info.u8(static_cast<uint8_t>(policy));
  info.raw(view(reg));
  return hkdf_key32({}, platform_secret, info.bytes());
}

}  // namespace detail

// Sealing key = KDF(platform secret, selected policy register), so blobs
// sealed by identities with distinct registers are mutually undecryptable.
inline SealedBlob enclave_seal(const EnclaveIdentity& id, SealPolicy policy,
                               ByteView platform_secret, ByteView plaintext,
                               Drbg& rng) {
  SealedBlob b;
  b.policy = policy;
  b.key_id = policy_register(id, policy);
  b.nonce = rng.arr<12>();
  auto key = detail::seal_key(platform_secret, policy, b.key_id);
  AeadSealed sealed = aes256gcm_seal(key, b.nonce, b.header(), plaintext);
  b.ciphertext = std::move(sealed.ciphertext);
  b.tag = sealed.tag;
  return b;
}

inline Result<Bytes> enclave_unseal(const EnclaveIdentity& id,
                                    ByteView platform_secret,
                                    const SealedBlob& b) {
  if (policy_register(id, b.policy) != b.key_id) return Err::PolicyMismatch;
  auto key = detail::seal_key(platform_secret, b.policy, b.key_id);
  return aes256gcm_open(key, b.nonce, b.header(), b.ciphertext, b.tag);
}

// --- quotes ----------------------------------------------------------------

// Attestation report signed under the platform group key. The real scheme
// is an EPID group signature; an ordinary signature under one shared key
// reproduces the protocol's trust structure without the anonymity.
struct Quote {
  EnclaveIdentity identity;
  std::array<uint8_t, 64> user_data{};
  Bytes signature;
  bool operator==(const Quote&) const = default;

  Bytes signed_body() const {
    ByteWriter w;
    w.raw(view(identity.mrenclave));
    w.raw(view(identity.mrsigner));
    w.raw(user_data);
    return w.take();
  }

  Bytes serialize() const {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVQT")));
    w.raw(signed_body());
    w.vec16(signature);
    return w.take();
  }

  static Result<Quote> parse(ByteView data) {
    ByteReader r(data);
    if (to_string(r.raw(4)) != "SVQT") return Err::Corrupt;
    Quote q;
    q.identity.mrenclave = r.arr<32>();
    q.identity.mrsigner = r.arr<32>();
    q.user_data = r.arr<64>();
    q.signature = r.vec16();
    if (!r.done()) return Err::Corrupt;
    return q;
  }
};

inline Quote make_quote(const EnclaveIdentity& id,
                        const std::array<uint8_t, 64>& user_data,
                        const RsaKey& group_key) {
  Quote q;
  q.identity = id;
  q.user_data = user_data;
  q.signature = rsa_pss_sign(group_key, q.signed_body());
  return q;
}

inline bool verify_quote(const Quote& q, const RsaKey& group_pub) {
  return rsa_pss_verify(group_pub, q.signed_body(), q.signature);
}

}  // namespace svtpm
