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

#include <functional>

#include "svtpm/crypto.hpp"
#include "svtpm/result.hpp"
#include "svtpm/tpm_state.hpp"
#include "svtpm/wire.hpp"

namespace svtpm {

inline constexpr size_t kNvMaxBytes = 8192;

inline Digest key_template_digest(KeyKind kind, uint16_t bits,
                                  ByteView label) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(kind));
  w.u16(bits);
  w.vec16(label);
  return sha256(w.bytes());
}

// Command processor for one TPM instance. Commands execute strictly
// serially; callers own exactly one Tpm per state and inject the current
// trusted-clock reading per call, so tests can drive virtual time.
class Tpm {
 public:
  // The RNG seed feeds ciphertext nonces (OAEP seeds, CBC IVs). Fixing it
  // makes every response a pure function of (state, command sequence).
  Tpm(TpmState state, uint64_t rng_seed)
      : state_(std::move(state)), drbg_(Drbg::from_seed_u64(rng_seed)) {}
  Tpm(TpmState state, Drbg drbg)
      : state_(std::move(state)), drbg_(std::move(drbg)) {}

  TpmState& state() { return state_; }
  const TpmState& state() const { return state_; }

  // Observes every recorded auth failure; the rollback guard hangs its
  // persistent failure ledger off this.
  std::function<void(const LockoutRecord&)> on_auth_failure;
  std::function<void()> on_lockout_recovery;

  Bytes handle_frame(ByteView frame, uint64_t now_ms) {
    auto cmd = Command::decode(frame);
    if (!cmd.ok()) return Response::failure(cmd.error()).encode();
    return dispatch(*cmd, now_ms).encode();
  }

  Response dispatch(const Command& cmd, uint64_t now_ms) {
    if (!known_code(cmd.code)) return Response::failure(Err::UnknownCode);
    auto code = static_cast<CommandCode>(cmd.code);
    if (auth_gated(code)) {
      lockout_tick(now_ms);
      if (state_.lockout.locked(now_ms))
        return Response::failure(Err::LockedOut);
    }
    // All-or-nothing: handlers mutate state_ freely; any error restores the
    // pre-command state before the lockout bookkeeping is applied.
    TpmState saved = state_;
    Result<Bytes> r = route(code, cmd.payload);
    if (r.ok()) return Response::success(r.take());
    state_ = std::move(saved);
    if (r.error() == Err::Auth) record_auth_failure(now_ms);
    return Response::failure(r.error());
  }

  // Clears an expired lockout; failed tries reset wholesale. A gradual
  // decay would also satisfy the recovery contract, this keeps the state
  // machine two-valued.
  void lockout_tick(uint64_t now_ms) {
    LockoutRecord& l = state_.lockout;
    if (l.has_deadline && now_ms >= l.deadline_ms) {
      l.failed_tries = 0;
      l.has_deadline = false;
      l.deadline_ms = 0;
      if (on_lockout_recovery) on_lockout_recovery();
    }
  }

  void record_auth_failure(uint64_t now_ms) {
    LockoutRecord& l = state_.lockout;
    if (l.failed_tries < l.max_tries) ++l.failed_tries;
    if (l.failed_tries == l.max_tries && !l.has_deadline) {
      l.has_deadline = true;
      l.deadline_ms = now_ms + l.recovery_interval_ms;
    }
    if (on_auth_failure) on_auth_failure(l);
  }

  static bool auth_gated(CommandCode code) {
    switch (code) {
      case CommandCode::CreatePrimary:
      case CommandCode::Seal:
      case CommandCode::Unseal:
      case CommandCode::Sign:
      case CommandCode::Encrypt:
      case CommandCode::Decrypt:
        return true;
      default:
        return false;
    }
  }

 private:
  static bool known_code(uint32_t code) {
    return code >= static_cast<uint32_t>(CommandCode::PcrRead) &&
           code <= static_cast<uint32_t>(CommandCode::NvRead);
  }

  Result<Bytes> route(CommandCode code, ByteView p) {
    switch (code) {
      case CommandCode::PcrRead: return pcr_read(p);
      case CommandCode::PcrExtend: return pcr_extend(p);
      case CommandCode::CreatePrimary: return create_primary(p);
      case CommandCode::Seal: return seal(p);
      case CommandCode::Unseal: return unseal(p);
      case CommandCode::Sign: return sign(p);
      case CommandCode::Verify: return verify(p);
      case CommandCode::Encrypt: return encrypt(p);
      case CommandCode::Decrypt: return decrypt(p);
      case CommandCode::NvWrite: return nv_write(p);
      case CommandCode::NvRead: return nv_read(p);
    }
    return Err::UnknownCode;
  }

  uint32_t next_handle() const {
    return kFirstTransientHandle +
           static_cast<uint32_t>(state_.loaded_keys.size());
  }

  Result<const KeyObject*> lookup(uint32_t handle, KeyKind want) const {
    auto it = state_.loaded_keys.find(handle);
    if (it == state_.loaded_keys.end()) return Err::UnknownHandle;
    if (it->second.kind != want) return Err::WrongKeyKind;
    return &it->second;
  }

  static Result<void> check_auth(ByteView given, const Bytes& expected) {
    if (!const_time_eq(given, expected)) return Err::Auth;
    return Result<void>();
  }

  // payload: empty → all 16 digests; 1 byte → that slot's digest
  Result<Bytes> pcr_read(ByteView p) {
    if (p.empty()) {
      ByteWriter w;
      for (const Digest& d : state_.pcr_bank) w.raw(view(d));
      return w.take();
    }
    if (p.size() != 1) return Err::BadParam;
    if (p[0] >= kPcrCount) return Err::BadIndex;
    return to_bytes(view(state_.pcr_bank[p[0]]));
  }

  // payload: u8 index, 32-byte digest → new slot value
  Result<Bytes> pcr_extend(ByteView p) {
    ByteReader r(p);
    uint8_t index = r.u8();
    Digest digest = r.arr<32>();
    if (!r.done()) return Err::BadParam;
    if (index >= kPcrCount) return Err::BadIndex;
    Digest& slot = state_.pcr_bank[index];
    slot = sha256_concat(view(slot), view(digest));
    return to_bytes(view(slot));
  }

  // payload: u32 hierarchy, u8 kind, u16 bits, vec16 label,
  //          vec16 hierarchy_auth, vec16 new_auth
  // → u32 handle, vec32 public_part
  Result<Bytes> create_primary(ByteView p) {
    ByteReader r(p);
    uint32_t hierarchy = r.u32();
    auto kind = static_cast<KeyKind>(r.u8());
    uint16_t bits = r.u16();
    Bytes label = r.vec16();
    Bytes hierarchy_auth = r.vec16();
    Bytes new_auth = r.vec16();
    if (!r.done()) return Err::BadParam;
    if (!is_hierarchy_handle(hierarchy)) return Err::BadParam;
    if (kind != KeyKind::RsaSigning && kind != KeyKind::RsaDecryption &&
        kind != KeyKind::AesSymmetric)
      return Err::BadParam;
    bool is_rsa = kind != KeyKind::AesSymmetric;
    if (is_rsa && bits != 1024 && bits != 2048 && bits != 3072)
      return Err::BadParam;
    if (!is_rsa && bits != 256) return Err::BadParam;
    // Hierarchy auths are empty in this profile.
    if (auto a = check_auth(hierarchy_auth, {}); !a.ok()) return a.error();

    Digest tmpl = key_template_digest(kind, bits, label);
    Digest secret = hmac_sha256(view(state_.hierarchy_seed(hierarchy)),
                                view(tmpl));
    KeyObject key;
    key.kind = kind;
    key.parent = hierarchy;
    key.private_part = to_bytes(view(secret));
    key.auth_value = new_auth;
    if (is_rsa) {
      key.public_part =
          derive_rsa_key_cached(view(secret), bits).public_der();
    } else {
      key.public_part = to_bytes(view(sha256(view(secret))));
    }
    uint32_t handle = next_handle();
    ByteWriter w;
    w.u32(handle);
    w.vec32(key.public_part);
    state_.loaded_keys.emplace(handle, std::move(key));
    return w.take();
  }

  // payload: u32 parent, vec16 parent_auth, vec16 data, vec16 new_auth,
  //          u8 policy_count, policy_count × (u8 index, 32-byte digest)
  // → u32 handle
  Result<Bytes> seal(ByteView p) {
    ByteReader r(p);
    uint32_t parent = r.u32();
    Bytes parent_auth = r.vec16();
    Bytes data = r.vec16();
    Bytes new_auth = r.vec16();
    uint8_t policy_count = r.u8();
    std::vector<PcrCheck> policy;
    for (uint8_t i = 0; i < policy_count; ++i) {
      PcrCheck c;
      c.index = r.u8();
      c.expected = r.arr<32>();
      policy.push_back(c);
    }
    if (!r.done()) return Err::BadParam;
    // Storage (wrapping) keys are the decryption kind.
    auto parent_key = lookup(parent, KeyKind::RsaDecryption);
    if (!parent_key.ok()) return parent_key.error();
    if (auto a = check_auth(parent_auth, (*parent_key)->auth_value); !a.ok())
      return a.error();
    for (const PcrCheck& c : policy)
      if (c.index >= kPcrCount) return Err::BadIndex;

    KeyObject key;
    key.kind = KeyKind::SealedData;
    key.parent = parent;
    key.private_part = std::move(data);
    key.auth_value = std::move(new_auth);
    key.pcr_policy = std::move(policy);
    uint32_t handle = next_handle();
    state_.loaded_keys.emplace(handle, std::move(key));
    ByteWriter w;
    w.u32(handle);
    return w.take();
  }

  // payload: u32 handle, vec16 auth → vec16 data
  Result<Bytes> unseal(ByteView p) {
    ByteReader r(p);
    uint32_t handle = r.u32();
    Bytes auth = r.vec16();
    if (!r.done()) return Err::BadParam;
    auto key = lookup(handle, KeyKind::SealedData);
    if (!key.ok()) return key.error();
    if (auto a = check_auth(auth, (*key)->auth_value); !a.ok())
      return a.error();
    // Policy mismatch is not a guess; it must not burn a lockout try.
    for (const PcrCheck& c : (*key)->pcr_policy)
      if (state_.pcr_bank[c.index] != c.expected) return Err::Policy;
    ByteWriter w;
    w.vec16((*key)->private_part);
    return w.take();
  }

  // payload: u32 handle, vec16 auth, vec16 message → vec32 signature
  Result<Bytes> sign(ByteView p) {
    ByteReader r(p);
    uint32_t handle = r.u32();
    Bytes auth = r.vec16();
    Bytes message = r.vec16();
    if (!r.done()) return Err::BadParam;
    auto key = lookup(handle, KeyKind::RsaSigning);
    if (!key.ok()) return key.error();
    if (auto a = check_auth(auth, (*key)->auth_value); !a.ok())
      return a.error();
    RsaKey rsa = rsa_of(**key);
    ByteWriter w;
    w.vec32(rsa_pss_sign(rsa, message));
    return w.take();
  }

  // payload: u32 handle, vec16 message, vec32 signature → u8 verdict
  // Uses only the public part; not auth-gated.
  Result<Bytes> verify(ByteView p) {
    ByteReader r(p);
    uint32_t handle = r.u32();
    Bytes message = r.vec16();
    Bytes signature = r.vec32();
    if (!r.done()) return Err::BadParam;
    auto key = lookup(handle, KeyKind::RsaSigning);
    if (!key.ok()) return key.error();
    auto pub = RsaKey::from_public_der((*key)->public_part);
    if (!pub.ok()) return pub.error();
    ByteWriter w;
    w.u8(rsa_pss_verify(*pub, message, signature) ? 1 : 0);
    return w.take();
  }

  // payload: u32 handle, vec16 auth, vec16 plaintext → vec32 ciphertext
  // RSA-OAEP for decryption keys, IV-prefixed AES-256-CBC for symmetric.
  Result<Bytes> encrypt(ByteView p) {
    ByteReader r(p);
    uint32_t handle = r.u32();
    Bytes auth = r.vec16();
    Bytes plaintext = r.vec16();
    if (!r.done()) return Err::BadParam;
    auto it = state_.loaded_keys.find(handle);
    if (it == state_.loaded_keys.end()) return Err::UnknownHandle;
    const KeyObject& key = it->second;
    if (key.kind != KeyKind::RsaDecryption &&
        key.kind != KeyKind::AesSymmetric)
      return Err::WrongKeyKind;
    if (auto a = check_auth(auth, key.auth_value); !a.ok()) return a.error();
    ByteWriter w;
    if (key.kind == KeyKind::RsaDecryption) {
      RsaKey rsa = rsa_of(key);
      auto ct = rsa_oaep_encrypt(rsa, plaintext, drbg_.arr<32>());
      if (!ct.ok()) return ct.error();
      w.vec32(*ct);
    } else {
      auto iv = drbg_.arr<16>();
      std::array<uint8_t, 32> aes_key{};
      std::memcpy(aes_key.data(), key.private_part.data(), 32);
      Bytes ct = aes256cbc_encrypt(aes_key, iv, plaintext);
      ByteWriter body;
      body.raw(iv);
      body.raw(ct);
      w.vec32(body.bytes());
    }
    return w.take();
  }

  // payload: u32 handle, vec16 auth, vec32 ciphertext → vec16 plaintext
  Result<Bytes> decrypt(ByteView p) {
    ByteReader r(p);
    uint32_t handle = r.u32();
    Bytes auth = r.vec16();
    Bytes ciphertext = r.vec32();
    if (!r.done()) return Err::BadParam;
    auto it = state_.loaded_keys.find(handle);
    if (it == state_.loaded_keys.end()) return Err::UnknownHandle;
    const KeyObject& key = it->second;
    if (key.kind != KeyKind::RsaDecryption &&
        key.kind != KeyKind::AesSymmetric)
      return Err::WrongKeyKind;
    if (auto a = check_auth(auth, key.auth_value); !a.ok()) return a.error();
    Bytes plaintext;
    if (key.kind == KeyKind::RsaDecryption) {
      RsaKey rsa = rsa_of(key);
      if (ciphertext.size() != rsa.modulus_bytes()) return Err::BadParam;
      auto pt = rsa_oaep_decrypt(rsa, ciphertext);
      if (!pt.ok()) return Err::BadParam;
      plaintext = pt.take();
    } else {
      if (ciphertext.size() < 16 + 16 || (ciphertext.size() - 16) % 16 != 0)
        return Err::BadParam;
      std::array<uint8_t, 32> aes_key{};
      std::memcpy(aes_key.data(), key.private_part.data(), 32);
      std::array<uint8_t, 16> iv{};
      std::memcpy(iv.data(), ciphertext.data(), 16);
      auto pt = aes256cbc_decrypt(
          aes_key, iv, ByteView(ciphertext).subspan(16));
      if (!pt.ok()) return Err::BadParam;
      plaintext = pt.take();
    }
    if (plaintext.size() > 0xffff) return Err::PayloadTooLarge;
    ByteWriter w;
    w.vec16(plaintext);
    return w.take();
  }

  // payload: u32 index, vec32 data → empty
  Result<Bytes> nv_write(ByteView p) {
    ByteReader r(p);
    uint32_t index = r.u32();
    Bytes data = r.vec32();
    if (!r.done()) return Err::BadParam;
    if (data.size() > kNvMaxBytes) return Err::PayloadTooLarge;
    state_.nv_store[index] = std::move(data);
    return Bytes{};
  }

  // payload: u32 index → vec32 data
  Result<Bytes> nv_read(ByteView p) {
    ByteReader r(p);
    uint32_t index = r.u32();
    if (!r.done()) return Err::BadParam;
    auto it = state_.nv_store.find(index);
    if (it == state_.nv_store.end()) return Err::BadIndex;
    ByteWriter w;
    w.vec32(it->second);
    return w.take();
  }

  static RsaKey rsa_of(const KeyObject& key) {
    size_t bits = RsaKey::from_public_der(key.public_part)
                      .take()
                      .modulus_bytes() *
                  8;
    return derive_rsa_key_cached(key.private_part, static_cast<int>(bits));
  }

  TpmState state_;
  Drbg drbg_;
};

}  // namespace svtpm
