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

#include <algorithm>
#include <string>
#include <vector>

#include "svtpm/enclave.hpp"

namespace svtpm {

// Trust establishment: the enclave proves to a privacy CA that a given TPM
// key lives inside a known-good enclave on the simulated platform, and gets
// a certificate for it. Four actors: the vTPM enclave, the quoting service
// (make_quote under the platform group key), the privacy CA below, and a
// local verifier standing in for the remote attestation service (it simply
// holds the group public key).

enum class RequestedKey : uint8_t {
  Ek = 1,
  Aik = 2,
};

struct AttestationRequest {
  std::array<uint8_t, 32> challenge_nonce{};
  RequestedKey requested_key = RequestedKey::Ek;

  bool operator==(const AttestationRequest&) const = default;

  Bytes serialize() const {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVAR")));
    w.u16(1);
    w.raw(challenge_nonce);
    w.u8(static_cast<uint8_t>(requested_key));
    return w.take();
  }

  static Result<AttestationRequest> parse(ByteView data) {
    ByteReader r(data);
    if (to_string(r.raw(4)) != "SVAR" || r.u16() != 1) return Err::Corrupt;
    AttestationRequest req;
    req.challenge_nonce = r.arr<32>();
    uint8_t kind = r.u8();
    if (r.failed() || !r.done() || kind < 1 || kind > 2) return Err::Corrupt;
    req.requested_key = static_cast<RequestedKey>(kind);
    return req;
  }
};

// H(key_pub || nonce) in the first half of the quote's user_data field;
// binds the attested key and the challenge freshness in one value.
inline std::array<uint8_t, 64> attest_user_data(
    ByteView key_pub, const std::array<uint8_t, 32>& nonce) {
  ByteWriter w;
  w.raw(key_pub);
  w.raw(nonce);
  Digest h = sha256(w.bytes());
  std::array<uint8_t, 64> out{};
  std::copy(h.begin(), h.end(), out.begin());
  return out;
}

struct Report {
  Digest mrenclave{};
  Digest mrsigner{};
  std::array<uint8_t, 64> user_data{};

  bool operator==(const Report&) const = default;
};

inline Report enclave_report(const EnclaveIdentity& id, ByteView key_pub,
                             const AttestationRequest& req) {
  Report rep;
  rep.mrenclave = id.mrenclave;
  rep.mrsigner = id.mrsigner;
  rep.user_data = attest_user_data(key_pub, req.challenge_nonce);
  return rep;
}

inline Quote quote_report(const Report& rep, const RsaKey& group_key) {
  EnclaveIdentity id;
  id.mrenclave = rep.mrenclave;
  id.mrsigner = rep.mrsigner;
  return make_quote(id, rep.user_data, group_key);
}

// Minimal certificate: enough structure to carry subject key, attested
// measurement, and a validity window, and to chain to the issuing CA by
// signature. Deliberately not X.509.
struct Certificate {
  std::string issuer;
  Bytes subject_key_pub;
  Digest mrenclave{};
  uint64_t valid_from_ms = 0;
  uint64_t valid_until_ms = 0;
  Bytes signature;

  bool operator==(const Certificate&) const = default;

  Bytes signed_body() const {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVCT")));
    w.u16(1);
    w.vec16(to_bytes(issuer));
    w.vec16(subject_key_pub);
    w.raw(view(mrenclave));
    w.u64(valid_from_ms);
    w.u64(valid_until_ms);
    return w.take();
  }

  Bytes serialize() const {
    ByteWriter w;
    w.raw(signed_body());
    w.vec16(signature);
    return w.take();
  }

  static Result<Certificate> parse(ByteView data) {
    ByteReader r(data);
    if (to_string(r.raw(4)) != "SVCT" || r.u16() != 1) return Err::Corrupt;
    Certificate c;
    c.issuer = to_string(r.vec16());
    c.subject_key_pub = r.vec16();
    c.mrenclave = r.arr<32>();
    c.valid_from_ms = r.u64();
    c.valid_until_ms = r.u64();
    c.signature = r.vec16();
    if (r.failed() || !r.done()) return Err::Corrupt;
    return c;
  }

  bool valid_at(uint64_t now_ms) const {
    return valid_from_ms <= now_ms && now_ms < valid_until_ms;
  }
};

inline bool verify_certificate(const Certificate& cert,
                               ByteView issuer_pub_der) {
  auto key = RsaKey::from_public_der(issuer_pub_der);
  if (!key.ok()) return false;
  return rsa_pss_verify(*key, cert.signed_body(), cert.signature);
}

struct PcaPolicy {
  std::vector<Digest> mrenclave_allowlist;

  bool allows(const Digest& mrenclave) const {
    return std::find(mrenclave_allowlist.begin(), mrenclave_allowlist.end(),
                     mrenclave) != mrenclave_allowlist.end();
  }
};

// The privacy CA. Checks run in a fixed order so every tamper variant maps
// to one stable verdict: signature (is this real platform hardware), then
// measurement (is this enclave code known good), then nonce binding (is the
// quote fresh and about this key). A consumed nonce never validates again.
class PrivacyCa {
 public:
  static constexpr uint64_t kDefaultCertLifetimeMs = 86'400'000;  // one day

  PrivacyCa(uint64_t seed, PcaPolicy policy, ByteView verifier_group_pub_der,
            uint64_t cert_lifetime_ms = kDefaultCertLifetimeMs)
      : rng_(Drbg::from_seed_u64(seed == 0 ? 1 : seed)),
        policy_(std::move(policy)),
        lifetime_ms_(cert_lifetime_ms) {
    auto ikm = rng_.bytes(32);
    key_ = derive_rsa_key_cached(ikm, 2048);
    auto pub = RsaKey::from_public_der(verifier_group_pub_der);
    if (!pub.ok())
      throw std::runtime_error("privacy CA: bad group public key");
    group_pub_ = *pub;
  }

  Bytes public_der() const { return key_.public_der(); }
  const PcaPolicy& policy() const { return policy_; }

  AttestationRequest challenge(RequestedKey kind) {
    AttestationRequest req;
    req.challenge_nonce = rng_.arr<32>();
    req.requested_key = kind;
    outstanding_.push_back(req.challenge_nonce);
    return req;
  }

  Result<Certificate> verify_and_issue(const Quote& quote, ByteView key_pub,
                                       const AttestationRequest& req,
                                       uint64_t now_ms) {
    if (!verify_quote(quote, group_pub_)) return Err::BadSignature;
    if (!policy_.allows(quote.identity.mrenclave))
      return Err::UnknownMeasurement;
    auto live = std::find(outstanding_.begin(), outstanding_.end(),
                          req.challenge_nonce);
    if (live == outstanding_.end()) return Err::StaleNonce;
    if (quote.user_data != attest_user_data(key_pub, req.challenge_nonce))
      return Err::StaleNonce;
    outstanding_.erase(live);
    return issue(key_pub, quote.identity.mrenclave, now_ms);
  }

  // AIK issuance rides on a live EK certificate: same quote checks, then
  // the presented EK chain must verify under this CA and still be valid.
  Result<Certificate> issue_aik(const Quote& quote, ByteView aik_pub,
                                const Certificate& ek_cert,
                                const AttestationRequest& req,
                                uint64_t now_ms) {
    if (!verify_certificate(ek_cert, public_der())) return Err::BadChain;
    if (!ek_cert.valid_at(now_ms)) return Err::BadChain;
    if (ek_cert.mrenclave != quote.identity.mrenclave) return Err::BadChain;
    return verify_and_issue(quote, aik_pub, req, now_ms);
  }

 private:
  Result<Certificate> issue(ByteView key_pub, const Digest& mrenclave,
                            uint64_t now_ms) {
    Certificate cert;
    cert.issuer = "svtpm-privacy-ca";
    cert.subject_key_pub = Bytes(key_pub.begin(), key_pub.end());
    cert.mrenclave = mrenclave;
    cert.valid_from_ms = now_ms;
    cert.valid_until_ms = now_ms + lifetime_ms_;
    cert.signature = rsa_pss_sign(key_, cert.signed_body());
    return cert;
  }

  Drbg rng_;
  PcaPolicy policy_;
  uint64_t lifetime_ms_;
  RsaKey key_;
  RsaKey group_pub_;
  std::vector<std::array<uint8_t, 32>> outstanding_;
};

}  // namespace svtpm
