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

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svtpm/enclave.hpp"
#include "svtpm/fs.hpp"

namespace svtpm {

// --- NVRAM image ------------------------------------------------------------

enum class LedgerRefKind : uint8_t {
  None = 0,             // rollback defense off
  GlobalFailedTries = 1,  // software shadow, embedded copy of the last sync
  CounterUuid = 2,      // platform monotonic counter
};

struct RollbackLedgerRef {
  LedgerRefKind kind = LedgerRefKind::None;
  uint32_t global_failed_tries = 0;
  Uuid counter_uuid{};

  bool operator==(const RollbackLedgerRef&) const = default;
};

// The persistent half of one virtual TPM: its serialized state plus the
// reference tying it to the rollback ledger. Always stored sealed; the
// plaintext layout below is what lives inside the sealed container.
struct NvramImage {
  uint16_t format_version = 1;
  Bytes tpm_state;
  RollbackLedgerRef ledger_ref;

  bool operator==(const NvramImage&) const = default;

  Bytes serialize() const {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVNV")));
    w.u16(format_version);
    w.u8(static_cast<uint8_t>(ledger_ref.kind));
    switch (ledger_ref.kind) {
      case LedgerRefKind::None:
        break;
      case LedgerRefKind::GlobalFailedTries:
        w.u32(ledger_ref.global_failed_tries);
        break;
      case LedgerRefKind::CounterUuid:
        w.raw(view(ledger_ref.counter_uuid));
        break;
    }
    w.vec32(tpm_state);
    return w.take();
  }

  static Result<NvramImage> parse(ByteView data) {
    ByteReader r(data);
    if (to_string(r.raw(4)) != "SVNV") return Err::Corrupt;
    NvramImage img;
    img.format_version = r.u16();
    if (img.format_version != 1) return Err::Corrupt;
    uint8_t kind = r.u8();
    switch (kind) {
      case 0:
        img.ledger_ref.kind = LedgerRefKind::None;
        break;
      case 1:
        img.ledger_ref.kind = LedgerRefKind::GlobalFailedTries;
        img.ledger_ref.global_failed_tries = r.u32();
        break;
      case 2:
        img.ledger_ref.kind = LedgerRefKind::CounterUuid;
        img.ledger_ref.counter_uuid = r.arr<16>();
        break;
      default:
        return Err::Corrupt;
    }
    img.tpm_state = r.vec32();
    if (r.failed() || !r.done()) return Err::Corrupt;
    return img;
  }
};

// Seals an image under the signer policy: any enclave signed by the same
// user may open it, nobody else can. The seal nonce is derived from the
// payload, so storing the same image twice produces the same blob and the
// write-through path stays deterministic.
inline SealedBlob store_nvram(const EnclaveIdentity& id,
                              const NvramImage& image,
                              ByteView platform_secret) {
  Bytes payload = image.serialize();
  ByteWriter info;
  info.raw(to_bytes(std::string("svtpm/nvram-seal-rng/v1")));
  info.raw(payload);
  auto seed = hkdf_key32({}, platform_secret, info.bytes());
  Drbg rng(view(seed));
  return enclave_seal(id, SealPolicy::BySigner, platform_secret, payload,
                      rng);
}

inline Result<NvramImage> load_nvram(const EnclaveIdentity& id,
                                     ByteView platform_secret,
                                     const SealedBlob& blob) {
  auto payload = enclave_unseal(id, platform_secret, blob);
  if (!payload.ok()) return payload.error();
  return NvramImage::parse(*payload);
}

// --- user keys and the VM/enclave binding -----------------------------------

// One per-user signing keypair doing double duty: it signs the user's
// enclave (so mrsigner identifies the user) and the user's VM image.
inline RsaKey user_signing_key(ByteView seed) {
  ByteWriter info;
  info.raw(to_bytes(std::string("svtpm/user-key/v1")));
  info.raw(seed);
  auto ikm = hkdf_key32({}, seed, info.bytes());
  return derive_rsa_key_cached(view(ikm), 2048);
}

// Travels with the VM image; lets the launcher refuse a swapped image and
// lets the remote check tie VM and enclave to the same owner.
struct BindingRecord {
  Digest vm_image_digest{};
  Bytes vm_image_signature;
  Digest enclave_mrsigner{};

  bool operator==(const BindingRecord&) const = default;

  Bytes serialize() const {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVBR")));
    w.u16(1);
    w.raw(view(vm_image_digest));
    w.vec16(vm_image_signature);
    w.raw(view(enclave_mrsigner));
    return w.take();
  }

  static Result<BindingRecord> parse(ByteView data) {
    ByteReader r(data);
    if (to_string(r.raw(4)) != "SVBR" || r.u16() != 1) return Err::Corrupt;
    BindingRecord rec;
    rec.vm_image_digest = r.arr<32>();
    rec.vm_image_signature = r.vec16();
    rec.enclave_mrsigner = r.arr<32>();
    if (r.failed() || !r.done()) return Err::Corrupt;
    return rec;
  }
};

struct Provisioned {
  BindingRecord record;
  EnclaveIdentity identity;
};

// Signs the VM image under the user key and measures the enclave as signed
// by that user. Persisting record and files next to the VM is the caller's
// job.
inline Provisioned provision(const RsaKey& user_key, ByteView vm_image,
                             ByteView vtpm_code_blob) {
  Provisioned p;
  p.identity = measure(vtpm_code_blob, user_key.public_der());
  p.record.vm_image_digest = sha256(vm_image);
  p.record.vm_image_signature =
      rsa_pss_sign(user_key, view(p.record.vm_image_digest));
  p.record.enclave_mrsigner = p.identity.mrsigner;
  return p;
}

// Power-on check: the image hashes to the recorded digest and the record
// was signed by the expected user. Refusal is a value, never a throw, so
// outcomes can be counted.
inline bool verify_boot_binding(ByteView vm_image,
                                const BindingRecord& record,
                                ByteView user_pub_der) {
  if (sha256(vm_image) != record.vm_image_digest) return false;
  auto key = RsaKey::from_public_der(user_pub_der);
  if (!key.ok()) return false;
  return rsa_pss_verify(*key, view(record.vm_image_digest),
                        record.vm_image_signature);
}

// --- remote binding check ----------------------------------------------------

enum class BindingVerdict : uint8_t {
  Ok = 0,
  MismatchEnclave = 1,
  MismatchVm = 2,
  BadChannel = 3,
};

inline const char* binding_verdict_name(BindingVerdict v) {
  switch (v) {
    case BindingVerdict::Ok: return "OK";
    case BindingVerdict::MismatchEnclave: return "MISMATCH_ENCLAVE";
    case BindingVerdict::MismatchVm: return "MISMATCH_VM";
    case BindingVerdict::BadChannel: return "BAD_CHANNEL";
  }
  return "?";
}

// What the enclave reports to the cloud over the authenticated channel. The
// channel is modeled as a MAC over the payload under a key shared with the
// cloud; real deployments would run TLS here.
struct BindingReport {
  Digest enclave_measurement{};
  Digest vm_measurement{};
  Digest channel_auth_tag{};
};

namespace detail {
inline Digest channel_tag(ByteView channel_key, const Digest& enclave_m,
                          const Digest& vm_m) {
  ByteWriter w;
  w.raw(to_bytes(std::string("svtpm/binding-channel/v1")));
  w.raw(view(enclave_m));
  w.raw(view(vm_m));
  return hmac_sha256(channel_key, w.bytes());
}
}  // namespace detail

inline BindingReport make_binding_report(const Digest& mrenclave,
                                         const Digest& vm_digest,
                                         ByteView channel_key) {
  BindingReport r;
  r.enclave_measurement = mrenclave;
  r.vm_measurement = vm_digest;
  r.channel_auth_tag =
      detail::channel_tag(channel_key, mrenclave, vm_digest);
  return r;
}

// Channel authenticity first: measurements in an unauthenticated report
// mean nothing, so BAD_CHANNEL shadows any mismatch.
inline BindingVerdict remote_binding_check(const BindingReport& report,
                                           const Digest& expected_mrenclave,
                                           const Digest& expected_vm_digest,
                                           ByteView channel_key) {
  Digest want = detail::channel_tag(channel_key, report.enclave_measurement,
                                    report.vm_measurement);
  if (want != report.channel_auth_tag) return BindingVerdict::BadChannel;
  if (report.enclave_measurement != expected_mrenclave)
    return BindingVerdict::MismatchEnclave;
  if (report.vm_measurement != expected_vm_digest)
    return BindingVerdict::MismatchVm;
  return BindingVerdict::Ok;
}

// --- cloud registry ----------------------------------------------------------

// The trusted third party of the remote check, desk-scale: a line-oriented
// file "<tenant> <mrenclave_hex> <vm_digest_hex>", append-only under a file
// lock. The newest line for a tenant wins, so re-provisioning appends.
class CloudRegistry {
 public:
  struct Entry {
    std::string tenant;
    Digest mrenclave{};
    Digest vm_digest{};
  };

  explicit CloudRegistry(fs::path file) : file_(std::move(file)) {
    must_ensure_dir(file_.parent_path());
  }

  const fs::path& file() const { return file_; }

  void add(const Entry& e) {
    FileLock lock(lock_path());
    std::ofstream out(file_, std::ios::app);
    out << e.tenant << ' ' << hex_encode(view(e.mrenclave)) << ' '
        << hex_encode(view(e.vm_digest)) << '\n';
    if (!out) throw std::runtime_error("unwritable registry: " +
                                       file_.string());
  }

  std::optional<Entry> find(const std::string& tenant) {
    FileLock lock(lock_path());
    std::ifstream in(file_);
    std::optional<Entry> found;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string name, enclave_hex, vm_hex;
      if (!(fields >> name >> enclave_hex >> vm_hex)) continue;
      if (name != tenant) continue;
      auto enclave_raw = hex_decode(enclave_hex);
      auto vm_raw = hex_decode(vm_hex);
      if (!enclave_raw.ok() || enclave_raw->size() != 32) continue;
      if (!vm_raw.ok() || vm_raw->size() != 32) continue;
      Entry e;
      e.tenant = name;
      std::copy(enclave_raw->begin(), enclave_raw->end(),
                e.mrenclave.begin());
      std::copy(vm_raw->begin(), vm_raw->end(), e.vm_digest.begin());
      found = e;
    }
    return found;
  }

 private:
  fs::path lock_path() const {
    fs::path p = file_;
    p += ".lock";
    return p;
  }

  fs::path file_;
};

}  // namespace svtpm
