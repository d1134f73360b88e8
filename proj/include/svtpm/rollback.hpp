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

#include "svtpm/enclave.hpp"
#include "svtpm/platform.hpp"
#include "svtpm/tpm_state.hpp"

namespace svtpm {

enum class RollbackMechanism : uint8_t {
  Software = 1,
  HardwareCounter = 2,
};

// Keeps the dictionary-attack failure counter honest across snapshot
// rollbacks of the TPM's storage. Two interchangeable mechanisms:
//
//   Software        - a sealed shadow of failed_tries in a file outside the
//                     snapshot scope, written after every local increment.
//                     The write is a separate step, so a host that kills the
//                     process between increment and sync reopens the gap;
//                     interrupt_next_sync models exactly that.
//   HardwareCounter - a platform monotonic counter incremented per failure.
//                     Increment and mirror happen on the platform side in
//                     one call, leaving the host no seam to interrupt; the
//                     cost is counter budget and a hard failure when a
//                     restored image references a counter that a recovery
//                     has since destroyed.
//
// All three entry points are called from the owning command loop; the guard
// adds no locking of its own.
class RollbackGuard {
 public:
  static RollbackGuard software(Platform& platform,
                                const EnclaveIdentity& self,
                                fs::path ledger_file) {
    RollbackGuard g(platform, self, RollbackMechanism::Software);
    g.ledger_file_ = std::move(ledger_file);
    return g;
  }

  // Adopts a counter recorded earlier (normally from the loaded NVRAM
  // image). The uuid's validity surfaces on first use, not here.
  static RollbackGuard hardware(Platform& platform,
                                const EnclaveIdentity& self,
                                const Uuid& uuid) {
    RollbackGuard g(platform, self, RollbackMechanism::HardwareCounter);
    g.uuid_ = uuid;
    return g;
  }

  // Fresh provisioning path; claims one counter from the platform budget.
  static Result<RollbackGuard> create_hardware(Platform& platform,
                                               const EnclaveIdentity& self) {
    auto uuid = platform.counter_create(self, CounterPolicy::Both);
    if (!uuid.ok()) return uuid.error();
    return hardware(platform, self, *uuid);
  }

  RollbackMechanism mechanism() const { return mechanism_; }
  const Uuid& counter_uuid() const { return uuid_; }

  // Arms the synchronization attack: the next failure's ledger update is
  // dropped. The counter mechanism has no separable update, so there the
  // armed flag is consumed without effect.
  void interrupt_next_sync() { interrupt_armed_ = true; }

  // Called after the TPM incremented failed_tries for a bad auth value.
  Result<void> on_auth_failure(TpmState& state) {
    LockoutRecord& l = state.lockout;
    bool interrupted = interrupt_armed_;
    interrupt_armed_ = false;
    if (mechanism_ == RollbackMechanism::Software) {
      if (interrupted) return Result<void>();
      write_ledger(l.failed_tries);
      return Result<void>();
    }
    auto v = platform_->counter_increment(self_, uuid_);
    if (!v.ok()) return v.error();
    mirror(l, *v);
    return Result<void>();
  }

  // Called after TPM state was (re)loaded from storage, before any command
  // runs against it. Pulls the counter the snapshot could not roll back and
  // re-derives the lockout from the synchronized value.
  Result<void> on_restore(TpmState& state, uint64_t now_ms) {
    LockoutRecord& l = state.lockout;
    if (mechanism_ == RollbackMechanism::Software) {
      auto global = read_ledger();
      if (!global.ok()) return global.error();
      // max, not copy: a restore may never lower the counter
      l.failed_tries = std::max(l.failed_tries, *global);
    } else {
      auto v = platform_->counter_read(self_, uuid_);
      if (!v.ok()) return v.error();
      mirror(l, *v);
    }
    if (l.failed_tries >= l.max_tries && !l.has_deadline) {
      l.has_deadline = true;
      l.deadline_ms = now_ms + l.recovery_interval_ms;
    }
    return Result<void>();
  }

  // Called when an expired lockout clears. Both copies return to zero; the
  // counter mechanism swaps its counter for a fresh one so the old uuid can
  // never vouch for a stale count again.
  Result<void> on_lockout_recovery(TpmState& state) {
    LockoutRecord& l = state.lockout;
    l.failed_tries = 0;
    l.has_deadline = false;
    l.deadline_ms = 0;
    if (mechanism_ == RollbackMechanism::Software) {
      write_ledger(0);
      return Result<void>();
    }
    auto destroyed = platform_->counter_destroy(self_, uuid_);
    if (!destroyed.ok()) return destroyed.error();
    auto fresh = platform_->counter_create(self_, CounterPolicy::Both);
    if (!fresh.ok()) return fresh.error();
    uuid_ = *fresh;
    return Result<void>();
  }

  // Software only: the shadow value as persisted right now.
  Result<uint32_t> read_ledger() {
    if (!fs::exists(ledger_file_)) return uint32_t{0};
    auto raw = read_file(ledger_file_);
    if (!raw.ok()) return raw.error();
    auto blob = SealedBlob::parse(*raw);
    if (!blob.ok()) return blob.error();
    auto payload = enclave_unseal(self_, view(platform_->secret()), *blob);
    if (!payload.ok()) return payload.error();
    ByteReader r(*payload);
    if (to_string(r.raw(4)) != "SVGL" || r.u16() != 1) return Err::Corrupt;
    uint32_t value = r.u32();
    if (r.failed() || !r.done()) return Err::Corrupt;
    return value;
  }

 private:
  RollbackGuard(Platform& platform, const EnclaveIdentity& self,
                RollbackMechanism mechanism)
      : platform_(&platform), self_(self), mechanism_(mechanism) {}

  void mirror(LockoutRecord& l, uint64_t counter_value) {
    // the counter only counts failures since the last recovery, but clamp
    // anyway so a u32 state field can hold it
    l.failed_tries = static_cast<uint32_t>(
        std::min<uint64_t>(counter_value, l.max_tries));
  }

  void write_ledger(uint32_t value) {
    must_ensure_dir(ledger_file_.parent_path());
    ByteWriter payload;
    payload.raw(to_bytes(std::string("SVGL")));
    payload.u16(1);
    payload.u32(value);
    // nonce derived from the payload: deterministic, distinct per value
    ByteWriter info;
    info.raw(to_bytes(std::string("svtpm/ledger-seal-rng/v1")));
    info.raw(payload.bytes());
    auto seed = hkdf_key32({}, view(platform_->secret()), info.bytes());
    Drbg rng(view(seed));
    SealedBlob blob = enclave_seal(self_, SealPolicy::BySigner,
                                   view(platform_->secret()), payload.bytes(),
                                   rng);
    must_write(ledger_file_, blob.serialize());
  }

  Platform* platform_;
  EnclaveIdentity self_;
  RollbackMechanism mechanism_;
  fs::path ledger_file_;
  Uuid uuid_{};
  bool interrupt_armed_ = false;
};

}  // namespace svtpm
