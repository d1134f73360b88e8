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

#include <mutex>

#include "svtpm/crypto.hpp"
#include "svtpm/enclave.hpp"
#include "svtpm/fs.hpp"
#include "svtpm/result.hpp"

namespace svtpm {

enum class CounterPolicy : uint8_t {
  SameSigner = 1,
  SameMeasurement = 2,
  Both = 3,
};

struct PlatformTime {
  uint64_t epoch_nonce = 0;
  uint64_t seconds = 0;
  bool operator==(const PlatformTime&) const = default;
};

// Stand-in for the platform services real SGX gets from hardware and the
// Platform Service Enclave: the sealing root secret, monotonic counters,
// and the coarse trusted clock. Everything lives in one directory that the
// adversary harness deliberately keeps outside its snapshot range, the way
// fuse-held secrets and ME storage survive VM snapshots.
//
// Time is simulated: a virtual timeline advances only through advance_ms.
// The guest-visible host clock is that timeline plus an attacker-settable
// skew; the platform clock ignores the skew and only moves with the
// timeline itself.
class Platform {
 public:
  static constexpr size_t kMaxCounters = 256;

  // init_seed makes first-time initialization (secret, epoch nonce)
  // reproducible; 0 draws from the OS. An already-initialized directory
  // ignores the seed.
  explicit Platform(fs::path dir, uint64_t init_seed = 0) : dir_(std::move(dir)) {
    must_ensure_dir(dir_);
    FileLock lock(lock_path());
    if (!fs::exists(secret_path())) {
      Drbg rng = init_seed != 0 ? Drbg::from_seed_u64(init_seed)
                                : Drbg::from_os();
      must_write(secret_path(), rng.bytes(32));
      ClockFile c;
      c.epoch_nonce = rng.next_u64();
      store_clock(c);
    }
    Bytes s = read_file(secret_path()).take();
    std::memcpy(secret_.data(), s.data(), 32);
  }

  const fs::path& dir() const { return dir_; }
  const std::array<uint8_t, 32>& secret() const { return secret_; }

  // Platform group key: the quoting service signs with the private half,
  // the verification service holds the public half.
  RsaKey group_key() const {
    auto ikm = hkdf_key32({}, secret_,
                          to_bytes(std::string("svtpm/group-key/v1")));
    return derive_rsa_key_cached(view(ikm), 2048);
  }
  Bytes group_public_der() const { return group_key().public_der(); }

  // --- monotonic counters --------------------------------------------------

  Result<Uuid> counter_create(const EnclaveIdentity& caller,
                              CounterPolicy policy) {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    CounterFile f = load_counters();
    if (f.records.size() >= kMaxCounters) return Err::NoCounters;
    CounterRecord rec;
    ByteWriter w;
    w.raw(to_bytes(std::string("svtpm/counter-uuid/v1")));
    w.u64(f.next_seq++);
    Digest d = hmac_sha256(secret_, w.bytes());
    std::memcpy(rec.uuid.data(), d.data(), 16);
    rec.value = 0;
    rec.policy = policy;
    rec.owner = owner_digest(caller, policy);
    f.records.push_back(rec);
    store_counters(f);
    return rec.uuid;
  }

  Result<uint64_t> counter_increment(const EnclaveIdentity& caller,
                                     const Uuid& uuid) {
    return counter_op(caller, uuid, true);
  }

  Result<uint64_t> counter_read(const EnclaveIdentity& caller,
                                const Uuid& uuid) {
    return counter_op(caller, uuid, false);
  }

  Result<void> counter_destroy(const EnclaveIdentity& caller,
                               const Uuid& uuid) {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    CounterFile f = load_counters();
    for (auto it = f.records.begin(); it != f.records.end(); ++it) {
      if (it->uuid != uuid) continue;
      if (it->owner != owner_digest(caller, it->policy)) return Err::Access;
      f.records.erase(it);
      store_counters(f);
      return Result<void>();
    }
    return Err::UnknownUuid;
  }

  size_t live_counters() {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    return load_counters().records.size();
  }

  // --- timeline ------------------------------------------------------------

  uint64_t virtual_now_ms() {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    return load_clock().virtual_ms;
  }

  void advance_ms(uint64_t delta) {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    ClockFile c = load_clock();
    c.virtual_ms += delta;
    store_clock(c);
  }

  // Untrusted guest clock: what the host OS tells the vTPM when no trusted
  // clock is in play. The harness skews it at will.
  uint64_t host_now_ms() {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    ClockFile c = load_clock();
    int64_t v = static_cast<int64_t>(c.virtual_ms) + c.host_skew_ms;
    return v < 0 ? 0 : static_cast<uint64_t>(v);
  }

  void skew_host_ms(int64_t delta) {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    ClockFile c = load_clock();
    c.host_skew_ms += delta;
    store_clock(c);
  }

  // Trusted coarse clock: whole seconds since the current epoch began,
  // plus the epoch nonce. Unaffected by host skew.
  PlatformTime platform_time() {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    ClockFile c = load_clock();
    return PlatformTime{c.epoch_nonce,
                        (c.virtual_ms - c.epoch_base_ms) / 1000};
  }

  // Simulated platform reset: fresh epoch nonce, seconds restart. The new
  // nonce is a PRF of the old state so replays of a scripted timeline stay
  // deterministic.
  void platform_reset() {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    ClockFile c = load_clock();
    ByteWriter w;
    w.raw(to_bytes(std::string("svtpm/epoch/v1")));
    w.u64(c.epoch_nonce);
    w.u64(c.virtual_ms);
    Digest d = hmac_sha256(secret_, w.bytes());
    uint64_t nonce = 0;
    for (int i = 0; i < 8; ++i) nonce = nonce << 8 | d[i];
    c.epoch_nonce = nonce;
    c.epoch_base_ms = c.virtual_ms;
    store_clock(c);
  }

 private:
  struct CounterRecord {
    Uuid uuid{};
    uint64_t value = 0;
    CounterPolicy policy = CounterPolicy::SameSigner;
    Digest owner{};
  };
  struct CounterFile {
    uint64_t next_seq = 0;
    std::vector<CounterRecord> records;
  };
  struct ClockFile {
    uint64_t virtual_ms = 0;
    int64_t host_skew_ms = 0;
    uint64_t epoch_nonce = 0;
    uint64_t epoch_base_ms = 0;
  };

  fs::path secret_path() const { return dir_ / "secret"; }
  fs::path counters_path() const { return dir_ / "counters"; }
  fs::path clock_path() const { return dir_ / "clock"; }
  fs::path lock_path() const { return dir_ / "lock"; }

  static Digest owner_digest(const EnclaveIdentity& id, CounterPolicy p) {
    switch (p) {
      case CounterPolicy::SameSigner: return id.mrsigner;
      case CounterPolicy::SameMeasurement: return id.mrenclave;
      case CounterPolicy::Both:
        return sha256_concat(view(id.mrenclave), view(id.mrsigner));
    }
    return Digest{};
  }

  Result<uint64_t> counter_op(const EnclaveIdentity& caller, const Uuid& uuid,
                              bool increment) {
    std::lock_guard<std::mutex> g(mu_);
    FileLock lock(lock_path());
    CounterFile f = load_counters();
    for (CounterRecord& rec : f.records) {
      if (rec.uuid != uuid) continue;
      if (rec.owner != owner_digest(caller, rec.policy)) return Err::Access;
      if (increment) {
        ++rec.value;
        store_counters(f);
      }
      return rec.value;
    }
    return Err::UnknownUuid;
  }

  CounterFile load_counters() {
    CounterFile f;
    auto data = read_file(counters_path());
    if (!data.ok()) return f;  // absent file: empty store
    ByteReader r(*data);
    if (to_string(r.raw(4)) != "SVCS" || r.u16() != 1) return CounterFile{};
    f.next_seq = r.u64();
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count && !r.failed(); ++i) {
      CounterRecord rec;
      rec.uuid = r.arr<16>();
      rec.value = r.u64();
      rec.policy = static_cast<CounterPolicy>(r.u8());
      rec.owner = r.arr<32>();
      f.records.push_back(rec);
    }
    if (!r.done()) return CounterFile{};
    return f;
  }

  void store_counters(const CounterFile& f) {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVCS")));
    w.u16(1);
    w.u64(f.next_seq);
    w.u32(static_cast<uint32_t>(f.records.size()));
    for (const CounterRecord& rec : f.records) {
      w.raw(rec.uuid);
      w.u64(rec.value);
      w.u8(static_cast<uint8_t>(rec.policy));
      w.raw(view(rec.owner));
    }
    must_write(counters_path(), w.bytes());
  }

  ClockFile load_clock() {
    ClockFile c;
    auto data = read_file(clock_path());
    if (!data.ok()) return c;
    ByteReader r(*data);
    if (to_string(r.raw(4)) != "SVPK" || r.u16() != 1) return ClockFile{};
    c.virtual_ms = r.u64();
    c.host_skew_ms = static_cast<int64_t>(r.u64());
    c.epoch_nonce = r.u64();
    c.epoch_base_ms = r.u64();
    return c;
  }

  void store_clock(const ClockFile& c) {
    ByteWriter w;
    w.raw(to_bytes(std::string("SVPK")));
    w.u16(1);
    w.u64(c.virtual_ms);
    w.u64(static_cast<uint64_t>(c.host_skew_ms));
    w.u64(c.epoch_nonce);
    w.u64(c.epoch_base_ms);
    must_write(clock_path(), w.bytes());
  }

  fs::path dir_;
  std::array<uint8_t, 32> secret_{};
  std::mutex mu_;
};

}  // namespace svtpm
