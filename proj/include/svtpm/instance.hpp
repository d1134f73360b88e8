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

#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "svtpm/nvram.hpp"
#include "svtpm/rollback.hpp"
#include "svtpm/tpm.hpp"
#include "svtpm/trusted_clock.hpp"
#include "svtpm/wire.hpp"

namespace svtpm {

// One virtual TPM instance on disk plus the launcher that boots it. The
// instance directory is the rollback space: everything in it can be
// snapshotted, restored, or swapped by the adversary. The software ledger,
// the counter store, the cloud registry, and the per-instance config all
// live outside that boundary.

enum class RollbackMode : uint8_t { Off = 0, Software = 1, Counter = 2 };

inline const char* rollback_mode_name(RollbackMode m) {
  switch (m) {
    case RollbackMode::Off: return "off";
    case RollbackMode::Software: return "software";
    case RollbackMode::Counter: return "counter";
  }
  return "off";
}

inline std::optional<RollbackMode> rollback_mode_from_name(
    const std::string& name) {
  if (name == "off") return RollbackMode::Off;
  if (name == "software") return RollbackMode::Software;
  if (name == "counter") return RollbackMode::Counter;
  return std::nullopt;
}

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_u64(const std::string& s, uint64_t& out) {
  if (s.empty()) return false;
  uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    if (v > (UINT64_MAX - 9) / 10) return false;
    v = v * 10 + static_cast<uint64_t>(c - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

// Per-instance settings. Kept outside the rollback space: defenses are
// operator choices, not data the adversary can roll back or swap.
struct InstanceConfig {
  bool nvram_protection = true;
  RollbackMode rollback = RollbackMode::Counter;
  bool trusted_clock = true;
  uint64_t tick_rate_hz = 1000;
  uint64_t correction_interval_ms = 1000;

  bool operator==(const InstanceConfig&) const = default;

  std::string serialize() const {
    std::ostringstream out;
    out << "nvram.protection = " << (nvram_protection ? "on" : "off") << '\n'
        << "rollback.mechanism = " << rollback_mode_name(rollback) << '\n'
        << "clock.trusted = " << (trusted_clock ? "on" : "off") << '\n'
        << "clock.tick_rate_hz = " << tick_rate_hz << '\n'
        << "clock.correction_interval_ms = " << correction_interval_ms
        << '\n';
    return out.str();
  }

  static Result<InstanceConfig> parse(const std::string& text) {
    InstanceConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          return Err::BadParam;
        continue;
      }
      std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (key == "nvram.protection") {
        if (value != "on" && value != "off") return Err::BadParam;
        cfg.nvram_protection = value == "on";
      } else if (key == "clock.trusted") {
        if (value != "on" && value != "off") return Err::BadParam;
        cfg.trusted_clock = value == "on";
      } else if (key == "rollback.mechanism") {
        auto mode = rollback_mode_from_name(value);
        if (!mode) return Err::BadParam;
        cfg.rollback = *mode;
      } else if (key == "clock.tick_rate_hz") {
        if (!detail::parse_u64(value, cfg.tick_rate_hz) ||
            cfg.tick_rate_hz == 0)
          return Err::BadParam;
      } else if (key == "clock.correction_interval_ms") {
        if (!detail::parse_u64(value, cfg.correction_interval_ms) ||
            cfg.correction_interval_ms == 0)
          return Err::BadParam;
      } else {
        return Err::BadParam;
      }
    }
    return cfg;
  }
};

// Directory layout for one workspace. Snapshot and restore touch only the
// instance directory; that boundary is what makes the ledger, counter
// store, and registry "outside the rollback space".
class Workspace {
 public:
  static constexpr const char* kNvramFile = "nvram.img";
  static constexpr const char* kVmFile = "vm.img";
  static constexpr const char* kEnclaveFile = "enclave.blob";
  static constexpr const char* kSignerFile = "signer.pub";
  static constexpr const char* kBindingFile = "binding.rec";

  explicit Workspace(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  // Sibling, not child: hardware state survives whatever happens to the
  // workspace, the way fuses and ME storage survive VM snapshots.
  fs::path platform_dir() const {
    return fs::path(root_.string() + ".platform");
  }

  fs::path instance_dir(const std::string& name) const {
    return root_ / "instances" / name;
  }
  fs::path conf_path(const std::string& name) const {
    return root_ / "conf" / (name + ".conf");
  }
  fs::path ledger_path(const std::string& name) const {
    return root_ / "ledger" / (name + ".ledger");
  }
  fs::path registry_path() const { return root_ / "cloud" / "registry.txt"; }
  fs::path snapshot_dir(const std::string& name) const {
    return root_ / "snapshots" / name;
  }

  Result<void> snapshot(const std::string& name) const {
    return copy_dir(instance_dir(name), snapshot_dir(name));
  }

  Result<void> restore(const std::string& name) const {
    return copy_dir(snapshot_dir(name), instance_dir(name));
  }

 private:
  static Result<void> copy_dir(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    if (!fs::is_directory(from, ec)) return Err::Io;
    fs::remove_all(to, ec);
    if (ec) return Err::Io;
    fs::create_directories(to, ec);
    if (ec) return Err::Io;
    fs::copy(from, to, fs::copy_options::recursive, ec);
    if (ec) return Err::Io;
    return Result<void>();
  }

  fs::path root_;
};

// The authenticated channel to the cloud registry, one key per tenant.
inline std::array<uint8_t, 32> binding_channel_key(
    const Platform& platform, const std::string& tenant) {
  ByteWriter info;
  info.raw(to_bytes(std::string("svtpm/channel-key/v1")));
  info.raw(to_bytes(tenant));
  return hkdf_key32({}, platform.secret(), info.bytes());
}

// Every tenant runs the same vTPM build; user identity enters through the
// signer, never the code.
inline const Bytes& vtpm_code_blob() {
  static const Bytes blob =
      to_bytes(std::string("svtpm virtual TPM enclave code image v1"));
  return blob;
}

inline Bytes user_seed_bytes(uint64_t user_seed) {
  ByteWriter w;
  w.u64(user_seed);
  return w.take();
}

inline Bytes synthetic_vm_image(const std::string& name, uint64_t user_seed) {
  ByteWriter info;
  info.raw(to_bytes(std::string("svtpm/vm-image/v1")));
  info.raw(to_bytes(name));
  auto seed = hkdf_key32({}, user_seed_bytes(user_seed), info.bytes());
  Drbg rng{view(seed)};
  return rng.bytes(4096);
}

// The cold NVRAM read path, shared by the launcher and the launch-latency
// benchmark: file bytes to parsed image, unsealing when protection is on.
inline Result<NvramImage> read_nvram_file(const fs::path& file, bool sealed,
                                          const EnclaveIdentity& id,
                                          ByteView platform_secret) {
  auto bytes = read_file(file);
  if (!bytes.ok()) return Err::Io;
  if (!sealed) return NvramImage::parse(*bytes);
  auto blob = SealedBlob::parse(*bytes);
  if (!blob.ok()) return blob.error();
  return load_nvram(id, platform_secret, *blob);
}

struct ProvisionedInstance {
  EnclaveIdentity identity;
  Digest vm_digest{};
};

// Creates one tenant's full stack: signed VM image, enclave files, initial
// NVRAM, config, ledger reference, and the registry entry the remote
// binding check will later compare against.
inline Result<ProvisionedInstance> provision_instance(
    Platform& platform, const Workspace& ws, const std::string& name,
    uint64_t user_seed, const InstanceConfig& cfg) {
  Bytes seed = user_seed_bytes(user_seed);
  RsaKey user_key = user_signing_key(seed);
  Bytes vm = synthetic_vm_image(name, user_seed);
  Provisioned p = provision(user_key, vm, vtpm_code_blob());

  ByteWriter root_info;
  root_info.raw(to_bytes(std::string("svtpm/tpm-root-secret/v1")));
  root_info.raw(to_bytes(name));
  auto root_secret = hkdf_key32({}, seed, root_info.bytes());
  TpmState state = TpmState::provision(view(root_secret));

  RollbackLedgerRef ref;
  switch (cfg.rollback) {
    case RollbackMode::Off:
      break;
    case RollbackMode::Software:
      ref.kind = LedgerRefKind::GlobalFailedTries;
      break;
    case RollbackMode::Counter: {
      auto guard = RollbackGuard::create_hardware(platform, p.identity);
      if (!guard.ok()) return guard.error();
      ref.kind = LedgerRefKind::CounterUuid;
      ref.counter_uuid = guard->counter_uuid();
      break;
    }
  }

  NvramImage image;
  image.tpm_state = serialize_state(state);
  image.ledger_ref = ref;

  fs::path dir = ws.instance_dir(name);
  must_ensure_dir(dir);
  must_write(dir / Workspace::kVmFile, vm);
  must_write(dir / Workspace::kEnclaveFile, vtpm_code_blob());
  must_write(dir / Workspace::kSignerFile, user_key.public_der());
  must_write(dir / Workspace::kBindingFile, p.record.serialize());
  Bytes nvram_bytes =
      cfg.nvram_protection
          ? store_nvram(p.identity, image, platform.secret()).serialize()
          : image.serialize();
  must_write(dir / Workspace::kNvramFile, nvram_bytes);

  must_ensure_dir(ws.conf_path(name).parent_path());
  must_write(ws.conf_path(name), to_bytes(cfg.serialize()));

  CloudRegistry registry(ws.registry_path());
  registry.add({name, p.identity.mrenclave, p.record.vm_image_digest});

  return ProvisionedInstance{p.identity, p.record.vm_image_digest};
}

// A booted instance: launcher checks passed, state loaded and synchronized
// against the rollback ledger. Every executed command writes state back
// through to the NVRAM file before its response returns, so the on-disk
// image never lags the in-memory one.
class Instance {
 public:
  // The launcher. Refusal is an error value, never an abort, so attack
  // outcomes stay countable: ERR_BINDING_MISMATCH for the §4.4-style
  // checks, ERR_POLICY_MISMATCH / ERR_CORRUPT from unsealing,
  // ERR_UNKNOWN_UUID when the ledger counter vanished under the snapshot.
  static Result<Instance> boot(Platform& platform, const Workspace& ws,
                               const std::string& name) {
    auto conf_text = read_file(ws.conf_path(name));
    if (!conf_text.ok()) return Err::Io;
    auto cfg = InstanceConfig::parse(to_string(*conf_text));
    if (!cfg.ok()) return cfg.error();

    fs::path dir = ws.instance_dir(name);
    auto vm = read_file(dir / kVm());
    auto code = read_file(dir / kEnclave());
    auto signer_pub = read_file(dir / kSigner());
    auto binding = read_file(dir / kBinding());
    if (!vm.ok() || !code.ok() || !signer_pub.ok() || !binding.ok())
      return Err::Io;

    EnclaveIdentity id = measure(*code, *signer_pub);

    if (cfg->nvram_protection) {
      auto record = BindingRecord::parse(*binding);
      if (!record.ok()) return record.error();
      if (!verify_boot_binding(*vm, *record, *signer_pub))
        return Err::BindingMismatch;
      if (record->enclave_mrsigner != id.mrsigner)
        return Err::BindingMismatch;
      CloudRegistry registry(ws.registry_path());
      auto expected = registry.find(name);
      if (!expected) return Err::BindingMismatch;
      auto channel_key = binding_channel_key(platform, name);
      BindingReport report = make_binding_report(id.mrenclave, sha256(*vm),
                                                 view(channel_key));
      if (remote_binding_check(report, expected->mrenclave,
                               expected->vm_digest,
                               view(channel_key)) != BindingVerdict::Ok)
        return Err::BindingMismatch;
    }

    auto image = read_nvram_file(dir / kNvram(), cfg->nvram_protection, id,
                                 platform.secret());
    if (!image.ok()) return image.error();

    auto state = deserialize_state(image->tpm_state);
    if (!state.ok()) return state.error();

    Instance inst(platform, ws, name, *cfg, id);
    switch (image->ledger_ref.kind) {
      case LedgerRefKind::None:
        break;
      case LedgerRefKind::GlobalFailedTries:
        inst.guard_ =
            RollbackGuard::software(platform, id, ws.ledger_path(name));
        break;
      case LedgerRefKind::CounterUuid:
        inst.guard_ = RollbackGuard::hardware(platform, id,
                                              image->ledger_ref.counter_uuid);
        break;
    }

    state.value().startup_counter += 1;

    ByteWriter rng_info;
    rng_info.raw(to_bytes(std::string("svtpm/tpm-rng/v1")));
    rng_info.raw(to_bytes(name));
    rng_info.u64(state->startup_counter);
    auto rng_seed = hkdf_key32({}, platform.secret(), rng_info.bytes());
    inst.tpm_.emplace(state.take(), Drbg(view(rng_seed)));

    // Every boot is the tail of a potential rollback; synchronizing here is
    // what closes the restore-and-retry loop.
    if (inst.guard_) {
      auto t = inst.now();
      if (!t.ok()) return t.error();
      auto synced = inst.guard_->on_restore(inst.tpm_->state(), *t);
      if (!synced.ok()) return synced.error();
    }
    inst.persist();
    return inst;
  }

  Bytes execute(ByteView frame) {
    wire_hooks();
    if (guard_lost_) return Response::failure(Err::UnknownUuid).encode();
    auto t = now();
    if (!t.ok()) return Response::failure(t.error()).encode();
    Bytes resp = tpm_->handle_frame(frame, *t);
    persist();
    return resp;
  }

  // Drives the virtual timeline; clock ticks and corrections ride along.
  void advance(uint64_t ms) {
    ClockDriver driver(*platform_, *clock_);
    driver.advance(ms);
  }

  // The lockout state machine runs on trusted time; with the defense off it
  // runs on the skewable host clock instead, which is the attack surface.
  Result<uint64_t> now() {
    if (!cfg_.trusted_clock) return platform_->host_now_ms();
    return clock_->now_ms();
  }

  const std::string& name() const { return name_; }
  const InstanceConfig& config() const { return cfg_; }
  const EnclaveIdentity& identity() const { return id_; }
  Tpm& tpm() { return *tpm_; }
  TpmState& state() { return tpm_->state(); }
  TrustedClock& clock() { return *clock_; }
  bool guard_lost() const { return guard_lost_; }
  std::optional<RollbackGuard>& guard() { return guard_; }

  void interrupt_next_sync() {
    if (guard_) guard_->interrupt_next_sync();
  }

  void persist() {
    NvramImage image;
    image.tpm_state = serialize_state(tpm_->state());
    image.ledger_ref = ledger_ref();
    Bytes bytes =
        cfg_.nvram_protection
            ? store_nvram(id_, image, platform_->secret()).serialize()
            : image.serialize();
    must_write(ws_.instance_dir(name_) / kNvram(), bytes);
  }

 private:
  Instance(Platform& platform, const Workspace& ws, std::string name,
           InstanceConfig cfg, const EnclaveIdentity& id)
      : platform_(&platform),
        ws_(ws),
        name_(std::move(name)),
        cfg_(cfg),
        id_(id),
        clock_(std::make_unique<TrustedClock>(
            platform, TrustedClock::Config{cfg.tick_rate_hz,
                                           cfg.correction_interval_ms})) {}

  // Members move with the instance; the hooks capture this, so they are
  // rewired before every dispatch rather than at construction.
  void wire_hooks() {
    tpm_->on_auth_failure = [this](const LockoutRecord&) {
      if (guard_ && !guard_->on_auth_failure(tpm_->state()).ok())
        guard_lost_ = true;
    };
    tpm_->on_lockout_recovery = [this]() {
      if (guard_ && !guard_->on_lockout_recovery(tpm_->state()).ok())
        guard_lost_ = true;
    };
  }

  RollbackLedgerRef ledger_ref() const {
    RollbackLedgerRef ref;
    if (!guard_) return ref;
    if (guard_->mechanism() == RollbackMechanism::Software) {
      ref.kind = LedgerRefKind::GlobalFailedTries;
      ref.global_failed_tries = tpm_->state().lockout.failed_tries;
    } else {
      ref.kind = LedgerRefKind::CounterUuid;
      ref.counter_uuid = guard_->counter_uuid();
    }
    return ref;
  }

  static fs::path kNvram() { return Workspace::kNvramFile; }
  static fs::path kVm() { return Workspace::kVmFile; }
  static fs::path kEnclave() { return Workspace::kEnclaveFile; }
  static fs::path kSigner() { return Workspace::kSignerFile; }
  static fs::path kBinding() { return Workspace::kBindingFile; }

  Platform* platform_;
  Workspace ws_;
  std::string name_;
  InstanceConfig cfg_;
  EnclaveIdentity id_;
  std::unique_ptr<TrustedClock> clock_;
  std::optional<RollbackGuard> guard_;
  std::optional<Tpm> tpm_;
  bool guard_lost_ = false;
};

}  // namespace svtpm
