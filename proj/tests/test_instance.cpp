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

#include "svtpm/instance.hpp"

#include <gtest/gtest.h>

#include "svtpm/client.hpp"
#include "temp_dir.hpp"

namespace svtpm {
namespace {

InstanceConfig config_for(RollbackMode mode, bool protection = true) {
  InstanceConfig cfg;
  cfg.rollback = mode;
  cfg.nvram_protection = protection;
  return cfg;
}

struct Rig {
  TempDir tmp;
  Workspace ws;
  Platform platform;

  Rig() : ws(tmp.path() / "ws"), platform(ws.platform_dir(), 7) {}

  void provision(const std::string& name, uint64_t user_seed,
                 const InstanceConfig& cfg) {
    ASSERT_TRUE(provision_instance(platform, ws, name, user_seed, cfg).ok());
  }

  Instance boot(const std::string& name) {
    auto inst = Instance::boot(platform, ws, name);
    EXPECT_TRUE(inst.ok()) << err_name(inst.error());
    return inst.take();
  }
};

Response run(Instance& inst, const Command& cmd) {
  auto resp = Response::decode(inst.execute(cmd.encode()));
  EXPECT_TRUE(resp.ok());
  return resp.take();
}

// Creates one AES key with a secret auth value; the handle is the guessing
// target for the lockout scenarios.
uint32_t create_guarded_key(Instance& inst, const std::string& auth) {
  Response resp = run(inst, client::create_primary(
                                kRhOwner, KeyKind::AesSymmetric, 256,
                                to_bytes(std::string("guarded")), {},
                                to_bytes(auth)));
  auto created = client::parse_created(resp);
  EXPECT_TRUE(created.ok());
  return created.ok() ? created->handle : 0;
}

Err guess(Instance& inst, uint32_t handle, const std::string& auth) {
  Response resp = run(inst, client::encrypt(handle, to_bytes(auth),
                                            to_bytes(std::string("pt"))));
  return resp.error;
}

TEST(Config, SerializationRoundtrips) {
  for (RollbackMode mode :
       {RollbackMode::Off, RollbackMode::Software, RollbackMode::Counter}) {
    for (bool protection : {false, true}) {
      for (bool trusted : {false, true}) {
        InstanceConfig cfg;
        cfg.rollback = mode;
        cfg.nvram_protection = protection;
        cfg.trusted_clock = trusted;
        cfg.tick_rate_hz = 4000;
        cfg.correction_interval_ms = 250;
        auto back = InstanceConfig::parse(cfg.serialize());
        ASSERT_TRUE(back.ok());
        EXPECT_EQ(*back, cfg);
      }
    }
  }
}

TEST(Config, CommentsAndBlankLinesIgnored) {
  auto cfg = InstanceConfig::parse(
      "# a comment\n"
      "\n"
      "rollback.mechanism = software  # trailing comment\n"
      "   \n");
  ASSERT_TRUE(cfg.ok());
  EXPECT_EQ(cfg->rollback, RollbackMode::Software);
  EXPECT_TRUE(cfg->nvram_protection);
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
  EXPECT_EQ(InstanceConfig::parse("shenanigans = 1\n").error(),
            Err::BadParam);
  EXPECT_EQ(InstanceConfig::parse("rollback.mechanism = hardware\n").error(),
            Err::BadParam);
  EXPECT_EQ(InstanceConfig::parse("nvram.protection = yes\n").error(),
            Err::BadParam);
  EXPECT_EQ(InstanceConfig::parse("clock.tick_rate_hz = 0\n").error(),
            Err::BadParam);
  EXPECT_EQ(InstanceConfig::parse("clock.tick_rate_hz = 1e3\n").error(),
            Err::BadParam);
  EXPECT_EQ(InstanceConfig::parse("stray line\n").error(), Err::BadParam);
}

TEST(Provision, CreatesTheFullStack) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Counter));

  fs::path dir = rig.ws.instance_dir("alice");
  for (const char* file :
       {Workspace::kNvramFile, Workspace::kVmFile, Workspace::kEnclaveFile,
        Workspace::kSignerFile, Workspace::kBindingFile}) {
    EXPECT_TRUE(fs::exists(dir / file)) << file;
  }
  auto cfg = InstanceConfig::parse(
      to_string(read_file(rig.ws.conf_path("alice")).take()));
  ASSERT_TRUE(cfg.ok());
  EXPECT_EQ(cfg->rollback, RollbackMode::Counter);

  CloudRegistry registry(rig.ws.registry_path());
  auto entry = registry.find("alice");
  ASSERT_TRUE(entry.has_value());
  EXPECT_EQ(entry->vm_digest,
            sha256(read_file(dir / Workspace::kVmFile).take()));
}

TEST(Boot, HonestBootCountsStartups) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  {
    Instance inst = rig.boot("alice");
    EXPECT_EQ(inst.state().startup_counter, 1u);
  }
  Instance again = rig.boot("alice");
  EXPECT_EQ(again.state().startup_counter, 2u);
}

TEST(Boot, WriteThroughKeepsDiskEqualToMemory) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  Instance inst = rig.boot("alice");

  Digest d{};
  d.fill(0x7e);
  run(inst, client::pcr_extend(3, d));
  run(inst, client::nv_write(0x10, to_bytes(std::string("payload"))));

  auto image = read_nvram_file(
      rig.ws.instance_dir("alice") / Workspace::kNvramFile, true,
      inst.identity(), rig.platform.secret());
  ASSERT_TRUE(image.ok());
  EXPECT_EQ(image->tpm_state, serialize_state(inst.state()));
}

TEST(Boot, SwappedVmImageRefused) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  must_write(rig.ws.instance_dir("alice") / Workspace::kVmFile,
             synthetic_vm_image("mallory", 999));
  auto inst = Instance::boot(rig.platform, rig.ws, "alice");
  EXPECT_EQ(inst.error(), Err::BindingMismatch);
}

TEST(Boot, CrossUserNvramRefused) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  rig.provision("mallory", 666, config_for(RollbackMode::Software));
  fs::copy_file(rig.ws.instance_dir("alice") / Workspace::kNvramFile,
                rig.ws.instance_dir("mallory") / Workspace::kNvramFile,
                fs::copy_options::overwrite_existing);
  auto inst = Instance::boot(rig.platform, rig.ws, "mallory");
  EXPECT_EQ(inst.error(), Err::PolicyMismatch);
}

TEST(Boot, ConsistentForeignStackRefusedByRegistry) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  rig.provision("mallory", 666, config_for(RollbackMode::Software));
  // The whole victim set is internally consistent; only the registry knows
  // which VM this tenant is supposed to run.
  for (const char* file :
       {Workspace::kNvramFile, Workspace::kVmFile, Workspace::kEnclaveFile,
        Workspace::kSignerFile, Workspace::kBindingFile}) {
    fs::copy_file(rig.ws.instance_dir("alice") / file,
                  rig.ws.instance_dir("mallory") / file,
                  fs::copy_options::overwrite_existing);
  }
  auto inst = Instance::boot(rig.platform, rig.ws, "mallory");
  EXPECT_EQ(inst.error(), Err::BindingMismatch);
}

TEST(Boot, ProtectionOffSkipsChecksAndStoresPlaintext) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Off, false));
  must_write(rig.ws.instance_dir("alice") / Workspace::kVmFile,
             synthetic_vm_image("mallory", 999));
  Instance inst = rig.boot("alice");

  run(inst, client::nv_write(0x10, to_bytes(std::string("in the clear"))));
  Bytes raw = read_file(rig.ws.instance_dir("alice") / Workspace::kNvramFile)
                  .take();
  ASSERT_TRUE(NvramImage::parse(raw).ok());
}

TEST(Rollback, BootSyncsFailedTriesFromLedger) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  uint32_t handle = 0;
  {
    Instance inst = rig.boot("alice");
    handle = create_guarded_key(inst, "correct horse");
    EXPECT_EQ(guess(inst, handle, "wrong1"), Err::Auth);
    EXPECT_EQ(guess(inst, handle, "wrong2"), Err::Auth);
    ASSERT_TRUE(rig.ws.snapshot("alice").ok());
    EXPECT_EQ(guess(inst, handle, "wrong3"), Err::Auth);
  }
  ASSERT_TRUE(rig.ws.restore("alice").ok());
  Instance inst = rig.boot("alice");
  // The snapshot held 2 failures; the ledger held 3 and wins.
  EXPECT_EQ(inst.state().lockout.failed_tries, 3u);
  EXPECT_EQ(guess(inst, handle, "wrong4"), Err::LockedOut);
}

TEST(Rollback, DefenseOffRestoreForgetsFailures) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Off));
  uint32_t handle = 0;
  {
    Instance inst = rig.boot("alice");
    handle = create_guarded_key(inst, "correct horse");
    EXPECT_EQ(guess(inst, handle, "wrong1"), Err::Auth);
    EXPECT_EQ(guess(inst, handle, "wrong2"), Err::Auth);
    ASSERT_TRUE(rig.ws.snapshot("alice").ok());
    EXPECT_EQ(guess(inst, handle, "wrong3"), Err::Auth);
  }
  ASSERT_TRUE(rig.ws.restore("alice").ok());
  Instance inst = rig.boot("alice");
  EXPECT_EQ(inst.state().lockout.failed_tries, 2u);
  EXPECT_EQ(guess(inst, handle, "wrong4"), Err::Auth);
}

TEST(Rollback, CounterRecoverySwapsUuidAndPersists) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Counter));
  Instance inst = rig.boot("alice");
  uint32_t handle = create_guarded_key(inst, "correct horse");
  for (const char* pw : {"a", "b", "c"}) {
    EXPECT_EQ(guess(inst, handle, pw), Err::Auth);
  }
  Uuid locked_uuid = inst.guard()->counter_uuid();
  EXPECT_EQ(guess(inst, handle, "d"), Err::LockedOut);

  inst.advance(inst.state().lockout.recovery_interval_ms + 1);
  EXPECT_EQ(guess(inst, handle, "correct horse"), Err::None);
  EXPECT_NE(inst.guard()->counter_uuid(), locked_uuid);

  // The swapped uuid reached the NVRAM file; a fresh boot adopts it.
  Instance again = rig.boot("alice");
  EXPECT_EQ(again.guard()->counter_uuid(), inst.guard()->counter_uuid());
  EXPECT_EQ(again.state().lockout.failed_tries, 0u);
}

TEST(Rollback, SnapshotSpanningCounterRecoveryRefusesBoot) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Counter));
  {
    Instance inst = rig.boot("alice");
    uint32_t handle = create_guarded_key(inst, "correct horse");
    ASSERT_TRUE(rig.ws.snapshot("alice").ok());
    for (const char* pw : {"a", "b", "c"}) {
      EXPECT_EQ(guess(inst, handle, pw), Err::Auth);
    }
    inst.advance(inst.state().lockout.recovery_interval_ms + 1);
    EXPECT_EQ(guess(inst, handle, "correct horse"), Err::None);
  }
  // The snapshot still references the destroyed counter.
  ASSERT_TRUE(rig.ws.restore("alice").ok());
  auto inst = Instance::boot(rig.platform, rig.ws, "alice");
  EXPECT_EQ(inst.error(), Err::UnknownUuid);
}

TEST(Clock, HostSkewCannotFastForwardLockout) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Counter));
  Instance inst = rig.boot("alice");
  uint32_t handle = create_guarded_key(inst, "correct horse");
  for (const char* pw : {"a", "b", "c"}) {
    EXPECT_EQ(guess(inst, handle, pw), Err::Auth);
  }
  rig.platform.skew_host_ms(
      static_cast<int64_t>(inst.state().lockout.recovery_interval_ms) + 5000);
  EXPECT_EQ(guess(inst, handle, "correct horse"), Err::LockedOut);
}

TEST(Clock, WithoutTrustedClockHostSkewUnlocks) {
  Rig rig;
  InstanceConfig cfg = config_for(RollbackMode::Counter);
  cfg.trusted_clock = false;
  rig.provision("alice", 101, cfg);
  Instance inst = rig.boot("alice");
  uint32_t handle = create_guarded_key(inst, "correct horse");
  for (const char* pw : {"a", "b", "c"}) {
    EXPECT_EQ(guess(inst, handle, pw), Err::Auth);
  }
  EXPECT_EQ(guess(inst, handle, "correct horse"), Err::LockedOut);
  rig.platform.skew_host_ms(
      static_cast<int64_t>(inst.state().lockout.recovery_interval_ms) + 5000);
  EXPECT_EQ(guess(inst, handle, "correct horse"), Err::None);
}

TEST(Workspace, SnapshotAndRestoreStayInsideTheRollbackSpace) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  Instance inst = rig.boot("alice");
  uint32_t handle = create_guarded_key(inst, "correct horse");
  ASSERT_TRUE(rig.ws.snapshot("alice").ok());
  EXPECT_EQ(guess(inst, handle, "wrong"), Err::Auth);

  Bytes ledger_before = read_file(rig.ws.ledger_path("alice")).take();
  Bytes nvram_before =
      read_file(rig.ws.instance_dir("alice") / Workspace::kNvramFile).take();
  ASSERT_TRUE(rig.ws.restore("alice").ok());

  Bytes nvram_after =
      read_file(rig.ws.instance_dir("alice") / Workspace::kNvramFile).take();
  EXPECT_NE(nvram_after, nvram_before);
  EXPECT_EQ(read_file(rig.ws.ledger_path("alice")).take(), ledger_before);
}

TEST(Workspace, RestoreWithoutSnapshotFails) {
  Rig rig;
  rig.provision("alice", 101, config_for(RollbackMode::Software));
  EXPECT_EQ(rig.ws.restore("alice").error(), Err::Io);
}

TEST(Workspace, RelocatedRootKeepsWorkingExceptCounters) {
  TempDir tmp;
  fs::path old_root = tmp.path() / "ws";
  {
    Workspace ws(old_root);
    Platform platform(ws.platform_dir(), 7);
    ASSERT_TRUE(provision_instance(platform, ws, "soft", 101,
                                   config_for(RollbackMode::Software))
                    .ok());
    ASSERT_TRUE(provision_instance(platform, ws, "hard", 102,
                                   config_for(RollbackMode::Counter))
                    .ok());
  }

  fs::path new_root = tmp.path() / "moved";
  fs::rename(old_root, new_root);
  Workspace moved(new_root);
  // Same init seed reproduces the platform secret; the counters are gone.
  Platform fresh(moved.platform_dir(), 7);

  EXPECT_TRUE(Instance::boot(fresh, moved, "soft").ok());
  EXPECT_EQ(Instance::boot(fresh, moved, "hard").error(), Err::UnknownUuid);
}

}  // namespace
}  // namespace svtpm
