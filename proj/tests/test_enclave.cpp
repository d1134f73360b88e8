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

#include "svtpm/enclave.hpp"

#include <gtest/gtest.h>

#include "svtpm/platform.hpp"
#include "temp_dir.hpp"

namespace svtpm {
namespace {

Bytes secret32(uint8_t fill) { return Bytes(32, fill); }

// --- measurement -----------------------------------------------------------

TEST(Measure, PureFunctionOfInputs) {
  Bytes blob = to_bytes(std::string("example enclave code blob"));
  Bytes signer = to_bytes(std::string("signer public key bytes"));
  EnclaveIdentity a = measure(blob, signer);
  EXPECT_EQ(a, measure(blob, signer));
  // reference digests computed with an external SHA-256 tool
  EXPECT_EQ(hex_encode(view(a.mrenclave)),
            "adb85f5c92f6605d5ec9e70bed9d555a18fb8381358eec8214f190676fc4c019");
  EXPECT_EQ(hex_encode(view(a.mrsigner)),
            "fae3ab67ce510187d8134f3ec69f5ff800bb81fd75fadc7944cfe8d357788891");

  Bytes blob2 = blob;
  blob2[0] ^= 1;
  EnclaveIdentity b = measure(blob2, signer);
  EXPECT_NE(b.mrenclave, a.mrenclave);
  EXPECT_EQ(b.mrsigner, a.mrsigner);
}

// --- sealing ---------------------------------------------------------------

EnclaveIdentity ident(const std::string& blob, const std::string& signer) {
  return measure(to_bytes(blob), to_bytes(signer));
}

TEST(Seal, RoundtripAndPolicyRegisters) {
  Drbg rng = Drbg::from_seed_u64(1);
  Bytes secret = secret32(7);
  EnclaveIdentity owner = ident("code-a", "signer-a");
  Bytes msg = to_bytes(std::string("nvram contents"));

  SealedBlob blob = enclave_seal(owner, SealPolicy::BySigner, secret, msg,
                                 rng);
  EXPECT_EQ(blob.key_id, owner.mrsigner);
  EXPECT_EQ(enclave_unseal(owner, secret, blob).take(), msg);

  // same signer, different code: BySigner still opens
  EnclaveIdentity sibling = ident("code-b", "signer-a");
  EXPECT_EQ(enclave_unseal(sibling, secret, blob).take(), msg);

  // different signer: refused before any decryption is attempted
  EnclaveIdentity stranger = ident("code-a", "signer-b");
  EXPECT_EQ(enclave_unseal(stranger, secret, blob).error(),
            Err::PolicyMismatch);

  // ByEnclave flips the sensitivity
  SealedBlob by_code = enclave_seal(owner, SealPolicy::ByEnclave, secret,
                                    msg, rng);
  EXPECT_EQ(by_code.key_id, owner.mrenclave);
  EXPECT_EQ(enclave_unseal(sibling, secret, by_code).error(),
            Err::PolicyMismatch);
}

TEST(Seal, EveryFieldIsAuthenticated) {
  Drbg rng = Drbg::from_seed_u64(2);
  Bytes secret = secret32(9);
  EnclaveIdentity owner = ident("code", "signer");
  SealedBlob blob = enclave_seal(owner, SealPolicy::BySigner, secret,
                                 to_bytes(std::string("payload")), rng);

  SealedBlob bad = blob;
  bad.ciphertext[0] ^= 1;
  EXPECT_EQ(enclave_unseal(owner, secret, bad).error(), Err::Corrupt);

  bad = blob;
  bad.tag[5] ^= 1;
  EXPECT_EQ(enclave_unseal(owner, secret, bad).error(), Err::Corrupt);

  bad = blob;
  bad.nonce[0] ^= 1;
  EXPECT_EQ(enclave_unseal(owner, secret, bad).error(), Err::Corrupt);

  bad = blob;
  bad.version ^= 1;
  EXPECT_EQ(enclave_unseal(owner, secret, bad).error(), Err::Corrupt);

  // flipping the key_id is caught by the policy check instead
  bad = blob;
  bad.key_id[0] ^= 1;
  EXPECT_EQ(enclave_unseal(owner, secret, bad).error(), Err::PolicyMismatch);
}

TEST(Seal, BlobSerializationRoundtrip) {
  Drbg rng = Drbg::from_seed_u64(3);
  SealedBlob blob = enclave_seal(ident("c", "s"), SealPolicy::ByEnclave,
                                 secret32(1), to_bytes(std::string("x")),
                                 rng);
  Bytes wire = blob.serialize();
  EXPECT_EQ(SealedBlob::parse(wire).take(), blob);
  Bytes truncated(wire.begin(), wire.end() - 1);
  EXPECT_FALSE(SealedBlob::parse(truncated).ok());
  Bytes trailing = wire;
  trailing.push_back(0);
  EXPECT_FALSE(SealedBlob::parse(trailing).ok());
}

// Exhaustive key separation across identities with distinct policy
// registers: nobody opens anybody else's blob, under either policy.
TEST(Seal, KeySeparationAcrossIdentities) {
  Drbg rng = Drbg::from_seed_u64(4);
  Bytes secret = secret32(3);
  std::vector<EnclaveIdentity> ids = {
      ident("code-1", "signer-1"), ident("code-2", "signer-2"),
      ident("code-3", "signer-3"), ident("code-4", "signer-4"),
      ident("code-5", "signer-5")};
  for (SealPolicy policy : {SealPolicy::BySigner, SealPolicy::ByEnclave}) {
    std::vector<SealedBlob> blobs;
    for (size_t i = 0; i < ids.size(); ++i)
      blobs.push_back(enclave_seal(ids[i], policy, secret,
                                   to_bytes("secret " + std::to_string(i)),
                                   rng));
    for (size_t i = 0; i < ids.size(); ++i) {
      for (size_t j = 0; j < ids.size(); ++j) {
        auto r = enclave_unseal(ids[i], secret, blobs[j]);
        if (i == j) {
          EXPECT_EQ(r.take(), to_bytes("secret " + std::to_string(j)));
        } else {
          EXPECT_EQ(r.error(), Err::PolicyMismatch);
        }
      }
    }
  }
  // even with a bypassed policy check, the derived keys differ: forcing the
  // victim's key_id onto an attacker blob must still fail the AEAD
  SealedBlob forged = enclave_seal(ids[1], SealPolicy::BySigner, secret,
                                   to_bytes(std::string("attacker data")),
                                   rng);
  forged.key_id = ids[0].mrsigner;
  EXPECT_EQ(enclave_unseal(ids[0], secret, forged).error(), Err::Corrupt);
}

// --- quotes ----------------------------------------------------------------

TEST(Quote, SignsIdentityAndUserData) {
  TempDir tmp;
  Platform platform(tmp.path(), 42);
  RsaKey group = platform.group_key();
  auto group_pub = RsaKey::from_public_der(platform.group_public_der()).take();

  EnclaveIdentity id = ident("code", "signer");
  std::array<uint8_t, 64> user_data{};
  user_data[0] = 0xaa;
  Quote q = make_quote(id, user_data, group);
  EXPECT_TRUE(verify_quote(q, group_pub));

  Quote bad = q;
  bad.identity.mrenclave[0] ^= 1;
  EXPECT_FALSE(verify_quote(bad, group_pub));
  bad = q;
  bad.user_data[63] ^= 1;
  EXPECT_FALSE(verify_quote(bad, group_pub));

  EXPECT_EQ(Quote::parse(q.serialize()).take(), q);
}

// --- platform services -----------------------------------------------------

TEST(Platform, SecretPersistsAcrossInstances) {
  TempDir tmp;
  Platform a(tmp.path(), 7);
  Platform b(tmp.path(), 999);  // seed ignored: already initialized
  EXPECT_EQ(a.secret(), b.secret());

  TempDir other;
  Platform c(other.path(), 8);
  EXPECT_NE(to_bytes(ByteView(a.secret())), to_bytes(ByteView(c.secret())));
}

TEST(Platform, CounterLifecycle) {
  TempDir tmp;
  Platform platform(tmp.path(), 7);
  EnclaveIdentity owner = ident("code", "signer");

  Uuid uuid = platform.counter_create(owner, CounterPolicy::SameSigner)
                  .take();
  EXPECT_EQ(platform.counter_read(owner, uuid).take(), 0u);
  EXPECT_EQ(platform.counter_increment(owner, uuid).take(), 1u);
  EXPECT_EQ(platform.counter_read(owner, uuid).take(), 1u);

  // same signer, different code blob: SameSigner policy admits it
  EnclaveIdentity sibling = ident("other code", "signer");
  EXPECT_EQ(platform.counter_read(sibling, uuid).take(), 1u);
  // different signer: refused
  EnclaveIdentity stranger = ident("code", "other signer");
  EXPECT_EQ(platform.counter_read(stranger, uuid).error(), Err::Access);
  EXPECT_EQ(platform.counter_increment(stranger, uuid).error(), Err::Access);
  EXPECT_EQ(platform.counter_destroy(stranger, uuid).error(), Err::Access);

  // SameMeasurement keys access off mrenclave instead
  Uuid by_code = platform
                     .counter_create(owner, CounterPolicy::SameMeasurement)
                     .take();
  EXPECT_EQ(platform.counter_read(sibling, by_code).error(), Err::Access);
  EXPECT_EQ(platform.counter_read(stranger, by_code).take(), 0u);
  // Both requires the full identity
  Uuid strict = platform.counter_create(owner, CounterPolicy::Both).take();
  EXPECT_EQ(platform.counter_read(sibling, strict).error(), Err::Access);
  EXPECT_EQ(platform.counter_read(stranger, strict).error(), Err::Access);
  EXPECT_EQ(platform.counter_read(owner, strict).take(), 0u);

  // destroy invalidates the uuid for good
  ASSERT_TRUE(platform.counter_destroy(owner, uuid).ok());
  EXPECT_EQ(platform.counter_read(owner, uuid).error(), Err::UnknownUuid);
  EXPECT_EQ(platform.counter_increment(owner, uuid).error(),
            Err::UnknownUuid);
  EXPECT_EQ(platform.counter_destroy(owner, uuid).error(), Err::UnknownUuid);
}

TEST(Platform, CounterBudgetIsConserved) {
  TempDir tmp;
  Platform platform(tmp.path(), 7);
  EnclaveIdentity owner = ident("code", "signer");

  std::vector<Uuid> uuids;
  for (size_t i = 0; i < Platform::kMaxCounters; ++i)
    uuids.push_back(
        platform.counter_create(owner, CounterPolicy::SameSigner).take());
  EXPECT_EQ(platform.live_counters(), Platform::kMaxCounters);
  EXPECT_EQ(platform.counter_create(owner, CounterPolicy::SameSigner)
                .error(),
            Err::NoCounters);

  // destroy + create nets out to a full budget again
  ASSERT_TRUE(platform.counter_destroy(owner, uuids[100]).ok());
  EXPECT_EQ(platform.live_counters(), Platform::kMaxCounters - 1);
  Uuid fresh =
      platform.counter_create(owner, CounterPolicy::SameSigner).take();
  EXPECT_NE(fresh, uuids[100]);
  EXPECT_EQ(platform.live_counters(), Platform::kMaxCounters);
}

TEST(Platform, CounterSurvivesInstanceReopen) {
  TempDir tmp;
  EnclaveIdentity owner = ident("code", "signer");
  Uuid uuid;
  {
    Platform platform(tmp.path(), 7);
    uuid = platform.counter_create(owner, CounterPolicy::SameSigner).take();
    ASSERT_TRUE(platform.counter_increment(owner, uuid).ok());
    ASSERT_TRUE(platform.counter_increment(owner, uuid).ok());
  }
  Platform reopened(tmp.path());
  EXPECT_EQ(reopened.counter_read(owner, uuid).take(), 2u);
}

TEST(Platform, ClockGranularityAndEpochs) {
  TempDir tmp;
  Platform platform(tmp.path(), 7);

  PlatformTime t0 = platform.platform_time();
  EXPECT_EQ(t0.seconds, 0u);
  PlatformTime t0b = platform.platform_time();  // no virtual advance
  EXPECT_EQ(t0, t0b);

  platform.advance_ms(1500);
  PlatformTime t1 = platform.platform_time();
  EXPECT_EQ(t1.seconds, 1u);  // whole-second granularity
  EXPECT_EQ(t1.epoch_nonce, t0.epoch_nonce);

  platform.advance_ms(500);
  EXPECT_EQ(platform.platform_time().seconds, 2u);

  platform.platform_reset();
  PlatformTime t2 = platform.platform_time();
  EXPECT_NE(t2.epoch_nonce, t1.epoch_nonce);
  EXPECT_EQ(t2.seconds, 0u);  // seconds restart with the epoch
}

TEST(Platform, HostClockSkewsIndependently) {
  TempDir tmp;
  Platform platform(tmp.path(), 7);
  platform.advance_ms(5000);
  EXPECT_EQ(platform.host_now_ms(), 5000u);

  platform.skew_host_ms(100000);
  EXPECT_EQ(platform.host_now_ms(), 105000u);
  // the trusted clock does not move with the skew
  EXPECT_EQ(platform.platform_time().seconds, 5u);

  platform.skew_host_ms(-200000);  // clamped at zero, never negative
  EXPECT_EQ(platform.host_now_ms(), 0u);
}

}  // namespace
}  // namespace svtpm
