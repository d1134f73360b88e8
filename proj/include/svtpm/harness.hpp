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
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svtpm/attest.hpp"
#include "svtpm/client.hpp"
#include "svtpm/instance.hpp"

namespace svtpm {

// Adversary harness: replays scripted host-level attacks against a live
// vTPM stack and judges success from externally observable evidence only.
// The attacker is the host of the four-capability threat model: it may read
// and replace files, take and restore snapshots of the instance directory,
// interrupt the ledger sync, skew its own clock, and talk to the command
// channel. It never sees enclave memory.
//
// Judgements run on the platform's true virtual timeline, not on whatever
// clock the defense under test happens to read, so an attacker cannot
// launder a guess rate by skewing the very clock it controls.

// NV index the harness seeds with a per-tenant secret. Recovering another
// tenant's value through the command channel is the plaintext-recovery
// signal of the replacement scenarios.
inline constexpr uint32_t kMarkerIndex = 0x42;

// ---------------------------------------------------------------------------
// Defense presets

enum class DefensePreset : uint8_t {
  Off = 0,       // no sealing, no rollback guard, host clock
  Software = 1,  // sealing + software ledger + trusted clock
  Counter = 2,   // sealing + hardware counter + trusted clock
};

inline const char* defense_name(DefensePreset d) {
  switch (d) {
    case DefensePreset::Off: return "off";
    case DefensePreset::Software: return "software";
    case DefensePreset::Counter: return "counter";
  }
  return "off";
}

inline Result<DefensePreset> defense_from_name(std::string_view name) {
  if (name == "off") return DefensePreset::Off;
  if (name == "software") return DefensePreset::Software;
  if (name == "counter" || name == "full") return DefensePreset::Counter;
  return Err::BadParam;
}

inline InstanceConfig config_for_defense(DefensePreset d) {
  InstanceConfig cfg;
  switch (d) {
    case DefensePreset::Off:
      cfg.nvram_protection = false;
      cfg.rollback = RollbackMode::Off;
      cfg.trusted_clock = false;
      break;
    case DefensePreset::Software:
      cfg.nvram_protection = true;
      cfg.rollback = RollbackMode::Software;
      cfg.trusted_clock = true;
      break;
    case DefensePreset::Counter:
      cfg.nvram_protection = true;
      cfg.rollback = RollbackMode::Counter;
      cfg.trusted_clock = true;
      break;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Scripts

struct Event {
  enum class Kind : uint8_t {
    Provision,         // create tenant a: files, guarded key, NV marker
    Boot,              // launch instance a, replacing any live instance
    Command,           // send frame to the live instance
    Guess,             // try password a against the live tenant's guarded key
    Snapshot,          // snapshot instance a's directory
    Restore,           // restore instance a's directory from its snapshot
    FileSwap,          // exchange file a with file b ("<instance>/<token>")
    InterruptSync,     // arm the ledger-sync interruption on the live guard
    AdvanceTime,       // advance the virtual timeline by ms
    AdvanceHostClock,  // skew the host clock forward by ms (virtual time unchanged)
    Attest,            // run the certificate flow, variant a
  };

  Kind kind = Kind::Boot;
  std::string a;
  std::string b;
  Bytes frame;
  uint64_t ms = 0;

  static Event provision(std::string name) {
    return Event{Kind::Provision, std::move(name), {}, {}, 0};
  }
  static Event boot(std::string name) {
    return Event{Kind::Boot, std::move(name), {}, {}, 0};
  }
  static Event command(const Command& cmd) {
    return Event{Kind::Command, {}, {}, cmd.encode(), 0};
  }
  static Event guess(std::string candidate) {
    return Event{Kind::Guess, std::move(candidate), {}, {}, 0};
  }
  static Event snapshot(std::string name) {
    return Event{Kind::Snapshot, std::move(name), {}, {}, 0};
  }
  static Event restore(std::string name) {
    return Event{Kind::Restore, std::move(name), {}, {}, 0};
  }
  static Event file_swap(std::string path_a, std::string path_b) {
    return Event{Kind::FileSwap, std::move(path_a), std::move(path_b), {}, 0};
  }
  static Event interrupt_sync() {
    return Event{Kind::InterruptSync, {}, {}, {}, 0};
  }
  static Event advance_time(uint64_t ms) {
    return Event{Kind::AdvanceTime, {}, {}, {}, ms};
  }
  static Event advance_host_clock(uint64_t ms) {
    return Event{Kind::AdvanceHostClock, {}, {}, {}, ms};
  }
  static Event attest(std::string variant) {
    return Event{Kind::Attest, std::move(variant), {}, {}, 0};
  }
};

// ---------------------------------------------------------------------------
// Evidence

struct RunStats {
  // Lockout parameters observed on the target, filled at first boot.
  uint32_t max_tries = 3;
  uint64_t recovery_interval_ms = 10'000;

  // True-timeline timestamps of every guess the TPM actually evaluated
  // (accepted or counted against the lockout), in script order.
  std::vector<uint64_t> guess_times_ms;
  uint64_t guesses_attempted = 0;
  uint64_t guesses_blocked = 0;
  uint64_t accepted_logins = 0;

  uint64_t boots_attempted = 0;
  uint64_t boots_accepted = 0;
  // Boots accepted on an instance whose files were swapped earlier.
  uint64_t tainted_boots_accepted = 0;
  // Successful responses carrying another tenant's NV marker bytes.
  uint64_t plaintext_recoveries = 0;

  uint64_t certs_issued = 0;
  // Certificates issued to a tampered attestation flow.
  uint64_t rogue_certs = 0;

  std::vector<std::string> trace;

  // Most evaluated guesses inside any recovery_interval_ms window of the
  // true timeline. The rollback family of attacks succeeds exactly when
  // this exceeds max_tries.
  size_t max_guesses_in_interval() const {
    size_t best = 0;
    for (size_t lo = 0, hi = 0; hi < guess_times_ms.size(); ++hi) {
      while (guess_times_ms[hi] - guess_times_ms[lo] >= recovery_interval_ms)
        ++lo;
      best = std::max(best, hi - lo + 1);
    }
    return best;
  }

  bool operator==(const RunStats&) const = default;
};

struct CheckOutcome {
  std::string name;
  bool tripped = false;  // true: the attack goal this check watches was reached

  bool operator==(const CheckOutcome&) const = default;
};

struct Verdict {
  std::string scenario;
  DefensePreset defense = DefensePreset::Off;
  bool attack_succeeded = false;  // any check tripped
  std::vector<CheckOutcome> checks;
  RunStats stats;

  bool operator==(const Verdict&) const = default;
};

// A named attack goal evaluated over the collected evidence.
struct Check {
  std::string name;
  std::function<bool(const RunStats&)> tripped;
};

struct Scenario {
  std::string name;
  DefensePreset defense = DefensePreset::Off;
  std::vector<Event> events;
  std::vector<Check> success_checks;
};

// ---------------------------------------------------------------------------
// Tenant fixtures, deterministic in (seed, name)

inline Bytes tenant_marker(const std::string& name) {
  auto key = hkdf_key32({}, to_bytes(name),
                        to_bytes(std::string("svtpm/harness-marker/v1")));
  return Bytes(key.begin(), key.end());
}

inline std::string tenant_password(uint64_t seed, const std::string& name) {
  auto key = hkdf_key32({}, user_seed_bytes(seed),
                        to_bytes("svtpm/harness-password/v1/" + name));
  return hex_encode(ByteView(key.data(), 8));
}

inline uint64_t tenant_seed(uint64_t seed, const std::string& name) {
  auto key = hkdf_key32({}, user_seed_bytes(seed),
                        to_bytes("svtpm/harness-user/v1/" + name));
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | key[static_cast<size_t>(i)];
  return v;
}

// ---------------------------------------------------------------------------
// Interpreter

class ScenarioRunner {
 public:
  // run_root becomes the workspace; the platform lives in the sibling
  // directory outside the rollback space, as in a real deployment.
  ScenarioRunner(const fs::path& run_root, uint64_t seed)
      : ws_(run_root), seed_(seed), platform_(ws_.platform_dir(), seed) {}

  Result<Verdict> run(const Scenario& s) {
    defense_ = s.defense;
    for (const Event& e : s.events) {
      auto r = apply(e);
      if (!r.ok()) return r.error();
    }
    current_.reset();
    Verdict v;
    v.scenario = s.name;
    v.defense = s.defense;
    for (const Check& c : s.success_checks) {
      bool tripped = c.tripped && c.tripped(stats_);
      v.checks.push_back(CheckOutcome{c.name, tripped});
      v.attack_succeeded = v.attack_succeeded || tripped;
    }
    v.stats = stats_;
    return v;
  }

 private:
  Result<void> apply(const Event& e) {
    using K = Event::Kind;
    switch (e.kind) {
      case K::Provision: return do_provision(e.a);
      case K::Boot: return do_boot(e.a);
      case K::Command: return do_command(e.frame);
      case K::Guess: return do_guess(e.a);
      case K::Snapshot: return do_snapshot(e.a);
      case K::Restore: return do_restore(e.a);
      case K::FileSwap: return do_swap(e.a, e.b);
      case K::InterruptSync: return do_interrupt();
      case K::AdvanceTime: return do_advance(e.ms);
      case K::AdvanceHostClock: return do_skew(e.ms);
      case K::Attest: return do_attest(e.a);
    }
    return Err::BadScript;
  }

  Result<void> do_provision(const std::string& name) {
    if (name.empty() || name.find('/') != std::string::npos)
      return Err::BadScript;
    if (provisioned_.count(name)) return Err::BadScript;
    auto p = provision_instance(platform_, ws_, name, tenant_seed(seed_, name),
                                config_for_defense(defense_));
    if (!p.ok()) return p.error();
    provisioned_.insert(name);
    markers_[name] = tenant_marker(name);

    // One honest tenant session: create the password-guarded key and write
    // the recognisable secret into NV storage, then shut down.
    auto booted = Instance::boot(platform_, ws_, name);
    if (!booted.ok()) return booted.error();
    Instance& live = booted.value();
    std::string pw = tenant_password(seed_, name);
    Response created = decode(live.execute(
        client::create_primary(kRhOwner, KeyKind::AesSymmetric, 256,
                               to_bytes(std::string("guarded")), {},
                               to_bytes(pw))
            .encode()));
    if (!created.ok()) return created.error;
    auto key = client::parse_created(created);
    if (!key.ok()) return key.error();
    handles_[name] = key->handle;
    Response nv = decode(live.execute(
        client::nv_write(kMarkerIndex, markers_[name]).encode()));
    if (!nv.ok()) return nv.error;
    trace("provision " + name);
    return Result<void>();
  }

  Result<void> do_boot(const std::string& name) {
    if (!provisioned_.count(name)) return Err::BadScript;
    current_.reset();
    current_name_.clear();
    stats_.boots_attempted += 1;
    auto booted = Instance::boot(platform_, ws_, name);
    if (!booted.ok()) {
      trace("boot " + name + " refused " + err_name(booted.error()));
      return Result<void>();
    }
    current_.emplace(booted.take());
    current_name_ = name;
    stats_.boots_accepted += 1;
    if (tainted_.count(name)) stats_.tainted_boots_accepted += 1;
    stats_.max_tries = current_->state().lockout.max_tries;
    stats_.recovery_interval_ms = current_->state().lockout.recovery_interval_ms;
    trace("boot " + name + " ok startups=" +
          std::to_string(current_->state().startup_counter));
    return Result<void>();
  }

  Result<void> do_command(const Bytes& frame) {
    if (!current_) {
      trace("command skipped, no live instance");
      return Result<void>();
    }
    Response r = decode(current_->execute(frame));
    scan_for_markers(r);
    trace("command -> " + std::string(err_name(r.error)));
    return Result<void>();
  }

  Result<void> do_guess(const std::string& candidate) {
    if (!current_) {
      trace("guess skipped, no live instance");
      return Result<void>();
    }
    auto it = handles_.find(current_name_);
    if (it == handles_.end()) return Err::BadScript;
    stats_.guesses_attempted += 1;
    Response r = decode(current_->execute(
        client::encrypt(it->second, to_bytes(candidate),
                        to_bytes(std::string("probe")))
            .encode()));
    // None and Auth mean the TPM compared the candidate; everything else
    // (lockout, lost counter, refused state) blocked the evaluation.
    if (r.error == Err::None || r.error == Err::Auth) {
      stats_.guess_times_ms.push_back(platform_.virtual_now_ms());
      if (r.error == Err::None) stats_.accepted_logins += 1;
    } else {
      stats_.guesses_blocked += 1;
    }
    trace("guess -> " + std::string(err_name(r.error)));
    return Result<void>();
  }

  Result<void> do_snapshot(const std::string& name) {
    if (!provisioned_.count(name)) return Err::BadScript;
    auto r = ws_.snapshot(name);
    if (!r.ok()) return r.error();
    trace("snapshot " + name);
    return Result<void>();
  }

  Result<void> do_restore(const std::string& name) {
    if (!provisioned_.count(name)) return Err::BadScript;
    // Restoring under a live instance would be undone by its next
    // write-through, so the attacker powers it off first.
    if (current_name_ == name) {
      current_.reset();
      current_name_.clear();
    }
    auto r = ws_.restore(name);
    if (!r.ok()) return r.error();
    trace("restore " + name);
    return Result<void>();
  }

  Result<void> do_swap(const std::string& a, const std::string& b) {
    auto pa = swap_paths(a);
    if (!pa.ok()) return pa.error();
    auto pb = swap_paths(b);
    if (!pb.ok()) return pb.error();
    if (pa->size() != pb->size()) return Err::BadScript;
    // The attacker powers off whatever runs before touching its files.
    current_.reset();
    current_name_.clear();
    for (size_t i = 0; i < pa->size(); ++i) {
      auto r = swap_files((*pa)[i], (*pb)[i]);
      if (!r.ok()) return r.error();
    }
    tainted_.insert(a.substr(0, a.find('/')));
    tainted_.insert(b.substr(0, b.find('/')));
    trace("swap " + a + " <-> " + b);
    return Result<void>();
  }

  Result<void> do_interrupt() {
    if (!current_) {
      trace("interrupt skipped, no live instance");
      return Result<void>();
    }
    current_->interrupt_next_sync();
    trace("interrupt armed");
    return Result<void>();
  }

  Result<void> do_advance(uint64_t ms) {
    if (current_) {
      current_->advance(ms);
    } else {
      platform_.advance_ms(ms);
    }
    trace("advance " + std::to_string(ms) + "ms");
    return Result<void>();
  }

  Result<void> do_skew(uint64_t ms) {
    platform_.skew_host_ms(static_cast<int64_t>(ms));
    trace("host clock skewed +" + std::to_string(ms) + "ms");
    return Result<void>();
  }

  Result<void> do_attest(const std::string& variant) {
    if (variant != "honest" && variant != "patched" && variant != "replay" &&
        variant != "forged")
      return Err::BadScript;
    if (!current_) {
      trace("attest skipped, no live instance");
      return Result<void>();
    }
    // The EK whose certificate is requested comes from the live TPM.
    Response created = decode(current_->execute(
        client::create_primary(kRhEndorsement, KeyKind::RsaSigning, 2048,
                               to_bytes(std::string("attest-ek")), {}, {})
            .encode()));
    if (!created.ok()) {
      trace("attest " + variant + " ek refused " +
            std::string(err_name(created.error)));
      return Result<void>();
    }
    auto ek = client::parse_created(created);
    if (!ek.ok()) return ek.error();

    if (defense_ == DefensePreset::Off) {
      // The plain stack ships no verifier: a certificate request is granted
      // on sight, so every tampered variant walks through.
      stats_.certs_issued += 1;
      if (variant != "honest") stats_.rogue_certs += 1;
      trace("attest " + variant + " -> issued unverified");
      return Result<void>();
    }

    PrivacyCa& pca = ca();
    AttestationRequest req = pca.challenge(RequestedKey::Ek);
    EnclaveIdentity id = current_->identity();
    RsaKey signer = platform_.group_key();
    if (variant == "patched") {
      auto pub = read_file(ws_.instance_dir(current_name_) /
                           Workspace::kSignerFile);
      if (!pub.ok()) return pub.error();
      Bytes code = vtpm_code_blob();
      Bytes patch = to_bytes(std::string(" with one extra jump"));
      code.insert(code.end(), patch.begin(), patch.end());
      id = measure(code, *pub);
    } else if (variant == "forged") {
      signer = derive_rsa_key_cached(
          to_bytes(std::string("harness rogue platform key")), 2048);
    }
    Quote quote = quote_report(enclave_report(id, ek->public_part, req), signer);
    if (variant == "replay") {
      // Burn the challenge with an honest presentation, then replay it.
      auto first = pca.verify_and_issue(quote, ek->public_part, req,
                                        platform_.virtual_now_ms());
      if (first.ok()) stats_.certs_issued += 1;
    }
    auto cert = pca.verify_and_issue(quote, ek->public_part, req,
                                     platform_.virtual_now_ms());
    if (cert.ok()) {
      stats_.certs_issued += 1;
      if (variant != "honest") stats_.rogue_certs += 1;
      trace("attest " + variant + " -> issued");
    } else {
      trace("attest " + variant + " -> " +
            std::string(err_name(cert.error())));
    }
    return Result<void>();
  }

  // "<instance>/<token>" -> the files that token names inside the rollback
  // space. The enclave binary and its signer key ship as one signed bundle,
  // so the enclave token moves both.
  Result<std::vector<fs::path>> swap_paths(const std::string& spec) const {
    auto slash = spec.find('/');
    if (slash == std::string::npos) return Err::BadScript;
    std::string inst = spec.substr(0, slash);
    std::string token = spec.substr(slash + 1);
    if (!provisioned_.count(inst)) return Err::BadScript;
    fs::path dir = ws_.instance_dir(inst);
    std::vector<fs::path> out;
    if (token == "nvram") {
      out = {dir / Workspace::kNvramFile};
    } else if (token == "vm") {
      out = {dir / Workspace::kVmFile};
    } else if (token == "binding") {
      out = {dir / Workspace::kBindingFile};
    } else if (token == "enclave") {
      out = {dir / Workspace::kEnclaveFile, dir / Workspace::kSignerFile};
    } else {
      return Err::BadScript;
    }
    return out;
  }

  static Result<void> swap_files(const fs::path& a, const fs::path& b) {
    std::error_code ec;
    fs::path tmp = a;
    tmp += ".swap";
    fs::rename(a, tmp, ec);
    if (ec) return Err::Io;
    fs::rename(b, a, ec);
    if (ec) return Err::Io;
    fs::rename(tmp, b, ec);
    if (ec) return Err::Io;
    return Result<void>();
  }

  void scan_for_markers(const Response& r) {
    if (!r.ok() || r.payload.empty()) return;
    for (const auto& [name, marker] : markers_) {
      if (name == current_name_) continue;
      auto hit = std::search(r.payload.begin(), r.payload.end(),
                             marker.begin(), marker.end());
      if (hit != r.payload.end()) {
        stats_.plaintext_recoveries += 1;
        trace("plaintext of " + name + " recovered through " + current_name_);
      }
    }
  }

  static Response decode(const Bytes& wire) {
    auto r = Response::decode(wire);
    if (!r.ok()) return Response::failure(r.error());
    return *r;
  }

  PrivacyCa& ca() {
    if (!pca_) {
      PcaPolicy policy;
      policy.mrenclave_allowlist = {measure(vtpm_code_blob(), {}).mrenclave};
      pca_.emplace(seed_ + 0x5ca, std::move(policy),
                   platform_.group_public_der());
    }
    return *pca_;
  }

  void trace(std::string line) { stats_.trace.push_back(std::move(line)); }

  Workspace ws_;
  uint64_t seed_;
  Platform platform_;
  DefensePreset defense_ = DefensePreset::Off;
  RunStats stats_;
  std::optional<Instance> current_;
  std::string current_name_;
  std::optional<PrivacyCa> pca_;
  std::map<std::string, uint32_t> handles_;
  std::map<std::string, Bytes> markers_;
  std::set<std::string> provisioned_;
  std::set<std::string> tainted_;
};

// Runs one scenario in a fresh directory tree under base_dir. The verdict
// is a pure function of (scenario, seed): any leftover state from an
// earlier run with the same name is removed first.
inline Result<Verdict> run_scenario(const fs::path& base_dir,
                                    const Scenario& s, uint64_t seed) {
  fs::path root =
      base_dir / (s.name + "-" + std::string(defense_name(s.defense)));
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::remove_all(fs::path(root.string() + ".platform"), ec);
  ScenarioRunner runner(root, seed);
  return runner.run(s);
}

// ---------------------------------------------------------------------------
// Builtin scenarios

inline Check window_check() {
  return Check{"guess-window-exceeds-max-tries", [](const RunStats& st) {
                 return st.max_guesses_in_interval() > st.max_tries;
               }};
}

// A vTPM directory replaced with another tenant's files, first the NVRAM
// image alone, then the complete set a consistent attacker would stage.
inline Scenario nvram_replacement_scenario(DefensePreset d) {
  Scenario s;
  s.name = "nvram-replacement";
  s.defense = d;
  auto& ev = s.events;
  ev.push_back(Event::provision("victim"));
  ev.push_back(Event::provision("mallory"));
  ev.push_back(Event::file_swap("victim/nvram", "mallory/nvram"));
  ev.push_back(Event::boot("mallory"));
  ev.push_back(Event::command(client::nv_read(kMarkerIndex)));
  ev.push_back(Event::file_swap("victim/nvram", "mallory/nvram"));
  ev.push_back(Event::file_swap("victim/nvram", "mallory/nvram"));
  ev.push_back(Event::file_swap("victim/vm", "mallory/vm"));
  ev.push_back(Event::file_swap("victim/binding", "mallory/binding"));
  ev.push_back(Event::file_swap("victim/enclave", "mallory/enclave"));
  ev.push_back(Event::boot("mallory"));
  ev.push_back(Event::command(client::nv_read(kMarkerIndex)));
  s.success_checks = {
      Check{"foreign-plaintext-recovered",
            [](const RunStats& st) { return st.plaintext_recoveries > 0; }},
      Check{"replaced-stack-booted",
            [](const RunStats& st) { return st.tainted_boots_accepted > 0; }},
  };
  return s;
}

// Snapshot at two failed tries, then restore-and-guess in a loop.
inline Scenario rollback_dictionary_scenario(DefensePreset d,
                                             size_t cycles = 50) {
  Scenario s;
  s.name = "rollback-dictionary";
  s.defense = d;
  auto& ev = s.events;
  ev.push_back(Event::provision("alice"));
  ev.push_back(Event::boot("alice"));
  ev.push_back(Event::guess("wrong-0"));
  ev.push_back(Event::guess("wrong-1"));
  ev.push_back(Event::snapshot("alice"));
  for (size_t i = 0; i < cycles; ++i) {
    ev.push_back(Event::restore("alice"));
    ev.push_back(Event::boot("alice"));
    ev.push_back(Event::guess("wrong-" + std::to_string(i + 2)));
  }
  s.success_checks = {window_check()};
  return s;
}

// Lock out, then skew the host clock past the recovery interval and keep
// guessing. Virtual time never moves, so any further evaluated guess lands
// in the same true-time window.
inline Scenario clock_skip_scenario(DefensePreset d) {
  Scenario s;
  s.name = "clock-skip";
  s.defense = d;
  uint64_t skew = LockoutRecord{}.recovery_interval_ms + 5'000;
  auto& ev = s.events;
  ev.push_back(Event::provision("alice"));
  ev.push_back(Event::boot("alice"));
  ev.push_back(Event::guess("wrong-0"));
  ev.push_back(Event::guess("wrong-1"));
  ev.push_back(Event::guess("wrong-2"));
  ev.push_back(Event::advance_host_clock(skew));
  ev.push_back(Event::guess("wrong-3"));
  ev.push_back(Event::guess("wrong-4"));
  s.success_checks = {window_check()};
  return s;
}

// Tampered attestation flows against the certificate authority: patched
// enclave code, a replayed quote, and a quote signed outside the platform.
inline Scenario rogue_attestation_scenario(DefensePreset d) {
  Scenario s;
  s.name = "rogue-attestation";
  s.defense = d;
  auto& ev = s.events;
  ev.push_back(Event::provision("alice"));
  ev.push_back(Event::boot("alice"));
  ev.push_back(Event::attest("honest"));
  ev.push_back(Event::attest("patched"));
  ev.push_back(Event::attest("replay"));
  ev.push_back(Event::attest("forged"));
  s.success_checks = {
      Check{"rogue-certificate-issued",
            [](const RunStats& st) { return st.rogue_certs > 0; }},
  };
  return s;
}

// The dictionary loop with the ledger sync interrupted right before each
// guess. Beats the software ledger (the skipped write loses the tries),
// not the hardware counter (its increment leaves no seam).
inline Scenario sync_interruption_scenario(DefensePreset d,
                                           size_t cycles = 10) {
  Scenario s;
  s.name = "sync-interruption";
  s.defense = d;
  auto& ev = s.events;
  ev.push_back(Event::provision("alice"));
  ev.push_back(Event::boot("alice"));
  ev.push_back(Event::guess("wrong-0"));
  ev.push_back(Event::guess("wrong-1"));
  ev.push_back(Event::snapshot("alice"));
  for (size_t i = 0; i < cycles; ++i) {
    ev.push_back(Event::interrupt_sync());
    ev.push_back(Event::guess("wrong-" + std::to_string(i + 2)));
    ev.push_back(Event::restore("alice"));
    ev.push_back(Event::boot("alice"));
  }
  s.success_checks = {window_check()};
  return s;
}

inline std::vector<Scenario> builtin_scenarios(DefensePreset d,
                                               size_t dictionary_cycles = 50,
                                               size_t interruption_cycles = 10) {
  return {nvram_replacement_scenario(d),
          rollback_dictionary_scenario(d, dictionary_cycles),
          clock_skip_scenario(d),
          rogue_attestation_scenario(d),
          sync_interruption_scenario(d, interruption_cycles)};
}

// The expected defense matrix: with everything off every builtin attack
// succeeds; the software ledger alone loses exactly the sync-interruption
// race; the full counter-backed pile defeats all of them.
inline bool scenario_expected_success(std::string_view scenario,
                                      DefensePreset d) {
  switch (d) {
    case DefensePreset::Off: return true;
    case DefensePreset::Software: return scenario == "sync-interruption";
    case DefensePreset::Counter: return false;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Reporting

inline std::string report(const std::vector<Verdict>& verdicts) {
  std::ostringstream out;
  for (const Verdict& v : verdicts) {
    out << "scenario=" << v.scenario
        << " defense=" << defense_name(v.defense)
        << " succeeded=" << (v.attack_succeeded ? 1 : 0)
        << " boots=" << v.stats.boots_accepted << "/" << v.stats.boots_attempted
        << " tainted_boots=" << v.stats.tainted_boots_accepted
        << " plaintext=" << v.stats.plaintext_recoveries
        << " guesses_evaluated=" << v.stats.guess_times_ms.size()
        << " guesses_blocked=" << v.stats.guesses_blocked
        << " window_max=" << v.stats.max_guesses_in_interval()
        << " certs=" << v.stats.certs_issued
        << " rogue_certs=" << v.stats.rogue_certs;
    for (const CheckOutcome& c : v.checks)
      out << " check:" << c.name << "=" << (c.tripped ? 1 : 0);
    out << "\n";
  }
  return out.str();
}

}  // namespace svtpm
