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

// Operator entry point: provisions tenants, launches instances, passes raw
// hex-encoded TPM commands, snapshots and restores the rollback space,
// drives the certificate flow, and runs the attack and bench harnesses.
//
// Exit codes, one per error class:
//   0  success
//   2  usage error, unknown name, malformed script
//   3  the TPM executed the command and answered with an error
//   4  launch refused (binding, policy, corrupt state)
//   5  state-continuity failure (lost counter, stale uuid, epoch change)
//   6  attestation rejected
//   7  filesystem error

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "svtpm/bench.hpp"
#include "svtpm/harness.hpp"

namespace svtpm {
namespace {

int usage(const std::string& msg = "") {
  if (!msg.empty()) std::cerr << "error: " << msg << "\n";
  std::cerr <<
      "usage: svtpm-cli [--root DIR] <command> [args]\n"
      "\n"
      "commands:\n"
      "  provision [NAME] [--defense off|software|counter]\n"
      "                       create a tenant stack (default name: default)\n"
      "  init [NAME]          first launch of the instance\n"
      "  cmd [NAME] HEX       send one hex-encoded TPM command frame\n"
      "  snapshot NAME        snapshot the instance directory\n"
      "  restore NAME         restore the instance directory from its snapshot\n"
      "  attest [NAME] [--variant honest|patched|replay|forged]\n"
      "                       run the certificate flow against the privacy CA\n"
      "  attack run NAME|all [--defense off|software|counter|full|all] [--seed N]\n"
      "                       replay builtin attack scenarios and report\n"
      "  bench [--commands LIST] [--iterations N] [--out FILE]\n"
      "                       latency benchmarks over both NVRAM backends\n"
      "\n"
      "  --root DIR           workspace directory (default ./svtpm-root)\n"
      "  SVTPM_SIM_SEED       deterministic seed, default 1\n";
  return 2;
}

int exit_code_for(Err e) {
  if (e == Err::None) return 0;
  switch (e) {
    case Err::PolicyMismatch:
    case Err::Corrupt:
    case Err::Access:
    case Err::BindingMismatch:
      return 4;
    case Err::NoCounters:
    case Err::UnknownUuid:
    case Err::EpochChanged:
      return 5;
    case Err::Io:
      return 7;
    case Err::BadScript:
    case Err::UnknownCommand:
      return 2;
    default:
      break;
  }
  uint32_t v = static_cast<uint32_t>(e);
  if (v >= 0x501 && v <= 0x5ff) return 6;
  return 3;
}

int fail(Err e, const std::string& what) {
  std::cerr << what << ": " << err_name(e) << "\n";
  return exit_code_for(e);
}

struct Ctx {
  fs::path root = "./svtpm-root";
  uint64_t seed = 1;
};

std::optional<uint64_t> parse_u64_arg(const std::string& s) {
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    uint64_t next = v * 10 + static_cast<uint64_t>(c - '0');
    if (next < v) return std::nullopt;
    v = next;
  }
  return v;
}

// The privacy CA's blessed-measurement list lives in a config file so an
// operator can rotate enclave builds without recompiling. Absent the file,
// the shipped enclave's own measurement is the sole entry.
fs::path allowlist_path(const Ctx& ctx) { return ctx.root / "pca_allowlist"; }

Result<std::vector<Digest>> load_allowlist(const Ctx& ctx) {
  std::vector<Digest> out;
  auto raw = read_file(allowlist_path(ctx));
  if (!raw.ok()) {
    out.push_back(measure(vtpm_code_blob(), {}).mrenclave);
    return out;
  }
  std::string text(raw->begin(), raw->end());
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto digest = hex_decode(line);
    if (!digest.ok() || digest->size() != 32)
      return Err::BadParam;
    Digest d{};
    std::copy(digest->begin(), digest->end(), d.begin());
    out.push_back(d);
  }
  return out;
}

void write_default_allowlist(const Ctx& ctx) {
  if (read_file(allowlist_path(ctx)).ok()) return;
  std::string text =
      "# sha256 measurements the privacy CA certifies, one hex digest per "
      "line\n" +
      hex_encode(view(measure(vtpm_code_blob(), {}).mrenclave)) + "\n";
  (void)write_file(allowlist_path(ctx), to_bytes(text));
}

int run_provision(const Ctx& ctx, const std::vector<std::string>& args) {
  std::string name = "default";
  DefensePreset defense = DefensePreset::Counter;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--defense") {
      if (++i == args.size()) return usage("--defense needs a value");
      auto d = defense_from_name(args[i]);
      if (!d.ok()) return usage("unknown defense preset: " + args[i]);
      defense = *d;
    } else if (args[i].rfind("--", 0) == 0) {
      return usage("unknown flag: " + args[i]);
    } else {
      name = args[i];
    }
  }
  Workspace ws(ctx.root);
  Platform platform(ws.platform_dir(), ctx.seed);
  auto r = provision_instance(platform, ws, name, tenant_seed(ctx.seed, name),
                              config_for_defense(defense));
  if (!r.ok()) return fail(r.error(), "provision " + name);
  write_default_allowlist(ctx);
  std::cout << "provisioned " << name << " (defense "
            << defense_name(defense) << ") at "
            << ws.instance_dir(name).string() << "\n";
  return 0;
}

int run_init(const Ctx& ctx, const std::vector<std::string>& args) {
  if (args.size() > 1) return usage("init takes at most one name");
  std::string name = args.empty() ? "default" : args[0];
  Workspace ws(ctx.root);
  Platform platform(ws.platform_dir(), ctx.seed);
  auto b = Instance::boot(platform, ws, name);
  if (!b.ok()) return fail(b.error(), "launch " + name);
  Instance& live = b.value();
  const EnclaveIdentity& id = live.identity();
  std::cout << "instance " << name << " launched, startup "
            << live.state().startup_counter << "\n"
            << "mrenclave " << hex_encode(view(id.mrenclave)) << "\n"
            << "mrsigner  " << hex_encode(view(id.mrsigner)) << "\n";
  return 0;
}

int run_cmd(const Ctx& ctx, const std::vector<std::string>& args) {
  std::string name = "default";
  std::string hex;
  if (args.size() == 1) {
    hex = args[0];
  } else if (args.size() == 2) {
    name = args[0];
    hex = args[1];
  } else {
    return usage("cmd takes [NAME] HEX");
  }
  auto frame = hex_decode(hex);
  if (!frame.ok()) return usage("command frame is not valid hex");
  Workspace ws(ctx.root);
  Platform platform(ws.platform_dir(), ctx.seed);
  auto b = Instance::boot(platform, ws, name);
  if (!b.ok()) return fail(b.error(), "launch " + name);
  Bytes wire = b.value().execute(*frame);
  auto resp = Response::decode(wire);
  if (!resp.ok()) return fail(resp.error(), "response decode");
  std::cout << hex_encode(resp->payload) << "\n";
  if (!resp->ok()) {
    std::cerr << "command failed: " << err_name(resp->error) << "\n";
    return exit_code_for(resp->error);
  }
  return 0;
}

int run_snapshot(const Ctx& ctx, const std::vector<std::string>& args,
                 bool restore) {
  if (args.size() != 1) return usage("expected exactly one instance name");
  Workspace ws(ctx.root);
  auto r = restore ? ws.restore(args[0]) : ws.snapshot(args[0]);
  if (!r.ok())
    return fail(r.error(),
                std::string(restore ? "restore " : "snapshot ") + args[0]);
  std::cout << (restore ? "restored " : "snapshot of ") << args[0] << "\n";
  return 0;
}

int run_attest(const Ctx& ctx, const std::vector<std::string>& args) {
  std::string name = "default";
  std::string variant = "honest";
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--variant") {
      if (++i == args.size()) return usage("--variant needs a value");
      variant = args[i];
    } else if (args[i].rfind("--", 0) == 0) {
      return usage("unknown flag: " + args[i]);
    } else {
      name = args[i];
    }
  }
  if (variant != "honest" && variant != "patched" && variant != "replay" &&
      variant != "forged")
    return usage("unknown attest variant: " + variant);

  Workspace ws(ctx.root);
  Platform platform(ws.platform_dir(), ctx.seed);
  auto b = Instance::boot(platform, ws, name);
  if (!b.ok()) return fail(b.error(), "launch " + name);
  Instance& live = b.value();
  auto created = Response::decode(live.execute(
      client::create_primary(kRhEndorsement, KeyKind::RsaSigning, 2048,
                             to_bytes(std::string("attest-ek")), {}, {})
          .encode()));
  if (!created.ok()) return fail(created.error(), "ek response");
  if (!created->ok()) return fail(created->error, "ek creation");
  auto ek = client::parse_created(*created);
  if (!ek.ok()) return fail(ek.error(), "ek parse");

  auto allowlist = load_allowlist(ctx);
  if (!allowlist.ok())
    return usage("pca_allowlist holds a line that is not a sha256 hex digest");
  PcaPolicy policy;
  policy.mrenclave_allowlist = *allowlist;
  PrivacyCa pca(ctx.seed + 0x5ca, std::move(policy),
                platform.group_public_der());
  AttestationRequest req = pca.challenge(RequestedKey::Ek);
  EnclaveIdentity id = live.identity();
  RsaKey signer = platform.group_key();
  if (variant == "patched") {
    auto pub = read_file(ws.instance_dir(name) / Workspace::kSignerFile);
    if (!pub.ok()) return fail(pub.error(), "signer key");
    Bytes code = vtpm_code_blob();
    Bytes patch = to_bytes(std::string(" with one extra jump"));
    code.insert(code.end(), patch.begin(), patch.end());
    id = measure(code, *pub);
  } else if (variant == "forged") {
    signer = derive_rsa_key_cached(
        to_bytes(std::string("rogue platform key")), 2048);
  }
  Quote quote = quote_report(enclave_report(id, ek->public_part, req), signer);
  if (variant == "replay") {
    (void)pca.verify_and_issue(quote, ek->public_part, req,
                               platform.virtual_now_ms());
  }
  auto cert = pca.verify_and_issue(quote, ek->public_part, req,
                                   platform.virtual_now_ms());
  if (!cert.ok()) return fail(cert.error(), "attestation (" + variant + ")");
  std::cout << "certificate issued by " << cert->issuer << " for key "
            << hex_encode(view(sha256(cert->subject_key_pub))).substr(0, 16)
            << " valid [" << cert->valid_from_ms << ", "
            << cert->valid_until_ms << ")\n";
  return 0;
}

int run_attack(const Ctx& ctx, const std::vector<std::string>& args) {
  if (args.empty() || args[0] != "run")
    return usage("attack supports: attack run NAME|all");
  if (args.size() < 2) return usage("attack run needs a scenario name or all");
  std::string which = args[1];
  std::string defense = "all";
  uint64_t seed = ctx.seed;
  for (size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--defense") {
      if (++i == args.size()) return usage("--defense needs a value");
      defense = args[i];
    } else if (args[i] == "--seed") {
      if (++i == args.size()) return usage("--seed needs a value");
      auto v = parse_u64_arg(args[i]);
      if (!v) return usage("--seed needs a number");
      seed = *v;
    } else {
      return usage("unknown flag: " + args[i]);
    }
  }
  std::vector<DefensePreset> presets;
  if (defense == "all") {
    presets = {DefensePreset::Off, DefensePreset::Software,
               DefensePreset::Counter};
  } else {
    auto d = defense_from_name(defense);
    if (!d.ok()) return usage("unknown defense preset: " + defense);
    presets = {*d};
  }
  std::vector<Verdict> verdicts;
  bool matched = false;
  for (DefensePreset d : presets) {
    for (const Scenario& s : builtin_scenarios(d)) {
      if (which != "all" && which != s.name) continue;
      matched = true;
      auto v = run_scenario(ctx.root / "attacks", s, seed);
      if (!v.ok()) return fail(v.error(), "scenario " + s.name);
      verdicts.push_back(*v);
    }
  }
  if (!matched) return usage("unknown scenario: " + which);
  std::cout << report(verdicts);
  return 0;
}

int run_bench(const Ctx& ctx, const std::vector<std::string>& args) {
  std::vector<std::string> commands = benchable_commands();
  size_t iterations = 100;
  fs::path out = ctx.root / "bench.csv";
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--commands") {
      if (++i == args.size()) return usage("--commands needs a value");
      commands.clear();
      std::string list = args[i];
      size_t pos = 0;
      while (pos != std::string::npos) {
        size_t comma = list.find(',', pos);
        std::string one = comma == std::string::npos
                              ? list.substr(pos)
                              : list.substr(pos, comma - pos);
        if (!one.empty()) commands.push_back(one);
        pos = comma == std::string::npos ? comma : comma + 1;
      }
      if (commands.empty()) return usage("--commands list is empty");
    } else if (args[i] == "--iterations") {
      if (++i == args.size()) return usage("--iterations needs a value");
      auto v = parse_u64_arg(args[i]);
      if (!v || *v == 0) return usage("--iterations needs a positive number");
      iterations = static_cast<size_t>(*v);
    } else if (args[i] == "--out") {
      if (++i == args.size()) return usage("--out needs a path");
      out = args[i];
    } else {
      return usage("unknown flag: " + args[i]);
    }
  }
  std::vector<BenchResult> results;
  std::cout << "command         backend  mean_ms    p50_ms    p95_ms\n";
  auto record = [&](const BenchResult& r) {
    results.push_back(r);
    std::printf("%-15s %-8s %8.3f  %8.3f  %8.3f\n", r.command.c_str(),
                backend_name(r.backend), r.mean_ns() / 1e6, r.p50_ns() / 1e6,
                r.p95_ns() / 1e6);
  };
  for (const std::string& cmd : commands) {
    for (Backend b : {Backend::Plain, Backend::Sealed}) {
      auto r = bench_command(ctx.root / "bench", cmd, b, iterations);
      if (!r.ok()) {
        if (r.error() == Err::UnknownCommand)
          return usage("unknown bench command: " + cmd);
        return fail(r.error(), "bench " + cmd);
      }
      record(*r);
    }
  }
  for (Backend b : {Backend::Plain, Backend::Sealed}) {
    auto r = bench_launch(ctx.root / "bench", b, iterations);
    if (!r.ok()) return fail(r.error(), "bench launch");
    record(*r);
  }
  auto w = emit_csv(results, out);
  if (!w.ok()) return fail(w.error(), "write " + out.string());
  std::cout << "samples written to " << out.string() << "\n";
  return 0;
}

int run(int argc, char** argv) {
  Ctx ctx;
  if (const char* env = std::getenv("SVTPM_SIM_SEED")) {
    auto v = parse_u64_arg(env);
    if (!v) return usage("SVTPM_SIM_SEED must be a number");
    ctx.seed = *v;
  }
  std::vector<std::string> args(argv + 1, argv + argc);
  size_t i = 0;
  std::string sub;
  for (; i < args.size(); ++i) {
    if (args[i] == "--root") {
      if (++i == args.size()) return usage("--root needs a directory");
      ctx.root = args[i];
    } else if (args[i] == "--help" || args[i] == "-h") {
      usage();
      return 0;
    } else {
      sub = args[i++];
      break;
    }
  }
  std::vector<std::string> rest(args.begin() + static_cast<long>(i),
                                args.end());
  if (sub.empty()) return usage("missing command");
  if (sub == "provision") return run_provision(ctx, rest);
  if (sub == "init") return run_init(ctx, rest);
  if (sub == "cmd") return run_cmd(ctx, rest);
  if (sub == "snapshot") return run_snapshot(ctx, rest, false);
  if (sub == "restore") return run_snapshot(ctx, rest, true);
  if (sub == "attest") return run_attest(ctx, rest);
  if (sub == "attack") return run_attack(ctx, rest);
  if (sub == "bench") return run_bench(ctx, rest);
  return usage("unknown command: " + sub);
}

}  // namespace
}  // namespace svtpm

int main(int argc, char** argv) { return svtpm::run(argc, argv); }
