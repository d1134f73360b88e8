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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "svtpm/client.hpp"
#include "svtpm/instance.hpp"

namespace svtpm {

// Latency benchmarks for the command dispatch path, sealed NVRAM backend
// against the plain one. The stack persists NVRAM after every command, so
// the sealed backend pays serialize + seal + write where the plain backend
// pays serialize + write; the difference is the price of the protection.
//
// Measurement design: the bench tenant carries a realistically sized NVRAM
// (tens of KB of NV data) so the per-byte sealing work stands clear of the
// file-write noise floor, and the backend comparison samples both stacks in
// lockstep so slow drift (CPU frequency, filesystem cache state) cancels
// out of the difference.

enum class Backend : uint8_t {
  Plain = 1,   // NVRAM image written as-is
  Sealed = 2,  // NVRAM image sealed to the enclave identity
};

inline const char* backend_name(Backend b) {
  return b == Backend::Sealed ? "sealed" : "plain";
}

inline Result<Backend> backend_from_name(std::string_view name) {
  if (name == "plain") return Backend::Plain;
  if (name == "sealed") return Backend::Sealed;
  return Err::BadParam;
}

struct BenchResult {
  std::string command;
  Backend backend = Backend::Plain;
  std::vector<uint64_t> samples_ns;

  double mean_ns() const {
    if (samples_ns.empty()) return 0.0;
    return std::accumulate(samples_ns.begin(), samples_ns.end(), 0.0) /
           static_cast<double>(samples_ns.size());
  }
  // Nearest-rank percentile over the recorded samples.
  double percentile_ns(double pct) const {
    if (samples_ns.empty()) return 0.0;
    std::vector<uint64_t> sorted = samples_ns;
    std::sort(sorted.begin(), sorted.end());
    size_t rank = static_cast<size_t>(
        std::max(1.0, std::ceil(pct / 100.0 *
                                static_cast<double>(sorted.size()))));
    return static_cast<double>(sorted[rank - 1]);
  }
  double p50_ns() const { return percentile_ns(50.0); }
  double p95_ns() const { return percentile_ns(95.0); }
  double mean_ms() const { return mean_ns() / 1e6; }
};

// Command names bench_command accepts; "noop" times an empty body and
// calibrates the harness overhead.
inline const std::vector<std::string>& benchable_commands() {
  static const std::vector<std::string> kCommands = {
      "noop",     "pcr_read", "pcr_extend",
      "create_primary", "nv_write", "nv_read"};
  return kCommands;
}

namespace detail {

inline uint64_t elapsed_ns(std::chrono::steady_clock::time_point a,
                           std::chrono::steady_clock::time_point b) {
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

inline Result<Bytes> bench_frame(std::string_view cmd) {
  if (cmd == "pcr_read") return client::pcr_read_all().encode();
  if (cmd == "pcr_extend")
    return client::pcr_extend(3, sha256(to_bytes(std::string("bench extend"))))
        .encode();
  if (cmd == "create_primary")
    return client::create_primary(kRhOwner, KeyKind::AesSymmetric, 256,
                                  to_bytes(std::string("bench")), {}, {})
        .encode();
  if (cmd == "nv_write")
    return client::nv_write(0x2000, Bytes(256, 0x11)).encode();
  if (cmd == "nv_read") return client::nv_read(0x1000).encode();
  return Err::UnknownCommand;
}

inline Result<Response> checked(const Bytes& wire) {
  auto r = Response::decode(wire);
  if (!r.ok()) return r.error();
  if (!r->ok()) return r->error;
  return *r;
}

inline void wipe_tree(const fs::path& root) {
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::remove_all(fs::path(root.string() + ".platform"), ec);
}

}  // namespace detail

// Provisions and boots the bench tenant with rollback off and the NVRAM
// backend under test, then loads four full NV indexes (32KB of tenant
// data). Only nvram_protection differs between the two backends.
inline Result<Instance> bench_instance(Platform& platform, const Workspace& ws,
                                       const std::string& name,
                                       Backend backend) {
  InstanceConfig cfg;
  cfg.nvram_protection = backend == Backend::Sealed;
  cfg.rollback = RollbackMode::Off;
  cfg.trusted_clock = true;
  auto p = provision_instance(platform, ws, name, 1, cfg);
  if (!p.ok()) return p.error();
  auto booted = Instance::boot(platform, ws, name);
  if (!booted.ok()) return booted.error();
  Instance live = booted.take();
  Bytes chunk(kNvMaxBytes, 0x5a);
  for (uint32_t i = 0; i < 4; ++i) {
    auto r = detail::checked(
        live.execute(client::nv_write(0x1000 + i, chunk).encode()));
    if (!r.ok()) return r.error();
  }
  return live;
}

// Times the full dispatch of one command (decode, execute, write-through
// persist) on a fresh bench tenant. Client-side encode and decode stay
// outside the window. "noop" times nothing but the harness loop itself.
inline Result<BenchResult> bench_command(const fs::path& scratch,
                                         std::string_view cmd_name,
                                         Backend backend,
                                         size_t iterations = 100) {
  if (iterations == 0) return Err::BadParam;
  bool noop = cmd_name == "noop";
  Bytes frame;
  if (!noop) {
    auto f = detail::bench_frame(cmd_name);
    if (!f.ok()) return f.error();
    frame = *f;
  }
  fs::path root = scratch / (std::string("cmd-") + std::string(cmd_name) +
                             "-" + backend_name(backend));
  detail::wipe_tree(root);
  Workspace ws(root);
  Platform platform(ws.platform_dir(), 1);
  auto built = bench_instance(platform, ws, "bench", backend);
  if (!built.ok()) return built.error();
  Instance live = built.take();

  size_t warmup = std::min<size_t>(10, iterations);
  for (size_t i = 0; i < warmup && !noop; ++i) {
    auto r = detail::checked(live.execute(frame));
    if (!r.ok()) return r.error();
  }

  BenchResult out;
  out.command = std::string(cmd_name);
  out.backend = backend;
  out.samples_ns.reserve(iterations);
  for (size_t i = 0; i < iterations; ++i) {
    if (noop) {
      auto t0 = std::chrono::steady_clock::now();
      auto t1 = std::chrono::steady_clock::now();
      out.samples_ns.push_back(detail::elapsed_ns(t0, t1));
      continue;
    }
    auto t0 = std::chrono::steady_clock::now();
    Bytes resp = live.execute(frame);
    auto t1 = std::chrono::steady_clock::now();
    auto r = detail::checked(resp);
    if (!r.ok()) return r.error();
    out.samples_ns.push_back(detail::elapsed_ns(t0, t1));
  }
  return out;
}

// Times the NVRAM load path (file read, unseal for the sealed backend,
// image and state parse) against the at-rest image of the bench tenant.
inline Result<BenchResult> bench_launch(const fs::path& scratch,
                                        Backend backend,
                                        size_t iterations = 100) {
  if (iterations == 0) return Err::BadParam;
  fs::path root =
      scratch / (std::string("launch-") + backend_name(backend));
  detail::wipe_tree(root);
  Workspace ws(root);
  Platform platform(ws.platform_dir(), 1);
  {
    auto built = bench_instance(platform, ws, "bench", backend);
    if (!built.ok()) return built.error();
    // falls out of scope with its state persisted
  }
  fs::path dir = ws.instance_dir("bench");
  auto code = read_file(dir / Workspace::kEnclaveFile);
  if (!code.ok()) return code.error();
  auto signer = read_file(dir / Workspace::kSignerFile);
  if (!signer.ok()) return signer.error();
  EnclaveIdentity id = measure(*code, *signer);
  bool sealed = backend == Backend::Sealed;
  fs::path nvram = dir / Workspace::kNvramFile;

  auto load_once = [&]() -> Result<void> {
    auto image = read_nvram_file(nvram, sealed, id, view(platform.secret()));
    if (!image.ok()) return image.error();
    auto state = deserialize_state(image->tpm_state);
    if (!state.ok()) return state.error();
    return Result<void>();
  };

  size_t warmup = std::min<size_t>(10, iterations);
  for (size_t i = 0; i < warmup; ++i) {
    auto r = load_once();
    if (!r.ok()) return r.error();
  }
  BenchResult out;
  out.command = "launch";
  out.backend = backend;
  out.samples_ns.reserve(iterations);
  for (size_t i = 0; i < iterations; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = load_once();
    auto t1 = std::chrono::steady_clock::now();
    if (!r.ok()) return r.error();
    out.samples_ns.push_back(detail::elapsed_ns(t0, t1));
  }
  return out;
}

// Sealed-vs-plain overhead for one command, sampled in lockstep: iteration
// i times the plain dispatch then the sealed dispatch, so both streams see
// the same machine epochs and the difference of means isolates the sealing
// cost. Both tenants share one platform and evolve identical states.
struct OverheadComparison {
  BenchResult plain;
  BenchResult sealed;

  // (sealed - plain) / plain over median latency. The median, not the
  // mean: filesystem write spikes run 3-4x the typical sample and land on
  // either stream at random, so means of two 100-sample streams do not
  // reproduce while the medians do.
  double overhead_fraction() const {
    double base = plain.p50_ns();
    if (base <= 0.0) return 0.0;
    return (sealed.p50_ns() - base) / base;
  }
};

inline Result<OverheadComparison> bench_backend_overhead(
    const fs::path& scratch, std::string_view cmd_name,
    size_t iterations = 100) {
  if (iterations == 0) return Err::BadParam;
  auto f = detail::bench_frame(cmd_name);
  if (!f.ok()) return f.error();
  Bytes frame = *f;
  fs::path root = scratch / (std::string("pair-") + std::string(cmd_name));
  detail::wipe_tree(root);
  Workspace ws(root);
  Platform platform(ws.platform_dir(), 1);
  auto plain = bench_instance(platform, ws, "plain", Backend::Plain);
  if (!plain.ok()) return plain.error();
  auto sealed = bench_instance(platform, ws, "sealed", Backend::Sealed);
  if (!sealed.ok()) return sealed.error();
  Instance live_plain = plain.take();
  Instance live_sealed = sealed.take();

  size_t warmup = std::min<size_t>(10, iterations);
  for (size_t i = 0; i < warmup; ++i) {
    auto a = detail::checked(live_plain.execute(frame));
    if (!a.ok()) return a.error();
    auto b = detail::checked(live_sealed.execute(frame));
    if (!b.ok()) return b.error();
  }

  OverheadComparison out;
  out.plain.command = out.sealed.command = std::string(cmd_name);
  out.plain.backend = Backend::Plain;
  out.sealed.backend = Backend::Sealed;
  out.plain.samples_ns.reserve(iterations);
  out.sealed.samples_ns.reserve(iterations);
  for (size_t i = 0; i < iterations; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Bytes rp = live_plain.execute(frame);
    auto t1 = std::chrono::steady_clock::now();
    Bytes rs = live_sealed.execute(frame);
    auto t2 = std::chrono::steady_clock::now();
    auto a = detail::checked(rp);
    if (!a.ok()) return a.error();
    auto b = detail::checked(rs);
    if (!b.ok()) return b.error();
    out.plain.samples_ns.push_back(detail::elapsed_ns(t0, t1));
    out.sealed.samples_ns.push_back(detail::elapsed_ns(t1, t2));
  }
  return out;
}

// CSV with one row per sample; the bit-stable header is what the plotting
// script and CI assertions parse.
inline Result<void> emit_csv(const std::vector<BenchResult>& results,
                             const fs::path& path) {
  std::ostringstream out;
  out << "command,backend,iteration,nanos\n";
  for (const BenchResult& r : results) {
    for (size_t i = 0; i < r.samples_ns.size(); ++i) {
      out << r.command << ',' << backend_name(r.backend) << ',' << i << ','
          << r.samples_ns[i] << '\n';
    }
  }
  return write_file(path, to_bytes(out.str()));
}

}  // namespace svtpm
