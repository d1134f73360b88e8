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

#include <atomic>
#include <mutex>

#include "svtpm/platform.hpp"
#include "svtpm/result.hpp"

namespace svtpm {

// Millisecond clock built from the coarse platform clock plus an in-enclave
// tick counter. Ticks normally come from a dedicated ticking context; the
// simulation delivers them explicitly (see ClockDriver) so time is virtual
// and deterministic.
//
// Correction model: correct() re-anchors the tick base at the latest
// platform reading. The raw extrapolation may then lie below a previously
// returned value (the ticker ran fast); now_ms clamps to the last returned
// value, so the clock holds still until the platform catches up instead of
// ever stepping backward. With tick-rate error ε and correction interval I,
// the returned time stays within I·ε plus one second of coarse granularity
// of true platform time.
class TrustedClock {
 public:
  struct Config {
    uint64_t tick_rate_hz = 1000;
    uint64_t correction_interval_ms = 1000;
  };

  explicit TrustedClock(Platform& platform)
      : TrustedClock(platform, Config{}) {}
  TrustedClock(Platform& platform, Config config)
      : platform_(platform), config_(config) {
    reanchor();
  }

  const Config& config() const { return config_; }

  // Lock-free; called from the ticking context.
  void tick(uint64_t n = 1) {
    tick_count_.fetch_add(n, std::memory_order_relaxed);
  }
  uint64_t tick_count() const {
    return tick_count_.load(std::memory_order_relaxed);
  }

  Result<uint64_t> now_ms() {
    std::lock_guard<std::mutex> g(mu_);
    if (platform_.platform_time().epoch_nonce != anchor_.epoch_nonce)
      return Err::EpochChanged;
    uint64_t raw = raw_ms_locked();
    if (raw < last_returned_) raw = last_returned_;
    last_returned_ = raw;
    return raw;
  }

  Result<void> correct() {
    std::lock_guard<std::mutex> g(mu_);
    PlatformTime pt = platform_.platform_time();
    if (pt.epoch_nonce != anchor_.epoch_nonce) return Err::EpochChanged;
    anchor_.base_ms = pt.seconds * 1000;
    anchor_.base_tick = tick_count();
    anchor_.last_correction_tick = anchor_.base_tick;
    return Result<void>();
  }

  // Runs a correction once enough ticks have passed since the last one;
  // the cadence a real in-enclave ticker would keep by counting itself.
  Result<void> maybe_correct() {
    {
      std::lock_guard<std::mutex> g(mu_);
      uint64_t due = config_.correction_interval_ms * config_.tick_rate_hz /
                     1000;
      if (tick_count() - anchor_.last_correction_tick < due)
        return Result<void>();
    }
    return correct();
  }

  // Coarse passthrough for callers that only need seconds.
  PlatformTime coarse_now_s() { return platform_.platform_time(); }

  // Adopts the current epoch after a platform reset. Timestamps restart
  // with the new epoch's seconds; cross-epoch monotonicity is explicitly
  // not promised.
  void reanchor() {
    std::lock_guard<std::mutex> g(mu_);
    PlatformTime pt = platform_.platform_time();
    anchor_.epoch_nonce = pt.epoch_nonce;
    anchor_.base_ms = pt.seconds * 1000;
    anchor_.base_tick = tick_count();
    anchor_.last_correction_tick = anchor_.base_tick;
    last_returned_ = 0;
  }

 private:
  struct Anchor {
    uint64_t epoch_nonce = 0;
    uint64_t base_ms = 0;
    uint64_t base_tick = 0;
    uint64_t last_correction_tick = 0;
  };

  uint64_t raw_ms_locked() const {
    uint64_t delta = tick_count() - anchor_.base_tick;
    return anchor_.base_ms + delta * 1000 / config_.tick_rate_hz;
  }

  Platform& platform_;
  Config config_;
  std::atomic<uint64_t> tick_count_{0};
  std::mutex mu_;
  Anchor anchor_;
  uint64_t last_returned_ = 0;
};

// Advances the virtual timeline and delivers the ticks the in-enclave
// ticking context would have produced over that span. tick_scale models a
// mis-calibrated ticker (1.05 = runs 5% fast); corrections fire at the
// configured cadence along the way.
class ClockDriver {
 public:
  ClockDriver(Platform& platform, TrustedClock& clock,
              double tick_scale = 1.0)
      : platform_(platform), clock_(clock), tick_scale_(tick_scale) {}

  void advance(uint64_t ms) {
    uint64_t step = clock_.config().correction_interval_ms;
    while (ms > 0) {
      uint64_t chunk = std::min(ms, step);
      platform_.advance_ms(chunk);
      // fractional ticks carry over so scale errors accumulate smoothly
      double exact = tick_carry_ +
                     static_cast<double>(chunk) * tick_scale_ *
                         static_cast<double>(clock_.config().tick_rate_hz) /
                         1000.0;
      uint64_t whole = static_cast<uint64_t>(exact);
      tick_carry_ = exact - static_cast<double>(whole);
      clock_.tick(whole);
      // correcting once per chunk keeps the gap between corrections at or
      // under one interval even when the ticker runs slow; after a platform
      // reset this fails and the change surfaces on the next now_ms read
      (void)clock_.correct();
      ms -= chunk;
    }
  }

 private:
  Platform& platform_;
  TrustedClock& clock_;
  double tick_scale_;
  double tick_carry_ = 0.0;
};

}  // namespace svtpm
