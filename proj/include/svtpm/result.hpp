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

#include <cassert>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>

namespace svtpm {

// Typed error space shared by every module. The numeric values double as
// wire response codes (OR'ed with the error marker bit, see wire.hpp).
enum class Err : uint32_t {
  None = 0,
  // tpm_core
  BadTag = 0x001,
  Truncated = 0x002,
  UnknownCode = 0x003,
  LockedOut = 0x004,
  Auth = 0x005,
  Policy = 0x006,
  BadIndex = 0x007,
  WrongKeyKind = 0x008,
  PayloadTooLarge = 0x009,
  UnknownHandle = 0x00a,
  BadParam = 0x00b,
  // enclave services
  PolicyMismatch = 0x101,
  Corrupt = 0x102,
  NoCounters = 0x103,
  Access = 0x104,
  UnknownUuid = 0x105,
  BindingMismatch = 0x106,
  // trusted clock
  EpochChanged = 0x201,
  // privacy CA verdicts
  BadSignature = 0x501,
  UnknownMeasurement = 0x502,
  StaleNonce = 0x503,
  BadChain = 0x504,
  // attack harness / bench
  BadScript = 0x301,
  UnknownCommand = 0x302,
  // plumbing
  Io = 0x401,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::None: return "OK";
    case Err::BadTag: return "ERR_BAD_TAG";
    case Err::Truncated: return "ERR_TRUNCATED";
    case Err::UnknownCode: return "ERR_UNKNOWN_CODE";
    case Err::LockedOut: return "ERR_LOCKED_OUT";
    case Err::Auth: return "ERR_AUTH";
    case Err::Policy: return "ERR_POLICY";
    case Err::BadIndex: return "ERR_BAD_INDEX";
    case Err::WrongKeyKind: return "ERR_WRONG_KEY_KIND";
    case Err::PayloadTooLarge: return "ERR_PAYLOAD_TOO_LARGE";
    case Err::UnknownHandle: return "ERR_UNKNOWN_HANDLE";
    case Err::BadParam: return "ERR_BAD_PARAM";
    case Err::PolicyMismatch: return "ERR_POLICY_MISMATCH";
    case Err::Corrupt: return "ERR_CORRUPT";
    case Err::NoCounters: return "ERR_NO_COUNTERS";
    case Err::Access: return "ERR_ACCESS";
    case Err::UnknownUuid: return "ERR_UNKNOWN_UUID";
    case Err::BindingMismatch: return "ERR_BINDING_MISMATCH";
    case Err::EpochChanged: return "ERR_EPOCH_CHANGED";
    case Err::BadSignature: return "REJECT_BAD_SIGNATURE";
    case Err::UnknownMeasurement: return "REJECT_UNKNOWN_MEASUREMENT";
    case Err::StaleNonce: return "REJECT_STALE_NONCE";
    case Err::BadChain: return "REJECT_BAD_CHAIN";
    case Err::BadScript: return "ERR_BAD_SCRIPT";
    case Err::UnknownCommand: return "ERR_UNKNOWN_COMMAND";
    case Err::Io: return "ERR_IO";
  }
  return "ERR_UNKNOWN";
}

// Minimal expected-style result. Err::None is not a valid error payload.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Err e) : v_(e) { assert(e != Err::None); }

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    assert(ok());
    return std::get<T>(v_);
  }
  T& value() & {
    assert(ok());
    return std::get<T>(v_);
  }
  T&& take() {
    assert(ok());
    return std::move(std::get<T>(v_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  Err error() const { return ok() ? Err::None : std::get<Err>(v_); }

 private:
  std::variant<T, Err> v_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() : e_(Err::None) {}
  Result(Err e) : e_(e) {}

  bool ok() const { return e_ == Err::None; }
  explicit operator bool() const { return ok(); }
  Err error() const { return e_; }

  static Result success() { return Result(); }

 private:
  Err e_;
};

}  // namespace svtpm
