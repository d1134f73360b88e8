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

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <stdexcept>
#include <filesystem>
#include <fstream>

#include "svtpm/bytes.hpp"
#include "svtpm/result.hpp"

namespace svtpm {

namespace fs = std::filesystem;

inline Result<Bytes> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Err::Io;
  Bytes data((std::istreambuf_iterator<char>(in)),
             std::istreambuf_iterator<char>());
  if (in.bad()) return Err::Io;
  return data;
}

// Write via temp file + rename so readers never see a partial file.
inline Result<void> write_file(const fs::path& path, ByteView data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return Err::Io;
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) return Err::Io;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) return Err::Io;
  return Result<void>();
}

inline Result<void> ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return Err::Io;
  return Result<void>();
}

// For storage the simulator cannot run without; a write failure there is an
// environment error, not a state to recover from.
inline void must_write(const fs::path& path, ByteView data) {
  if (!write_file(path, data).ok())
    throw std::runtime_error("unwritable storage: " + path.string());
}

inline void must_ensure_dir(const fs::path& dir) {
  if (!ensure_dir(dir).ok())
    throw std::runtime_error("cannot create directory: " + dir.string());
}

// Advisory exclusive lock held for the object's lifetime. Serializes both
// across processes and across instances within one process.
class FileLock {
 public:
  explicit FileLock(const fs::path& path)
      : fd_(::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600)) {
    if (fd_ >= 0) ::flock(fd_, LOCK_EX);
  }
  ~FileLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;
  bool held() const { return fd_ >= 0; }

 private:
  int fd_;
};

}  // namespace svtpm
