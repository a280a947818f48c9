/*
 * Copyright 2026 The FallDet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef FALLDET_PARTY_STORE_HPP_
#define FALLDET_PARTY_STORE_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "falldet/transport/envelope.hpp"

namespace falldet::party {

// One accepted share upload, exactly as received.
struct StoredUpload {
  transport::SessionId session{};
  std::uint64_t slot = 0;
  std::uint64_t slots = 0;
  bool complete = false;
  std::vector<std::uint64_t> words;
  bool operator==(const StoredUpload&) const = default;
};

struct StoredResult {
  transport::SessionId session{};
  // Empty for a failed session.
  std::optional<int> label;
  std::string reason;
  bool operator==(const StoredResult&) const = default;
};

struct Recovery {
  std::vector<StoredUpload> uploads;
  std::vector<StoredResult> results;
  // Records dropped because they were torn or failed their checksum.
  std::size_t skipped = 0;
};

// Append-only persistence of one party's uploads and outcomes. Appends are
// serialized; implementations throw StorageError when a write fails.
class ShareStore {
 public:
  virtual ~ShareStore() = default;
  virtual void append(const StoredUpload& upload) = 0;
  virtual void append(const StoredResult& result) = 0;
  // Everything appended so far, in append order.
  virtual Recovery recover() = 0;
};

class MemoryStore final : public ShareStore {
 public:
  void append(const StoredUpload& upload) override;
  void append(const StoredResult& result) override;
  Recovery recover() override;

 private:
  std::mutex mu_;
  Recovery data_;
};

// Newline-delimited JSON; every line carries the SHA-256 of its own content
// so that torn or corrupted lines are detected and skipped on recovery.
class LogStore final : public ShareStore {
 public:
  explicit LogStore(std::string path);
  const std::string& path() const { return path_; }
  void append(const StoredUpload& upload) override;
  void append(const StoredResult& result) override;
  Recovery recover() override;

 private:
  void write_line(const std::string& line);

  std::string path_;
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace falldet::party

#endif  // FALLDET_PARTY_STORE_HPP_
