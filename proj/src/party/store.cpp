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


#include "falldet/party/store.hpp"

#include <cstring>
#include <iostream>

#include <json.hpp>

#include "falldet/digest.hpp"
#include "falldet/error.hpp"

namespace falldet::party {

using nlohmann::json;

void MemoryStore::append(const StoredUpload& upload) {
  std::lock_guard lock(mu_);
  data_.uploads.push_back(upload);
}

void MemoryStore::append(const StoredResult& result) {
  std::lock_guard lock(mu_);
  data_.results.push_back(result);
}

Recovery MemoryStore::recover() {
  std::lock_guard lock(mu_);
  return data_;
}

namespace {

std::string seal(json j) {
  j["sha256"] = sha256_hex(j.dump());
  return j.dump();
}

std::vector<std::uint8_t> word_bytes(const std::vector<std::uint64_t>& words) {
  std::vector<std::uint8_t> out(words.size() * 8);
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<std::uint8_t>(words[i] >> (8 * b));
  }
  return out;
}

std::vector<std::uint64_t> bytes_words(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 8 != 0) throw ParseError("payload is not whole words");
  std::vector<std::uint64_t> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int b = 0; b < 8; ++b) out[i] |= std::uint64_t{bytes[i * 8 + b]} << (8 * b);
  }
  return out;
}

}  // namespace

LogStore::LogStore(std::string path) : path_(std::move(path)) {
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw StorageError(path_ + ": cannot open for append: " + std::strerror(errno));
}

void LogStore::write_line(const std::string& line) {
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw StorageError(path_ + ": write failed");
}

void LogStore::append(const StoredUpload& upload) {
  json j;
  j["kind"] = "upload";
  j["session"] = transport::to_hex(upload.session);
  j["slot"] = upload.slot;
  j["slots"] = upload.slots;
  j["complete"] = upload.complete;
  j["payload"] = transport::base64_encode(word_bytes(upload.words));
  write_line(seal(std::move(j)));
}

void LogStore::append(const StoredResult& result) {
  json j;
  j["kind"] = "result";
  j["session"] = transport::to_hex(result.session);
  j["label"] = result.label ? json(*result.label) : json(nullptr);
  j["reason"] = result.reason;
  write_line(seal(std::move(j)));
}

Recovery LogStore::recover() {
  std::lock_guard lock(mu_);
  Recovery r;
  std::ifstream in(path_, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      json j = json::parse(line);
      const std::string sum = j.at("sha256").get<std::string>();
      j.erase("sha256");
      if (sha256_hex(j.dump()) != sum) throw ParseError("checksum mismatch");
      const std::string kind = j.at("kind").get<std::string>();
      const auto session = transport::parse_session_id(j.at("session").get<std::string>());
      if (kind == "upload") {
        StoredUpload u;
        u.session = session;
        u.slot = j.at("slot").get<std::uint64_t>();
        u.slots = j.at("slots").get<std::uint64_t>();
        u.complete = j.at("complete").get<bool>();
        u.words = bytes_words(transport::base64_decode(j.at("payload").get<std::string>()));
        r.uploads.push_back(std::move(u));
      } else if (kind == "result") {
        StoredResult res;
        res.session = session;
        if (!j.at("label").is_null()) res.label = j.at("label").get<int>();
        res.reason = j.at("reason").get<std::string>();
        r.results.push_back(std::move(res));
      } else {
        throw ParseError("unknown record kind '" + kind + "'");
      }
    } catch (const std::exception& e) {
      ++r.skipped;
      std::clog << "falldet: " << path_ << ":" << line_no << ": skipping record: " << e.what()
                << "\n";
    }
  }
  return r;
}

}  // namespace falldet::party
