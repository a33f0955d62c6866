/*
 * Copyright 2026 The Taskmesh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "taskmesh/error.hpp"
#include "taskmesh/fs_protocol.hpp"
#include "taskmesh/transport.hpp"

namespace taskmesh::netfs {

inline constexpr Nanos kDefaultAttrTtl = std::chrono::milliseconds(500);
inline constexpr std::size_t kDefaultReadWindow = 16;

// A server error code raised by the convenience calls; code() is the wire
// code ("not-found", "is-dir", ...).
class FsFailure : public Error {
 public:
  FsFailure(FsErrc code, const std::string& context)
      : Error(std::string(to_string(code)), context + ": " +
                                                std::string(to_string(code))),
        errc_(code) {}
  FsErrc errc() const noexcept { return errc_; }

 private:
  FsErrc errc_;
};

struct SessionStats {
  std::map<FsOp, std::uint64_t> sent;
  std::uint64_t cache_hits = 0;
  std::uint64_t batches = 0;  // request/response exchanges on the wire

  std::uint64_t count(FsOp op) const {
    auto it = sent.find(op);
    return it == sent.end() ? 0 : it->second;
  }
};

struct FileRead {
  Bytes data;
  Nanos access_time{0};  // open through last byte, release excluded
};

// Client side of one export session.
//
// Requests carry strictly increasing seq numbers and the server answers in
// order, so several requests may be in flight at once. A successful open
// returns the open request's own seq as its file handle, which lets reads
// be pipelined behind the open that creates their handle.
//
// getattr/lookup results are cached for attr_ttl; any mutating request
// through this session drops the cache. Opens always go to the server, so
// a reader that opens after a writer's flush+release sees the final bytes.
class FsSession {
 public:
  FsSession(std::unique_ptr<Connection> connection, std::string session,
            const std::string& token, const Transport& clock,
            Nanos attr_ttl = kDefaultAttrTtl);

  // Connects and presents the token. A wrong token shows up as
  // ConnectionLost on the first call.
  static std::unique_ptr<FsSession> connect(Transport& transport,
                                            const std::string& endpoint,
                                            const std::string& token,
                                            std::string session,
                                            Nanos attr_ttl = kDefaultAttrTtl);

  // One request, one response (or a cache hit). Server errors come back in
  // the response. Throws ConnectionLost.
  FsResponse call(const FsRequest& request);
  // Sends every request before reading any response.
  std::vector<FsResponse> call_pipelined(std::span<const FsRequest> requests);

  // The seq the next request will carry.
  std::uint64_t next_seq() const noexcept { return next_seq_; }

  // Whole-file read in batches of `window` chunk reads; window 1 is plain
  // sequential reading. Throws FsFailure.
  FileRead read_whole(const std::string& path,
                      std::size_t window = kDefaultReadWindow);
  Bytes read_file(const std::string& path,
                  std::size_t window = kDefaultReadWindow);
  // create-truncate, chunked writes, flush, release. Throws FsFailure.
  void write_file(const std::string& path, std::span<const std::uint8_t> data);
  FileAttr stat(const std::string& path);
  std::vector<std::string> list(const std::string& path);

  const SessionStats& stats() const noexcept { return stats_; }
  void close();

 private:
  struct CachedAttr {
    FileAttr attr;
    Nanos expires;
  };

  std::optional<FsResponse> cached(const FsRequest& request) const;
  void observe(const FsRequest& request, const FsResponse& response);
  FsResponse receive_for(std::uint64_t seq);

  std::unique_ptr<Connection> connection_;
  std::string session_;
  const Transport& clock_;
  Nanos attr_ttl_;
  std::uint64_t next_seq_ = 1;
  std::map<std::string, CachedAttr> attr_cache_;
  SessionStats stats_;
};

// Throws FsFailure when `response` carries an error.
void expect_ok(const FsResponse& response, const std::string& context);

// A task's view of its published workspace: paths under the mount path
// ("/workspace/a.txt") map onto the export root ("/a.txt").
class Workspace {
 public:
  Workspace(std::unique_ptr<FsSession> session, std::string mount_path);

  // Throws FsFailure(not-found) for paths outside the mount.
  std::string export_path(const std::string& path) const;

  Bytes read_file(const std::string& path,
                  std::size_t window = kDefaultReadWindow);
  FileRead read_whole(const std::string& path,
                      std::size_t window = kDefaultReadWindow);
  void write_file(const std::string& path, std::span<const std::uint8_t> data);
  std::vector<std::string> list(const std::string& path);
  FsSession& session() noexcept { return *session_; }

 private:
  std::unique_ptr<FsSession> session_;
  std::string mount_path_;
};

}  // namespace taskmesh::netfs
