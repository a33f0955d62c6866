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
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "taskmesh/fs_protocol.hpp"
#include "taskmesh/transport.hpp"
#include "taskmesh/wire.hpp"

namespace taskmesh::netfs {

// Serves the file protocol from a local directory.
//
// Paths are normalized and confined under the root; anything that would
// climb above it, and anything that is neither a regular file nor a
// directory (symlinks, sockets, ...), is reported as not-found.
//
// An open handle pins the file it opened. Writes through a handle are held
// as pending extents, visible to reads through that same handle, and reach
// the file on flush or release. Dropping a session discards them.
class DirectoryStore {
 public:
  DirectoryStore(std::filesystem::path root, bool read_only);
  ~DirectoryStore();

  DirectoryStore(const DirectoryStore&) = delete;
  DirectoryStore& operator=(const DirectoryStore&) = delete;

  // `session` scopes file handles; a successful open's handle is `seq`.
  FsResponse handle(std::uint64_t session, std::uint64_t seq,
                    const FsRequest& request);
  void close_session(std::uint64_t session);

  const std::filesystem::path& root() const noexcept { return root_; }
  bool read_only() const noexcept { return read_only_; }

 private:
  struct Handle;
  struct Resolved;

  std::string host_path(const std::vector<std::string>& parts) const;
  // Checks every component of `parts`. Error when a component is missing
  // or an intermediate one is not a directory.
  std::variant<FsErrc, Resolved> resolve(const std::vector<std::string>& parts) const;

  FsOutcome do_lookup(const std::string& path) const;
  FsOutcome do_readdir(const std::string& path) const;
  FsOutcome do_open(std::uint64_t session, std::uint64_t seq,
                    const op::Open& req);
  FsOutcome do_read(std::uint64_t session, const op::Read& req);
  FsOutcome do_write(std::uint64_t session, const op::Write& req);
  FsOutcome do_create(const op::Create& req);
  FsOutcome do_mkdir(const op::MkDir& req);
  FsOutcome do_unlink(const op::Unlink& req);
  FsOutcome do_rmdir(const op::RmDir& req);
  FsOutcome do_rename(const op::Rename& req);
  FsOutcome do_truncate(const op::Truncate& req);
  FsOutcome do_flush(std::uint64_t session, std::uint64_t fh, bool release);

  Handle* find_handle(std::uint64_t session, std::uint64_t fh);

  std::filesystem::path root_;
  std::string root_text_;
  bool read_only_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::unique_ptr<Handle>> handles_;
};

struct ExportConfig {
  std::filesystem::path root;
  bool read_only = false;
  std::string token;
  std::chrono::milliseconds attr_ttl{500};
};

// Throws InvalidConfig when the root is not an existing directory or the
// token is empty.
void validate(const ExportConfig& config);

// Answers volume_rpc frames on an export's listener; see volume.hpp.
using VolumeRpcHandler = std::function<wire::VolumeRpc(const wire::VolumeRpc&)>;

// The export daemon. Every connection starts with hello{token}; a wrong
// token closes the connection before any file operation. fs_request seq
// numbers must strictly increase per connection.
class ExportServer {
 public:
  // Throws BindFailure, InvalidConfig.
  ExportServer(ExportConfig config, Transport& transport,
               const std::string& bind = "");
  ~ExportServer();

  const std::string& address() const;
  const ExportConfig& config() const noexcept { return config_; }
  void set_volume_handler(VolumeRpcHandler handler) {
    volume_handler_ = std::move(handler);
  }

  // Handles at most one event. False on timeout.
  bool poll(std::optional<Nanos> timeout);
  // Serves until stop is requested (checked every `slice`).
  void serve(std::stop_token stop, Nanos slice = std::chrono::milliseconds(50));
  // Serves forever; for simulated actors, which end by being killed.
  void serve_forever();

  std::uint64_t requests_served() const noexcept { return served_; }

 private:
  struct Session {
    bool authenticated = false;
    std::string name;
    std::uint64_t last_seq = 0;
  };

  void drop(ConnId conn);

  ExportConfig config_;
  std::unique_ptr<Listener> listener_;
  DirectoryStore store_;
  std::map<ConnId, Session> sessions_;
  VolumeRpcHandler volume_handler_;
  std::uint64_t served_ = 0;
};

}  // namespace taskmesh::netfs
