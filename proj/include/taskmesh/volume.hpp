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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taskmesh/fs_protocol.hpp"
#include "taskmesh/task_model.hpp"
#include "taskmesh/transport.hpp"
#include "taskmesh/wire.hpp"

namespace taskmesh::volume {

enum class VolumeState { created, published, deleted };

std::string_view to_string(VolumeState state);

struct VolumeRecord {
  std::string id;
  std::string endpoint;
  std::string token;
  std::set<TaskId> published_to;
  VolumeState state = VolumeState::created;

  bool operator==(const VolumeRecord&) const = default;
};

// Confirms an export accepts `token`. Throws EndpointUnreachable or
// AuthRejected.
using ExportProber =
    std::function<void(const std::string& endpoint, const std::string& token)>;

// Probes over the file protocol: hello, then getattr("/").
void probe_export(Transport& transport, const std::string& endpoint,
                  const std::string& token);

// Registry of workspace volumes. Deleted records are kept so later calls
// can tell "deleted" from "never existed". All calls are atomic.
class VolumeBroker {
 public:
  explicit VolumeBroker(ExportProber prober);

  std::string create_volume(const std::string& endpoint, const std::string& token);
  // Idempotent per task. Throws UnknownVolume, VolumeDeleted.
  netfs::MountSpec publish_volume(const std::string& volume, const TaskId& task);
  // Unpublishing a task that holds no mount is a no-op. Throws UnknownVolume.
  void unpublish_volume(const std::string& volume, const TaskId& task);
  // Throws UnknownVolume, VolumeBusy. Deleting twice is a no-op.
  void delete_volume(const std::string& volume);

  std::optional<VolumeRecord> find(const std::string& volume) const;
  std::vector<VolumeRecord> records() const;

 private:
  VolumeRecord& at(const std::string& volume);

  ExportProber prober_;
  mutable std::mutex mutex_;
  std::uint64_t next_ = 0;
  std::map<std::string, VolumeRecord> volumes_;
};

// volume_rpc request -> reply or error frame.
wire::VolumeRpc handle_volume_rpc(VolumeBroker& broker, const wire::VolumeRpc& request);

// Talks volume_rpc to an export daemon. Broker errors come back as the
// matching exception type.
class VolumeClient {
 public:
  VolumeClient(Transport& transport, const std::string& endpoint,
               const std::string& token);

  std::string create_volume(const std::string& endpoint, const std::string& token);
  netfs::MountSpec publish_volume(const std::string& volume, const TaskId& task);
  void unpublish_volume(const std::string& volume, const TaskId& task);
  void delete_volume(const std::string& volume);

 private:
  Document call(const std::string& name, Document args);

  std::unique_ptr<Connection> connection_;
};

}  // namespace taskmesh::volume
