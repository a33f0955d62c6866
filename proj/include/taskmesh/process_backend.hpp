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

#include <sys/types.h>

#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "taskmesh/backend.hpp"

namespace taskmesh {

struct ProcessBackendOptions {
  // Binary launched for every instance, as `<executable> serve-task`.
  std::filesystem::path executable;
  // Passed on to children as TASKMESH_TRACE_DIR.
  std::optional<std::filesystem::path> trace_dir;
};

// One OS process per instance on this machine. A reaper thread collects
// exit statuses; destroy_instance sends SIGKILL.
class ProcessBackend final : public Backend {
 public:
  explicit ProcessBackend(ProcessBackendOptions options);
  ~ProcessBackend() override;

  ProcessBackend(const ProcessBackend&) = delete;
  ProcessBackend& operator=(const ProcessBackend&) = delete;

  InstanceId create_instance(const TaskSpec& spec,
                             const std::string& parent_endpoint,
                             const Env& env) override;
  void destroy_instance(const InstanceId& id) override;
  std::vector<InstanceInfo> list_instances() const override;
  bool was_destroyed(const InstanceId& id) const override;

  std::optional<pid_t> pid_of(const InstanceId& id) const;

 private:
  struct Instance {
    InstanceInfo info;
    pid_t pid = -1;
    bool exited = false;
    bool destroyed = false;
  };

  void reap(std::stop_token stop);

  ProcessBackendOptions options_;
  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  std::uint64_t next_ = 0;
  std::map<InstanceId, Instance> instances_;
  std::vector<pid_t> orphans_;  // destroyed but not yet reaped
  std::jthread reaper_;
};

}  // namespace taskmesh
