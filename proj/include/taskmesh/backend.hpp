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

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "taskmesh/task_model.hpp"

namespace taskmesh {

using Env = std::map<std::string, std::string>;

// Variables handed to every task instance.
inline constexpr char kEnvParent[] = "TASKMESH_PARENT";
inline constexpr char kEnvTaskId[] = "TASKMESH_TASK_ID";
inline constexpr char kEnvToken[] = "TASKMESH_TOKEN";
inline constexpr char kEnvSpec[] = "TASKMESH_SPEC";
// Canonical MountSpec text when the task has a published workspace.
inline constexpr char kEnvMount[] = "TASKMESH_MOUNT";
// Directory for per-task JSONL trace files (process backend).
inline constexpr char kEnvTraceDir[] = "TASKMESH_TRACE_DIR";

struct InstanceId {
  std::string value;

  auto operator<=>(const InstanceId&) const = default;
};

struct InstanceInfo {
  InstanceId instance;
  TaskId task;
  std::string node;
  TaskState state = TaskState::scheduled;

  bool operator==(const InstanceInfo&) const = default;
};

// Where task instances run. Implementations are thread-safe.
class Backend {
 public:
  virtual ~Backend() = default;

  // Starts serve_task for `spec` in a fresh executor that will dial
  // `parent_endpoint`. Throws UnknownNode, CapacityExceeded, SpawnRejected.
  virtual InstanceId create_instance(const TaskSpec& spec,
                                     const std::string& parent_endpoint,
                                     const Env& env) = 0;
  // Throws UnknownInstance. Destroying a finished instance only removes it.
  virtual void destroy_instance(const InstanceId& id) = 0;
  // Instances not yet destroyed or reaped after finishing.
  virtual std::vector<InstanceInfo> list_instances() const = 0;
  // True once destroy_instance was called for `id`.
  virtual bool was_destroyed(const InstanceId& id) const = 0;
};

}  // namespace taskmesh
