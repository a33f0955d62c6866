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

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "taskmesh/backend.hpp"
#include "taskmesh/runtime.hpp"
#include "taskmesh/sim.hpp"

namespace taskmesh {

struct SimBackendOptions {
  std::vector<std::string> nodes{"node-a", "node-b"};
  // Non-terminal instances allowed per node.
  std::size_t capacity = 64;
  // Virtual time create_instance takes before returning.
  Nanos provision_delay{0};
  // Reject every create_instance with SpawnRejected.
  bool refuse = false;
};

// Runs each instance as an actor on the simulated network, placed on a
// named node. Must be driven from inside kernel actors.
class SimBackend final : public Backend {
 public:
  SimBackend(sim::Network& network, const TaskRegistry& registry,
             TraceSink* trace = nullptr, SimBackendOptions options = {});

  InstanceId create_instance(const TaskSpec& spec,
                             const std::string& parent_endpoint,
                             const Env& env) override;
  void destroy_instance(const InstanceId& id) override;
  std::vector<InstanceInfo> list_instances() const override;
  bool was_destroyed(const InstanceId& id) const override;

  // Simulated host death: every instance on `node` stops without a
  // terminal frame. Throws UnknownNode.
  void fail_node(const std::string& node);

  // Exit status of a finished instance's serve_task.
  std::optional<int> exit_status(const InstanceId& id) const;
  std::uint64_t created() const;

 private:
  struct Instance {
    InstanceInfo info;
    sim::ActorId actor = 0;
    std::optional<int> exit_status;
    bool destroyed = false;
  };

  sim::Network& network_;
  const TaskRegistry& registry_;
  TraceSink* trace_;
  SimBackendOptions options_;

  mutable std::mutex mutex_;
  std::uint64_t next_ = 0;
  std::map<InstanceId, Instance> instances_;
};

}  // namespace taskmesh
