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

#include "taskmesh/sim_backend.hpp"

#include <algorithm>

namespace taskmesh {

SimBackend::SimBackend(sim::Network& network, const TaskRegistry& registry,
                       TraceSink* trace, SimBackendOptions options)
    : network_(network),
      registry_(registry),
      trace_(trace),
      options_(std::move(options)) {
  if (options_.nodes.empty()) throw InvalidConfig("sim backend needs a node");
}

InstanceId SimBackend::create_instance(const TaskSpec& spec,
                                       const std::string& parent_endpoint,
                                       const Env& env) {
  if (options_.refuse) throw SpawnRejected("backend refuses new instances");
  auto& kernel = network_.kernel();

  std::string node;
  InstanceId id;
  {
    std::lock_guard lock(mutex_);
    auto load = [&](const std::string& label) {
      return std::count_if(instances_.begin(), instances_.end(), [&](auto& kv) {
        const auto& inst = kv.second;
        return inst.info.node == label && !inst.destroyed &&
               !is_terminal(inst.info.state);
      });
    };
    if (spec.placement) {
      if (std::find(options_.nodes.begin(), options_.nodes.end(),
                    *spec.placement) == options_.nodes.end()) {
        throw UnknownNode("no simulated node labelled '" + *spec.placement + "'");
      }
      node = *spec.placement;
    } else {
      node = *std::min_element(
          options_.nodes.begin(), options_.nodes.end(),
          [&](const auto& a, const auto& b) { return load(a) < load(b); });
    }
    if (static_cast<std::size_t>(load(node)) >= options_.capacity) {
      throw CapacityExceeded("node " + node + " is at capacity");
    }
    id = InstanceId{"sim-" + std::to_string(++next_)};
    Instance inst;
    inst.info = {id, spec.id, node, TaskState::scheduled};
    instances_.emplace(id, std::move(inst));
  }

  if (options_.provision_delay > Nanos::zero()) {
    kernel.sleep_for(options_.provision_delay);
  }

  Env full = env;
  full[kEnvParent] = parent_endpoint;
  auto body = [this, id, node, full] {
    auto host = network_.host(node);
    int status = kServeFailed;
    {
      std::lock_guard lock(mutex_);
      auto& inst = instances_.at(id);
      if (inst.info.state == TaskState::scheduled) {
        inst.info.state = TaskState::running;
      }
    }
    try {
      status = serve_task(registry_, serve_config_from_env(full), *host, *this,
                          trace_);
    } catch (const InvalidConfig&) {
      status = kServeFailed;
    }
    std::lock_guard lock(mutex_);
    auto& inst = instances_.at(id);
    inst.exit_status = status;
    if (!is_terminal(inst.info.state)) {
      inst.info.state =
          status == kServeOk ? TaskState::completed : TaskState::failed;
    }
  };
  auto actor = kernel.spawn("task " + spec.id.str(), std::move(body));
  std::lock_guard lock(mutex_);
  instances_.at(id).actor = actor;
  return id;
}

void SimBackend::destroy_instance(const InstanceId& id) {
  sim::ActorId actor = 0;
  {
    std::lock_guard lock(mutex_);
    auto it = instances_.find(id);
    if (it == instances_.end() || it->second.destroyed) {
      throw UnknownInstance("no instance " + id.value);
    }
    auto& inst = it->second;
    inst.destroyed = true;
    if (!is_terminal(inst.info.state)) {
      inst.info.state = transition(inst.info.state, LifecycleEvent::cancel);
      actor = inst.actor;
    }
  }
  if (actor != 0) network_.kernel().kill(actor);
}

void SimBackend::fail_node(const std::string& node) {
  if (std::find(options_.nodes.begin(), options_.nodes.end(), node) ==
      options_.nodes.end()) {
    throw UnknownNode("no simulated node labelled '" + node + "'");
  }
  std::vector<sim::ActorId> victims;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, inst] : instances_) {
      if (inst.info.node != node || inst.destroyed ||
          is_terminal(inst.info.state)) {
        continue;
      }
      inst.info.state = TaskState::failed;
      victims.push_back(inst.actor);
    }
  }
  for (auto actor : victims) network_.kernel().kill(actor);
}

std::vector<InstanceInfo> SimBackend::list_instances() const {
  std::lock_guard lock(mutex_);
  std::vector<InstanceInfo> out;
  for (const auto& [id, inst] : instances_) {
    if (!inst.destroyed) out.push_back(inst.info);
  }
  return out;
}

bool SimBackend::was_destroyed(const InstanceId& id) const {
  std::lock_guard lock(mutex_);
  auto it = instances_.find(id);
  return it != instances_.end() && it->second.destroyed;
}

std::optional<int> SimBackend::exit_status(const InstanceId& id) const {
  std::lock_guard lock(mutex_);
  auto it = instances_.find(id);
  if (it == instances_.end()) return std::nullopt;
  return it->second.exit_status;
}

std::uint64_t SimBackend::created() const {
  std::lock_guard lock(mutex_);
  return next_;
}

}  // namespace taskmesh
