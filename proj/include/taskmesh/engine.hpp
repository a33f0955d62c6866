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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "taskmesh/fs_server.hpp"
#include "taskmesh/process_backend.hpp"
#include "taskmesh/runtime.hpp"
#include "taskmesh/sim.hpp"
#include "taskmesh/sim_backend.hpp"
#include "taskmesh/trace.hpp"

// Drivers that run one workflow from the local machine: the caller plays
// the root runtime, spawns a single top-level task, and waits for it.
namespace taskmesh {

// Identity of the local driver, parent of every top-level task.
TaskId driver_id();
// Top-level spec with a fixed id, so runs are reproducible.
TaskSpec top_level_spec(std::string entrypoint, Inputs inputs = {});

struct WorkflowRun {
  TaskResult result;
  std::vector<LogLine> logs;
  std::vector<TraceEvent> trace;
  Nanos elapsed{0};  // virtual under simulation
};

struct SimRunOptions {
  std::uint64_t seed = 1;
  sim::NetworkProfile profile;
  SimBackendOptions backend;
  // Node the driver and the export run on.
  std::string local_node = "local";
  // Served from the driver's node; the top-level task gets a fresh volume
  // on it as its workspace.
  std::optional<netfs::ExportConfig> export_config;
  std::optional<Nanos> timeout;
};

// Throws whatever spawning throws (PreconditionViolation, UnknownNode, ...).
WorkflowRun run_workflow_sim(const TaskRegistry& registry, const TaskSpec& spec,
                             const SimRunOptions& options = {});

struct ProcessRunOptions {
  std::filesystem::path executable;
  // Collects child traces; a temporary directory when unset.
  std::optional<std::filesystem::path> trace_dir;
  WorkspacePublisher publish_workspace;
  std::optional<Nanos> timeout;
  std::function<void(const TaskId&, const LogLine&)> on_log;
};

WorkflowRun run_workflow_process(const TaskSpec& spec,
                                 const ProcessRunOptions& options);

}  // namespace taskmesh
