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

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskmesh/backend.hpp"
#include "taskmesh/fs_client.hpp"
#include "taskmesh/task_model.hpp"
#include "taskmesh/trace.hpp"
#include "taskmesh/transport.hpp"
#include "taskmesh/wire.hpp"

namespace taskmesh {

inline constexpr Nanos kDefaultAckTimeout = std::chrono::seconds(10);

struct LogLine {
  wire::LogStream stream = wire::LogStream::out;
  std::string text;

  bool operator==(const LogLine&) const = default;
};

namespace detail {
struct HandleState;
}

// A spawned child as seen by its parent.
class TaskHandle {
 public:
  TaskHandle() = default;

  bool valid() const noexcept { return state_ != nullptr; }
  const TaskId& task() const;
  const InstanceId& instance() const;
  TaskState state() const;
  std::vector<LogLine> logs() const;

 private:
  friend class Runtime;
  explicit TaskHandle(std::shared_ptr<detail::HandleState> state)
      : state_(std::move(state)) {}

  std::shared_ptr<detail::HandleState> state_;
};

// Resolves a workspace volume to the mount a child should use.
using WorkspacePublisher =
    std::function<netfs::MountSpec(const std::string& volume, const TaskId& task)>;

struct RuntimeOptions {
  Nanos ack_timeout = kDefaultAckTimeout;
  // Seeds the per-child bearer tokens.
  std::uint64_t token_seed = 0;
  // Used for children whose spec names a workspace.
  WorkspacePublisher publish_workspace;
  // This task's own workspace, inherited by children naming the same volume.
  std::optional<std::string> own_workspace;
  std::optional<netfs::MountSpec> own_mount;
  // When set, awaits wake up this often to notice children that died
  // before connecting. Leave unset under simulation.
  std::optional<Nanos> liveness_poll;
  std::function<void(const TaskId&, const LogLine&)> on_log;
};

// Spawns children straight through the backend and receives their frames
// on a listener of its own. Safe to share between threads: one awaiting
// thread pumps the listener while others wait for it.
class Runtime {
 public:
  Runtime(TaskId self, Transport& transport, Backend& backend,
          TraceSink* trace = nullptr, RuntimeOptions options = {});
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const TaskId& self() const noexcept { return self_; }

  // A spec for the next child: derived id, parent = self, name = entrypoint.
  TaskSpec child_spec(std::string entrypoint, Inputs inputs = {});

  // Throws PreconditionViolation (nothing reaches the backend),
  // SpawnRejected / UnknownNode / CapacityExceeded from the backend, and
  // Timeout when the backend takes longer than ack_timeout.
  TaskHandle spawn(const TaskSpec& spec);

  // Blocks until the child's terminal frame or connection loss. Throws
  // Timeout; the handle stays awaitable.
  TaskResult await_result(const TaskHandle& handle,
                          std::optional<Nanos> timeout = std::nullopt);

  // Next unread log line of `handle`; nullopt on timeout or once the child
  // is terminal and everything was read.
  std::optional<LogLine> next_log(const TaskHandle& handle,
                                  std::optional<Nanos> timeout = std::nullopt);

  // Destroys the child's instance. The handle turns Canceled once the
  // connection close is observed.
  void cancel(const TaskHandle& handle);

  // Address children dial; listens on first use.
  std::string endpoint();

 private:
  using Ready = std::function<bool()>;

  // Pumps until `ready` holds or the deadline passes. Returns ready().
  bool pump_until(const Ready& ready, std::optional<Nanos> deadline);
  void handle_event(ListenerEvent event);
  void check_liveness();
  void record(Direction direction, const std::string& peer,
              const wire::Message& message);
  std::string token_for(const TaskId& task) const;

  TaskId self_;
  Transport& transport_;
  Backend& backend_;
  TraceSink* trace_;
  RuntimeOptions options_;

  std::mutex mutex_;
  std::condition_variable cv_;
  bool pumping_ = false;
  std::unique_ptr<Listener> listener_;
  std::uint64_t next_child_ = 0;
  std::map<TaskId, std::shared_ptr<detail::HandleState>> children_;
  std::map<ConnId, std::shared_ptr<detail::HandleState>> by_conn_;
};

class TaskContext;
using TaskBody = std::function<Document(TaskContext&)>;

// Entrypoint name -> body. Filled at startup and read-only afterwards.
class TaskRegistry {
 public:
  TaskRegistry& add(std::string name, TaskBody body);
  const TaskBody* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, TaskBody, std::less<>> bodies_;
};

// Everything a task instance learns from its spawner.
struct ServeConfig {
  TaskSpec spec;
  std::string parent_endpoint;
  std::string token;
  std::optional<netfs::MountSpec> mount;
  std::optional<std::string> trace_dir;
};

// Throws InvalidConfig when a variable is missing or malformed.
ServeConfig serve_config_from_env(const Env& env);
Env serve_env(const ServeConfig& config);

// Exit statuses of serve_task.
inline constexpr int kServeOk = 0;
inline constexpr int kServeFailed = 1;
inline constexpr int kServeConnectionLost = 3;

struct ServeOptions {
  std::optional<Nanos> liveness_poll;
};

// Runs one task: hello, status(running), body, then return or fail, all
// to the parent. Child spawning from the body goes straight to `backend`.
int serve_task(const TaskRegistry& registry, const ServeConfig& config,
               Transport& transport, Backend& backend,
               TraceSink* trace = nullptr, ServeOptions options = {});

// The API a task body sees.
class TaskContext {
 public:
  const TaskSpec& spec() const noexcept { return config_.spec; }
  const TaskId& id() const noexcept { return config_.spec.id; }
  // Input `key`; throws TaskFailure("missing-input") when absent.
  const Document& input(const std::string& key) const;
  const Document* find_input(const std::string& key) const;

  void log(std::string_view text, wire::LogStream stream = wire::LogStream::out);

  Runtime& runtime();
  TaskHandle spawn(const TaskSpec& spec) { return runtime().spawn(spec); }
  TaskResult await(const TaskHandle& handle) {
    return runtime().await_result(handle);
  }
  // Spawn + await; a failed child surfaces as TaskFailure with its code.
  Document call(std::string entrypoint, Inputs inputs = {});

  // This task's published workspace. Throws TaskFailure("no-workspace").
  netfs::Workspace& workspace();
  Transport& transport() noexcept { return transport_; }

  Nanos now() const { return transport_.now(); }
  void sleep_for(Nanos duration) { transport_.sleep_for(duration); }
  // Blocks until the parent goes away (throws ConnectionLost then).
  void hold();

 private:
  friend int serve_task(const TaskRegistry&, const ServeConfig&, Transport&,
                        Backend&, TraceSink*, ServeOptions);
  TaskContext(const ServeConfig& config, Connection& upstream,
              Transport& transport, Backend& backend, TraceSink* trace,
              ServeOptions options);
  void send_upstream(const wire::Message& message);

  const ServeConfig& config_;
  Connection& upstream_;
  Transport& transport_;
  Backend& backend_;
  TraceSink* trace_;
  ServeOptions options_;
  std::mutex send_mutex_;
  std::unique_ptr<Runtime> runtime_;
  std::unique_ptr<netfs::Workspace> workspace_;
};

}  // namespace taskmesh
