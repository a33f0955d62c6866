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

#include "taskmesh/runtime.hpp"

#include <algorithm>
#include <random>

#include "taskmesh/document.hpp"

namespace taskmesh {

namespace detail {

struct HandleState {
  TaskId task;
  InstanceId instance;
  std::string token;

  mutable std::mutex mutex;
  TaskState state = TaskState::scheduled;
  std::optional<ConnId> conn;
  std::optional<TaskResult> result;
  std::vector<LogLine> logs;
  std::size_t log_cursor = 0;

  // Caller holds `mutex`.
  void finish(LifecycleEvent event, std::variant<Document, ErrorInfo> outcome) {
    if (is_terminal(state)) return;
    if (state == TaskState::scheduled && event == LifecycleEvent::complete) {
      state = transition(state, LifecycleEvent::start);
    }
    state = transition(state, event);
    result = TaskResult{task, std::move(outcome)};
  }
};

}  // namespace detail

namespace {

std::string subject_of(const wire::Message& message) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, wire::SpawnRequest>) {
          return m.spec.id.str();
        } else if constexpr (requires { m.task_id; }) {
          return m.task_id;
        } else {
          return {};
        }
      },
      message);
}

void record_frame(TraceSink* trace, Nanos time, const std::string& runtime,
                  Direction direction, const std::string& peer,
                  const wire::Message& message) {
  if (trace == nullptr) return;
  TraceEvent ev;
  ev.time = time;
  ev.runtime = runtime;
  ev.direction = direction;
  ev.peer = peer;
  ev.type = std::string(wire::type_name(message));
  ev.subject = subject_of(message);
  if (auto* req = std::get_if<wire::SpawnRequest>(&message)) {
    ev.parent = req->spec.parent ? req->spec.parent->str() : "";
  }
  trace->record(ev);
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

const TaskId& TaskHandle::task() const { return state_->task; }

const InstanceId& TaskHandle::instance() const { return state_->instance; }

TaskState TaskHandle::state() const {
  std::lock_guard lock(state_->mutex);
  return state_->state;
}

std::vector<LogLine> TaskHandle::logs() const {
  std::lock_guard lock(state_->mutex);
  return state_->logs;
}

Runtime::Runtime(TaskId self, Transport& transport, Backend& backend,
                 TraceSink* trace, RuntimeOptions options)
    : self_(std::move(self)),
      transport_(transport),
      backend_(backend),
      trace_(trace),
      options_(std::move(options)) {
  if (options_.token_seed == 0) options_.token_seed = fresh_seed();
}

Runtime::~Runtime() {
  std::vector<InstanceId> live;
  for (auto& [id, child] : children_) {
    std::lock_guard lock(child->mutex);
    if (!is_terminal(child->state)) live.push_back(child->instance);
  }
  for (const auto& instance : live) {
    try {
      backend_.destroy_instance(instance);
    } catch (const Error&) {
    }
  }
}

std::string Runtime::endpoint() {
  std::lock_guard lock(mutex_);
  if (!listener_) listener_ = transport_.listen("");
  return listener_->address();
}

std::string Runtime::token_for(const TaskId& task) const {
  return TaskId::derive(task, options_.token_seed).str();
}

TaskSpec Runtime::child_spec(std::string entrypoint, Inputs inputs) {
  std::uint64_t index;
  {
    std::lock_guard lock(mutex_);
    index = next_child_++;
  }
  TaskSpec spec;
  spec.id = TaskId::derive(self_, index);
  spec.name = entrypoint;
  spec.entrypoint = std::move(entrypoint);
  spec.inputs = std::move(inputs);
  spec.parent = self_;
  return spec;
}

void Runtime::record(Direction direction, const std::string& peer,
                     const wire::Message& message) {
  record_frame(trace_, transport_.now(), self_.str(), direction, peer, message);
}

TaskHandle Runtime::spawn(const TaskSpec& spec) {
  auto violations = validate_spec(spec);
  if (spec.parent != self_) {
    violations.push_back({"foreign-parent", "spec.parent must be the spawner"});
  }
  {
    std::lock_guard lock(mutex_);
    if (children_.contains(spec.id)) {
      violations.push_back({"duplicate-id", "task id already spawned"});
    }
  }
  if (!violations.empty()) throw PreconditionViolation(std::move(violations));

  auto address = endpoint();
  auto state = std::make_shared<detail::HandleState>();
  state->task = spec.id;
  state->token = token_for(spec.id);

  Env env;
  env[kEnvParent] = address;
  env[kEnvTaskId] = spec.id.str();
  env[kEnvToken] = state->token;
  env[kEnvSpec] = canonical_text(to_document(spec));
  if (spec.workspace) {
    std::optional<netfs::MountSpec> mount;
    if (options_.own_workspace == spec.workspace && options_.own_mount) {
      mount = options_.own_mount;
    } else if (options_.publish_workspace) {
      mount = options_.publish_workspace(*spec.workspace, spec.id);
    } else {
      throw SpawnRejected("workspace " + *spec.workspace +
                          " is not available to this runtime");
    }
    env[kEnvMount] = canonical_text(to_document(*mount));
  }

  {
    std::lock_guard lock(mutex_);
    children_[spec.id] = state;
  }
  auto forget = [&] {
    std::lock_guard lock(mutex_);
    children_.erase(spec.id);
  };

  record(Direction::sent, std::string(kBackendPeer), wire::SpawnRequest{spec});
  auto started = transport_.now();
  InstanceId instance;
  try {
    instance = backend_.create_instance(spec, address, env);
  } catch (...) {
    forget();
    throw;
  }
  if (transport_.now() - started > options_.ack_timeout) {
    forget();
    try {
      backend_.destroy_instance(instance);
    } catch (const Error&) {
    }
    throw Timeout("no spawn_ack for " + spec.id.str() + " within the ack timeout");
  }
  record(Direction::received, std::string(kBackendPeer),
         wire::SpawnAck{spec.id.str()});
  state->instance = std::move(instance);
  return TaskHandle(state);
}

bool Runtime::pump_until(const Ready& ready, std::optional<Nanos> deadline) {
  std::unique_lock lock(mutex_);
  for (;;) {
    if (ready()) return true;
    auto now = transport_.now();
    if (deadline && now >= *deadline) return false;
    if (pumping_) {
      if (deadline) {
        cv_.wait_for(lock, *deadline - now);
      } else {
        cv_.wait(lock);
      }
      continue;
    }
    if (!listener_) return ready();
    pumping_ = true;
    lock.unlock();
    std::optional<Nanos> slice;
    if (deadline) slice = *deadline - now;
    if (options_.liveness_poll) {
      slice = slice ? std::min(*slice, *options_.liveness_poll)
                    : *options_.liveness_poll;
    }
    try {
      auto event = listener_->next(slice);
      if (event) {
        handle_event(std::move(*event));
      } else if (options_.liveness_poll) {
        check_liveness();
      }
    } catch (...) {
      lock.lock();
      pumping_ = false;
      cv_.notify_all();
      throw;
    }
    lock.lock();
    pumping_ = false;
    cv_.notify_all();
  }
}

void Runtime::handle_event(ListenerEvent event) {
  std::shared_ptr<detail::HandleState> child;
  {
    std::lock_guard lock(mutex_);
    auto it = by_conn_.find(event.conn);
    if (it != by_conn_.end()) child = it->second;
    if (!event.message) by_conn_.erase(event.conn);
  }

  if (!event.message) {
    if (!child) return;
    bool destroyed = backend_.was_destroyed(child->instance);
    std::lock_guard lock(child->mutex);
    child->conn.reset();
    if (destroyed) {
      child->finish(LifecycleEvent::cancel,
                    ErrorInfo{"canceled", "task instance was destroyed"});
    } else {
      child->finish(LifecycleEvent::fail,
                    ErrorInfo{"connection-lost",
                              "connection to the task closed before it finished"});
    }
    return;
  }

  const auto& message = *event.message;
  if (auto* hello = std::get_if<wire::Hello>(&message)) {
    if (child) return;
    auto id = TaskId::try_parse(hello->task_id);
    std::shared_ptr<detail::HandleState> candidate;
    if (id) {
      std::lock_guard lock(mutex_);
      auto it = children_.find(*id);
      if (it != children_.end()) candidate = it->second;
    }
    bool accepted = false;
    if (candidate) {
      std::lock_guard lock(candidate->mutex);
      if (!candidate->conn && !is_terminal(candidate->state) &&
          hello->token == candidate->token) {
        candidate->conn = event.conn;
        accepted = true;
      }
    }
    if (!accepted) {
      listener_->close(event.conn);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      by_conn_[event.conn] = candidate;
    }
    record(Direction::received, hello->task_id, message);
    return;
  }

  if (!child) {
    listener_->close(event.conn);
    return;
  }
  record(Direction::received, child->task.str(), message);

  bool terminal = false;
  std::optional<LogLine> line;
  {
    std::lock_guard lock(child->mutex);
    if (is_terminal(child->state)) return;
    if (auto* status = std::get_if<wire::Status>(&message)) {
      if (status->state == TaskState::running &&
          child->state == TaskState::scheduled) {
        child->state = transition(child->state, LifecycleEvent::start);
      }
    } else if (auto* log = std::get_if<wire::Log>(&message)) {
      line = LogLine{log->stream, log->text};
      child->logs.push_back(*line);
    } else if (auto* ret = std::get_if<wire::Return>(&message)) {
      child->finish(LifecycleEvent::complete, ret->value);
      terminal = true;
    } else if (auto* fail = std::get_if<wire::Fail>(&message)) {
      child->finish(LifecycleEvent::fail, fail->error);
      terminal = true;
    } else {
      // Children only report; anything else ends the conversation.
      child->finish(LifecycleEvent::fail,
                    ErrorInfo{"protocol-error",
                              std::string("unexpected ") +
                                  std::string(wire::type_name(message)) +
                                  " from a child"});
      terminal = true;
    }
    if (terminal) child->conn.reset();
  }
  if (terminal) {
    {
      std::lock_guard lock(mutex_);
      by_conn_.erase(event.conn);
    }
    listener_->close(event.conn);
  }
  if (line && options_.on_log) options_.on_log(child->task, *line);
}

void Runtime::check_liveness() {
  std::vector<std::shared_ptr<detail::HandleState>> waiting;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, child] : children_) {
      std::lock_guard child_lock(child->mutex);
      if (!child->conn && !is_terminal(child->state) &&
          !child->instance.value.empty()) {
        waiting.push_back(child);
      }
    }
  }
  if (waiting.empty()) return;
  auto instances = backend_.list_instances();
  for (auto& child : waiting) {
    auto it = std::find_if(instances.begin(), instances.end(),
                           [&](const InstanceInfo& info) {
                             return info.instance == child->instance;
                           });
    bool gone = it == instances.end() || is_terminal(it->state);
    if (!gone) continue;
    bool destroyed = backend_.was_destroyed(child->instance);
    std::lock_guard lock(child->mutex);
    if (child->conn) continue;
    if (destroyed) {
      child->finish(LifecycleEvent::cancel,
                    ErrorInfo{"canceled", "task instance was destroyed"});
    } else {
      child->finish(LifecycleEvent::fail,
                    ErrorInfo{"connection-lost",
                              "task instance exited without connecting"});
    }
  }
}

TaskResult Runtime::await_result(const TaskHandle& handle,
                                 std::optional<Nanos> timeout) {
  if (!handle.valid()) throw std::invalid_argument("await on an empty handle");
  auto& child = *handle.state_;
  std::optional<Nanos> deadline;
  if (timeout) deadline = transport_.now() + *timeout;
  auto ready = [&] {
    std::lock_guard lock(child.mutex);
    return child.result.has_value();
  };
  if (!pump_until(ready, deadline)) {
    throw Timeout("task " + child.task.str() + " still running");
  }
  std::lock_guard lock(child.mutex);
  return *child.result;
}

std::optional<LogLine> Runtime::next_log(const TaskHandle& handle,
                                         std::optional<Nanos> timeout) {
  if (!handle.valid()) throw std::invalid_argument("next_log on an empty handle");
  auto& child = *handle.state_;
  std::optional<Nanos> deadline;
  if (timeout) deadline = transport_.now() + *timeout;
  auto ready = [&] {
    std::lock_guard lock(child.mutex);
    return child.log_cursor < child.logs.size() || is_terminal(child.state);
  };
  pump_until(ready, deadline);
  std::lock_guard lock(child.mutex);
  if (child.log_cursor < child.logs.size()) return child.logs[child.log_cursor++];
  return std::nullopt;
}

void Runtime::cancel(const TaskHandle& handle) {
  if (!handle.valid()) throw std::invalid_argument("cancel on an empty handle");
  backend_.destroy_instance(handle.state_->instance);
}

TaskRegistry& TaskRegistry::add(std::string name, TaskBody body) {
  bodies_[std::move(name)] = std::move(body);
  return *this;
}

const TaskBody* TaskRegistry::find(std::string_view name) const {
  auto it = bodies_.find(name);
  return it == bodies_.end() ? nullptr : &it->second;
}

std::vector<std::string> TaskRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, body] : bodies_) out.push_back(name);
  return out;
}

ServeConfig serve_config_from_env(const Env& env) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = env.find(key);
    if (it == env.end() || it->second.empty()) {
      throw InvalidConfig(std::string(key) + " is not set");
    }
    return it->second;
  };
  ServeConfig config;
  try {
    config.spec = task_spec_from_document(parse_document(get(kEnvSpec)));
  } catch (const MalformedPayload& e) {
    throw InvalidConfig(std::string(kEnvSpec) + ": " + e.what());
  }
  auto id = TaskId::try_parse(get(kEnvTaskId));
  if (!id || *id != config.spec.id) {
    throw InvalidConfig(std::string(kEnvTaskId) + " does not match the spec");
  }
  config.parent_endpoint = get(kEnvParent);
  config.token = get(kEnvToken);
  if (auto it = env.find(kEnvMount); it != env.end() && !it->second.empty()) {
    try {
      config.mount = netfs::mount_spec_from_document(parse_document(it->second));
    } catch (const MalformedPayload& e) {
      throw InvalidConfig(std::string(kEnvMount) + ": " + e.what());
    }
  }
  if (auto it = env.find(kEnvTraceDir); it != env.end() && !it->second.empty()) {
    config.trace_dir = it->second;
  }
  return config;
}

Env serve_env(const ServeConfig& config) {
  Env env;
  env[kEnvParent] = config.parent_endpoint;
  env[kEnvTaskId] = config.spec.id.str();
  env[kEnvToken] = config.token;
  env[kEnvSpec] = canonical_text(to_document(config.spec));
  if (config.mount) env[kEnvMount] = canonical_text(to_document(*config.mount));
  if (config.trace_dir) env[kEnvTraceDir] = *config.trace_dir;
  return env;
}

TaskContext::TaskContext(const ServeConfig& config, Connection& upstream,
                         Transport& transport, Backend& backend,
                         TraceSink* trace, ServeOptions options)
    : config_(config),
      upstream_(upstream),
      transport_(transport),
      backend_(backend),
      trace_(trace),
      options_(options) {}

void TaskContext::send_upstream(const wire::Message& message) {
  std::lock_guard lock(send_mutex_);
  auto parent = config_.spec.parent ? config_.spec.parent->str() : "";
  record_frame(trace_, transport_.now(), id().str(), Direction::sent, parent,
               message);
  upstream_.send(message);
}

const Document* TaskContext::find_input(const std::string& key) const {
  auto it = config_.spec.inputs.find(key);
  return it == config_.spec.inputs.end() ? nullptr : &it->second;
}

const Document& TaskContext::input(const std::string& key) const {
  if (auto* value = find_input(key)) return *value;
  throw TaskFailure("missing-input", "input '" + key + "' was not supplied");
}

void TaskContext::log(std::string_view text, wire::LogStream stream) {
  send_upstream(wire::Log{id().str(), stream, std::string(text)});
}

Runtime& TaskContext::runtime() {
  if (!runtime_) {
    RuntimeOptions opts;
    opts.own_workspace = config_.spec.workspace;
    opts.own_mount = config_.mount;
    opts.liveness_poll = options_.liveness_poll;
    runtime_ = std::make_unique<Runtime>(id(), transport_, backend_, trace_,
                                         std::move(opts));
  }
  return *runtime_;
}

Document TaskContext::call(std::string entrypoint, Inputs inputs) {
  auto& rt = runtime();
  auto handle = rt.spawn(rt.child_spec(std::move(entrypoint), std::move(inputs)));
  auto result = rt.await_result(handle);
  if (!result.ok()) throw TaskFailure(result.error().code, result.error().message);
  return result.value();
}

netfs::Workspace& TaskContext::workspace() {
  if (!workspace_) {
    if (!config_.mount) {
      throw TaskFailure("no-workspace", "task has no published workspace");
    }
    auto session = netfs::FsSession::connect(transport_, config_.mount->endpoint,
                                             config_.mount->token, id().str());
    workspace_ = std::make_unique<netfs::Workspace>(std::move(session),
                                                    config_.mount->mount_path);
  }
  return *workspace_;
}

void TaskContext::hold() {
  for (;;) upstream_.receive(std::nullopt);
}

int serve_task(const TaskRegistry& registry, const ServeConfig& config,
               Transport& transport, Backend& backend, TraceSink* trace,
               ServeOptions options) {
  const auto& spec = config.spec;
  const auto self = spec.id.str();
  std::unique_ptr<Connection> upstream;
  try {
    upstream = transport.connect(config.parent_endpoint);
  } catch (const Unreachable&) {
    return kServeConnectionLost;
  }

  int status = kServeFailed;
  try {
    TaskContext ctx(config, *upstream, transport, backend, trace, options);
    ctx.send_upstream(wire::Hello{self, config.token});
    const TaskBody* body = registry.find(spec.entrypoint);
    if (body == nullptr) {
      ctx.send_upstream(wire::Fail{
          self, {"unknown-entrypoint",
                 "no task registered as '" + spec.entrypoint + "'"}});
    } else {
      ctx.send_upstream(wire::Status{self, TaskState::running});
      std::optional<Document> value;
      ErrorInfo error;
      try {
        value = (*body)(ctx);
        check_encodable(*value);
      } catch (const Error& e) {
        value.reset();
        error = {e.code(), e.what()};
      } catch (const std::exception& e) {
        value.reset();
        error = {"task-failed", e.what()};
      }
      if (value) {
        ctx.send_upstream(wire::Return{self, std::move(*value)});
        status = kServeOk;
      } else {
        ctx.send_upstream(wire::Fail{self, std::move(error)});
      }
    }
  } catch (const ConnectionLost&) {
    status = kServeConnectionLost;
  }
  upstream->close();
  return status;
}

}  // namespace taskmesh
