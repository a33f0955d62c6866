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

#include "taskmesh/process_backend.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

extern char** environ;

namespace taskmesh {

namespace {

constexpr auto kReapInterval = std::chrono::milliseconds(10);

bool is_taskmesh_var(std::string_view entry) {
  return entry.starts_with("TASKMESH_");
}

}  // namespace

ProcessBackend::ProcessBackend(ProcessBackendOptions options)
    : options_(std::move(options)) {
  if (options_.executable.empty()) {
    throw InvalidConfig("process backend needs an executable");
  }
  reaper_ = std::jthread([this](std::stop_token stop) { reap(stop); });
}

ProcessBackend::~ProcessBackend() {
  std::vector<pid_t> live;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, inst] : instances_) {
      if (!inst.exited) live.push_back(inst.pid);
    }
    live.insert(live.end(), orphans_.begin(), orphans_.end());
  }
  for (auto pid : live) ::kill(pid, SIGKILL);
  reaper_.request_stop();
  cv_.notify_all();
  reaper_.join();
  for (auto pid : live) {
    while (::waitpid(pid, nullptr, 0) < 0 && errno == EINTR) {
    }
  }
}

InstanceId ProcessBackend::create_instance(const TaskSpec& spec,
                                           const std::string& parent_endpoint,
                                           const Env& env) {
  std::vector<std::string> entries;
  for (char** e = environ; *e != nullptr; ++e) {
    if (!is_taskmesh_var(*e)) entries.emplace_back(*e);
  }
  Env full = env;
  full[kEnvParent] = parent_endpoint;
  if (options_.trace_dir) full[kEnvTraceDir] = options_.trace_dir->string();
  for (const auto& [key, value] : full) entries.push_back(key + "=" + value);

  std::vector<char*> envp;
  for (auto& entry : entries) envp.push_back(entry.data());
  envp.push_back(nullptr);
  std::string exe = options_.executable.string();
  std::string mode = "serve-task";
  std::vector<char*> argv{exe.data(), mode.data(), nullptr};

  std::lock_guard lock(mutex_);
  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(),
                         envp.data());
  if (rc != 0) {
    throw SpawnRejected("cannot start " + exe + ": " + std::strerror(rc));
  }
  InstanceId id{"proc-" + std::to_string(++next_) + "-" + std::to_string(pid)};
  Instance inst;
  inst.info = {id, spec.id, spec.placement.value_or("local"),
               TaskState::running};
  inst.pid = pid;
  instances_.emplace(id, std::move(inst));
  return id;
}

void ProcessBackend::destroy_instance(const InstanceId& id) {
  std::lock_guard lock(mutex_);
  auto it = instances_.find(id);
  if (it == instances_.end() || it->second.destroyed) {
    throw UnknownInstance("no instance " + id.value);
  }
  auto& inst = it->second;
  inst.destroyed = true;
  if (!inst.exited) {
    ::kill(inst.pid, SIGKILL);
    inst.info.state = TaskState::canceled;
    orphans_.push_back(inst.pid);
  }
}

std::vector<InstanceInfo> ProcessBackend::list_instances() const {
  std::lock_guard lock(mutex_);
  std::vector<InstanceInfo> out;
  for (const auto& [id, inst] : instances_) {
    if (!inst.destroyed) out.push_back(inst.info);
  }
  return out;
}

bool ProcessBackend::was_destroyed(const InstanceId& id) const {
  std::lock_guard lock(mutex_);
  auto it = instances_.find(id);
  return it != instances_.end() && it->second.destroyed;
}

std::optional<pid_t> ProcessBackend::pid_of(const InstanceId& id) const {
  std::lock_guard lock(mutex_);
  auto it = instances_.find(id);
  if (it == instances_.end()) return std::nullopt;
  return it->second.pid;
}

void ProcessBackend::reap(std::stop_token stop) {
  std::unique_lock lock(mutex_);
  while (!stop.stop_requested()) {
    for (auto& [id, inst] : instances_) {
      if (inst.exited || inst.destroyed) continue;
      int status = 0;
      if (::waitpid(inst.pid, &status, WNOHANG) == inst.pid) {
        inst.exited = true;
        bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
        inst.info.state = ok ? TaskState::completed : TaskState::failed;
      }
    }
    std::erase_if(orphans_, [](pid_t pid) {
      return ::waitpid(pid, nullptr, WNOHANG) == pid;
    });
    cv_.wait_for(lock, stop, kReapInterval, [] { return false; });
  }
}

}  // namespace taskmesh
