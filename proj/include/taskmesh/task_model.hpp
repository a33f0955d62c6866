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
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taskmesh/document.hpp"
#include "taskmesh/error.hpp"

namespace taskmesh {

// 128-bit task identity, always 32 lowercase hex characters.
class TaskId {
 public:
  TaskId();

  static TaskId parse(std::string_view text);
  static std::optional<TaskId> try_parse(std::string_view text);
  static TaskId random(std::mt19937_64& rng);
  static TaskId from_seed(std::uint64_t seed);
  // Deterministic child identity; lets a parent name its children without
  // asking anybody.
  static TaskId derive(const TaskId& parent, std::uint64_t index);

  const std::string& str() const noexcept { return hex_; }

  auto operator<=>(const TaskId&) const = default;

 private:
  explicit TaskId(std::string hex) : hex_(std::move(hex)) {}

  std::string hex_;
};

using Inputs = std::map<std::string, Document>;

struct TaskSpec {
  TaskId id;
  std::string name;
  std::string entrypoint;
  Inputs inputs;
  std::optional<TaskId> parent;
  std::optional<std::string> placement;
  std::optional<std::string> workspace;

  bool operator==(const TaskSpec&) const = default;
};

enum class TaskState { created, scheduled, running, completed, failed, canceled };

enum class LifecycleEvent { schedule, start, complete, fail, cancel };

std::string_view to_string(TaskState state);
std::string_view to_string(LifecycleEvent event);
std::optional<TaskState> parse_task_state(std::string_view text);

bool is_terminal(TaskState state);

class IllegalTransition : public Error {
 public:
  IllegalTransition(TaskState from, LifecycleEvent event);

  TaskState from() const noexcept { return from_; }
  LifecycleEvent event() const noexcept { return event_; }

 private:
  TaskState from_;
  LifecycleEvent event_;
};

// Created -schedule-> Scheduled -start-> Running -return-> Completed
// Running -fail-> Failed, Scheduled -fail-> Failed (died before starting)
// any non-terminal -cancel-> Canceled
TaskState transition(TaskState state, LifecycleEvent event);

struct Violation {
  std::string code;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

using EntrypointResolver = std::function<bool(std::string_view)>;

// Empty result means the spec is valid. When a resolver is supplied an
// unresolvable entrypoint is reported as "unknown-entrypoint".
std::vector<Violation> validate_spec(const TaskSpec& spec,
                                     const EntrypointResolver& resolver = {});

class PreconditionViolation : public Error {
 public:
  explicit PreconditionViolation(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept {
    return violations_;
  }

 private:
  std::vector<Violation> violations_;
};

struct ErrorInfo {
  std::string code;
  std::string message;

  bool operator==(const ErrorInfo&) const = default;
};

struct TaskResult {
  TaskId task;
  std::variant<Document, ErrorInfo> outcome;

  bool ok() const noexcept { return outcome.index() == 0; }
  const Document& value() const { return std::get<Document>(outcome); }
  const ErrorInfo& error() const { return std::get<ErrorInfo>(outcome); }

  bool operator==(const TaskResult&) const = default;
};

Document to_document(const TaskSpec& spec);
TaskSpec task_spec_from_document(const Document& doc);
Document to_document(const ErrorInfo& error);
ErrorInfo error_info_from_document(const Document& doc);
Document to_document(const TaskResult& result);
TaskResult task_result_from_document(const Document& doc);

}  // namespace taskmesh
