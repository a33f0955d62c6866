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

#include "taskmesh/task_model.hpp"

#include <array>
#include <cstdio>

#include "doc_fields.hpp"

namespace taskmesh {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex128(std::uint64_t hi, std::uint64_t lo) {
  std::array<char, 33> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx%016llx",
                static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return std::string(buf.data(), 32);
}

bool is_hex_id(std::string_view text) {
  if (text.size() != 32) return false;
  for (char c : text) {
    bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    if (!ok) return false;
  }
  return true;
}

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto alpha = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  };
  if (!alpha(text.front())) return false;
  for (char c : text) {
    bool ok = alpha(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

TaskId::TaskId() : hex_(32, '0') {}

TaskId TaskId::parse(std::string_view text) {
  auto id = try_parse(text);
  if (!id) {
    throw MalformedPayload("invalid task id '" + std::string(text) + "'");
  }
  return *id;
}

std::optional<TaskId> TaskId::try_parse(std::string_view text) {
  if (!is_hex_id(text)) return std::nullopt;
  return TaskId(std::string(text));
}

TaskId TaskId::random(std::mt19937_64& rng) {
  auto hi = rng();
  auto lo = rng();
  return TaskId(hex128(hi, lo));
}

TaskId TaskId::from_seed(std::uint64_t seed) {
  auto hi = splitmix(seed);
  auto lo = splitmix(hi ^ 0x5bd1e995ULL);
  return TaskId(hex128(hi, lo));
}

TaskId TaskId::derive(const TaskId& parent, std::uint64_t index) {
  auto hi = splitmix(fnv1a(parent.str(), 0xcbf29ce484222325ULL) ^
                     splitmix(index));
  auto lo = splitmix(fnv1a(parent.str(), 0x84222325cbf29ce4ULL) ^
                     splitmix(index ^ 0xa5a5a5a5a5a5a5a5ULL));
  return TaskId(hex128(hi, lo));
}

std::string_view to_string(TaskState state) {
  switch (state) {
    case TaskState::created: return "created";
    case TaskState::scheduled: return "scheduled";
    case TaskState::running: return "running";
    case TaskState::completed: return "completed";
    case TaskState::failed: return "failed";
    case TaskState::canceled: return "canceled";
  }
  return "unknown";
}

std::string_view to_string(LifecycleEvent event) {
  switch (event) {
    case LifecycleEvent::schedule: return "schedule";
    case LifecycleEvent::start: return "start";
    case LifecycleEvent::complete: return "return";
    case LifecycleEvent::fail: return "fail";
    case LifecycleEvent::cancel: return "cancel";
  }
  return "unknown";
}

std::optional<TaskState> parse_task_state(std::string_view text) {
  for (auto s : {TaskState::created, TaskState::scheduled, TaskState::running,
                 TaskState::completed, TaskState::failed,
                 TaskState::canceled}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

bool is_terminal(TaskState state) {
  return state == TaskState::completed || state == TaskState::failed ||
         state == TaskState::canceled;
}

IllegalTransition::IllegalTransition(TaskState from, LifecycleEvent event)
    : Error("illegal-transition", "no transition from " +
                                      std::string(to_string(from)) + " on " +
                                      std::string(to_string(event))),
      from_(from),
      event_(event) {}

TaskState transition(TaskState state, LifecycleEvent event) {
  using S = TaskState;
  using E = LifecycleEvent;
  if (event == E::cancel && !is_terminal(state)) return S::canceled;
  switch (state) {
    case S::created:
      if (event == E::schedule) return S::scheduled;
      break;
    case S::scheduled:
      if (event == E::start) return S::running;
      if (event == E::fail) return S::failed;
      break;
    case S::running:
      if (event == E::complete) return S::completed;
      if (event == E::fail) return S::failed;
      break;
    default:
      break;
  }
  throw IllegalTransition(state, event);
}

std::vector<Violation> validate_spec(const TaskSpec& spec,
                                     const EntrypointResolver& resolver) {
  std::vector<Violation> out;
  if (spec.name.empty()) {
    out.push_back({"empty-name", "task name is empty"});
  } else if (!is_identifier(spec.name)) {
    out.push_back({"invalid-name", "'" + spec.name + "' is not an identifier"});
  }
  if (spec.entrypoint.empty()) {
    out.push_back({"empty-entrypoint", "entrypoint is empty"});
  } else if (resolver && !resolver(spec.entrypoint)) {
    out.push_back({"unknown-entrypoint",
                   "'" + spec.entrypoint + "' is not registered"});
  }
  if (spec.parent && *spec.parent == spec.id) {
    out.push_back({"self-parent", "task lists itself as parent"});
  }
  for (const auto& [key, value] : spec.inputs) {
    try {
      check_encodable(value);
    } catch (const NonEncodable&) {
      out.push_back({"non-document-input", "input '" + key + "'"});
    }
  }
  if (spec.placement && spec.placement->empty()) {
    out.push_back({"empty-placement", "placement label is empty"});
  }
  if (spec.workspace && spec.workspace->empty()) {
    out.push_back({"empty-workspace", "workspace volume id is empty"});
  }
  return out;
}

PreconditionViolation::PreconditionViolation(std::vector<Violation> violations)
    : Error(violations.empty() ? "precondition" : violations.front().code,
            violations.empty() ? "precondition violated"
                               : violations.front().detail),
      violations_(std::move(violations)) {}

Document to_document(const TaskSpec& spec) {
  Document doc = Document::object();
  doc["id"] = spec.id.str();
  doc["name"] = spec.name;
  doc["entrypoint"] = spec.entrypoint;
  Document inputs = Document::object();
  for (const auto& [k, v] : spec.inputs) inputs[k] = v;
  doc["inputs"] = std::move(inputs);
  if (spec.parent) doc["parent"] = spec.parent->str();
  if (spec.placement) doc["placement"] = *spec.placement;
  if (spec.workspace) doc["workspace"] = *spec.workspace;
  return doc;
}

TaskSpec task_spec_from_document(const Document& doc) {
  fields::require_exact(doc, {"id", "name", "entrypoint", "inputs"},
                        {"parent", "placement", "workspace"});
  TaskSpec spec;
  spec.id = TaskId::parse(fields::string_at(doc, "id"));
  spec.name = fields::string_at(doc, "name");
  spec.entrypoint = fields::string_at(doc, "entrypoint");
  const auto& inputs = fields::at(doc, "inputs");
  fields::require_object(inputs, "inputs");
  for (const auto& [k, v] : inputs.items()) spec.inputs.emplace(k, v);
  if (doc.contains("parent")) {
    spec.parent = TaskId::parse(fields::string_at(doc, "parent"));
  }
  if (doc.contains("placement")) {
    spec.placement = fields::string_at(doc, "placement");
  }
  if (doc.contains("workspace")) {
    spec.workspace = fields::string_at(doc, "workspace");
  }
  return spec;
}

Document to_document(const ErrorInfo& error) {
  return Document{{"code", error.code}, {"message", error.message}};
}

ErrorInfo error_info_from_document(const Document& doc) {
  fields::require_exact(doc, {"code", "message"});
  return {fields::string_at(doc, "code"), fields::string_at(doc, "message")};
}

Document to_document(const TaskResult& result) {
  Document doc = Document::object();
  doc["task"] = result.task.str();
  if (result.ok()) {
    doc["value"] = result.value();
  } else {
    doc["error"] = to_document(result.error());
  }
  return doc;
}

TaskResult task_result_from_document(const Document& doc) {
  fields::require_object(doc, "result");
  if (doc.contains("value")) {
    fields::require_exact(doc, {"task", "value"});
    return {TaskId::parse(fields::string_at(doc, "task")), doc.at("value")};
  }
  fields::require_exact(doc, {"task", "error"});
  return {TaskId::parse(fields::string_at(doc, "task")),
          error_info_from_document(doc.at("error"))};
}

}  // namespace taskmesh
