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

#include "taskmesh/trace.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "doc_fields.hpp"

namespace taskmesh {

void MemoryTrace::record(const TraceEvent& event) {
  std::lock_guard lock(mutex_);
  events_.push_back(event);
}

std::vector<TraceEvent> MemoryTrace::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

JsonlTrace::JsonlTrace(const std::filesystem::path& file)
    : out_(file, std::ios::app) {}

void JsonlTrace::record(const TraceEvent& event) {
  std::lock_guard lock(mutex_);
  out_ << to_jsonl(event) << '\n';
  out_.flush();
}

std::string to_jsonl(const TraceEvent& event) {
  Document doc{{"time_ns", event.time.count()},
               {"runtime", event.runtime},
               {"direction", event.direction == Direction::sent ? "sent"
                                                                : "received"},
               {"peer", event.peer},
               {"type", event.type},
               {"subject", event.subject},
               {"parent", event.parent}};
  return canonical_text(doc);
}

TraceEvent trace_event_from_jsonl(std::string_view line) {
  auto doc = parse_document(line);
  fields::require_exact(doc, {"time_ns", "runtime", "direction", "peer",
                              "type", "subject", "parent"});
  TraceEvent ev;
  ev.time = Nanos(fields::i64_at(doc, "time_ns"));
  ev.runtime = fields::string_at(doc, "runtime");
  ev.direction = fields::string_at(doc, "direction") == "sent"
                     ? Direction::sent
                     : Direction::received;
  ev.peer = fields::string_at(doc, "peer");
  ev.type = fields::string_at(doc, "type");
  ev.subject = fields::string_at(doc, "subject");
  ev.parent = fields::string_at(doc, "parent");
  return ev;
}

std::vector<TraceEvent> read_trace_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TraceEvent> out;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(trace_event_from_jsonl(line));
    }
  }
  return out;
}

std::vector<std::string> check_decentralized(std::span<const TraceEvent> trace) {
  static const std::set<std::string> kChildFrames = {"hello", "status", "log",
                                                     "return", "fail"};
  std::vector<std::string> problems;
  std::map<std::string, std::string> parent_of;
  for (const auto& ev : trace) {
    if (ev.type != "spawn_request") continue;
    if (ev.direction == Direction::received) {
      problems.push_back("runtime " + ev.runtime +
                         " received a spawn_request from " + ev.peer);
      continue;
    }
    if (ev.peer != kBackendPeer) {
      problems.push_back("spawn_request for " + ev.subject + " sent to " +
                         ev.peer + " instead of the backend");
    }
    if (ev.parent != ev.runtime) {
      problems.push_back("spawn_request for " + ev.subject + " sent by " +
                         ev.runtime + " but its parent is " + ev.parent);
    }
    parent_of[ev.subject] = ev.parent;
  }
  for (const auto& ev : trace) {
    if (!kChildFrames.contains(ev.type)) continue;
    if (ev.direction == Direction::received) {
      // A parent receiving from a child.
      auto it = parent_of.find(ev.subject);
      if (it == parent_of.end()) {
        problems.push_back(ev.runtime + " received " + ev.type +
                           " about unspawned task " + ev.subject);
      } else if (it->second != ev.runtime) {
        problems.push_back(ev.runtime + " received " + ev.type + " for " +
                           ev.subject + " whose parent is " + it->second);
      }
      if (ev.peer != ev.subject) {
        problems.push_back(ev.type + " about " + ev.subject + " relayed by " +
                           ev.peer);
      }
    } else {
      // A child reporting upstream.
      if (ev.subject != ev.runtime) {
        problems.push_back(ev.runtime + " sent " + ev.type + " on behalf of " +
                           ev.subject);
      }
      auto it = parent_of.find(ev.runtime);
      if (it != parent_of.end() && it->second != ev.peer) {
        problems.push_back(ev.runtime + " sent " + ev.type + " to " + ev.peer +
                           " instead of its parent " + it->second);
      }
    }
  }
  return problems;
}

}  // namespace taskmesh
