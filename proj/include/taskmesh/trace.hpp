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
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "taskmesh/transport.hpp"

namespace taskmesh {

inline constexpr std::string_view kBackendPeer = "backend";

enum class Direction { sent, received };

// One frame crossing a runtime boundary, seen from `runtime`.
struct TraceEvent {
  Nanos time{0};
  std::string runtime;  // task id of the recording runtime
  Direction direction = Direction::sent;
  std::string peer;     // task id of the other side, or "backend"
  std::string type;     // message type
  std::string subject;  // task id the frame is about
  std::string parent;   // spawn_request only: the spec's parent

  bool operator==(const TraceEvent&) const = default;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void record(const TraceEvent& event) = 0;
};

class MemoryTrace final : public TraceSink {
 public:
  void record(const TraceEvent& event) override;
  std::vector<TraceEvent> events() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TraceEvent> events_;
};

// Appends one JSON line per event. Used by process-backend children, one
// file per task.
class JsonlTrace final : public TraceSink {
 public:
  explicit JsonlTrace(const std::filesystem::path& file);
  void record(const TraceEvent& event) override;

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

std::string to_jsonl(const TraceEvent& event);
TraceEvent trace_event_from_jsonl(std::string_view line);
// Every *.jsonl file under `dir`.
std::vector<TraceEvent> read_trace_dir(const std::filesystem::path& dir);

// Checks that spawning is decentralized: each spawn_request goes from the
// spawning task's own runtime straight to the backend, no runtime ever
// receives a spawn_request, and every child frame travels only between the
// child and its own parent. Returns one line per violation.
std::vector<std::string> check_decentralized(std::span<const TraceEvent> trace);

}  // namespace taskmesh
