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
#include <stdexcept>
#include <string>
#include <utility>

namespace taskmesh {

// Base of every error the engine raises. The code is a stable kebab-case
// identifier that survives the wire (fail frames, volume_rpc replies).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define TASKMESH_DEFINE_ERROR(Name, code_text)                 \
  class Name : public Error {                                  \
   public:                                                     \
    explicit Name(const std::string& message)                  \
        : Error(code_text, message) {}                         \
  }

TASKMESH_DEFINE_ERROR(NonEncodable, "non-encodable");
TASKMESH_DEFINE_ERROR(FrameTooLarge, "frame-too-large");
TASKMESH_DEFINE_ERROR(MalformedPayload, "malformed-payload");
TASKMESH_DEFINE_ERROR(ConnectionLost, "connection-lost");
TASKMESH_DEFINE_ERROR(Unreachable, "unreachable");
TASKMESH_DEFINE_ERROR(Timeout, "timeout");
TASKMESH_DEFINE_ERROR(SpawnRejected, "spawn-rejected");
TASKMESH_DEFINE_ERROR(UnknownNode, "unknown-node");
TASKMESH_DEFINE_ERROR(CapacityExceeded, "capacity-exceeded");
TASKMESH_DEFINE_ERROR(UnknownInstance, "unknown-instance");
TASKMESH_DEFINE_ERROR(BindFailure, "bind-failure");
TASKMESH_DEFINE_ERROR(InvalidConfig, "invalid-config");
TASKMESH_DEFINE_ERROR(EndpointUnreachable, "endpoint-unreachable");
TASKMESH_DEFINE_ERROR(AuthRejected, "auth-rejected");
TASKMESH_DEFINE_ERROR(UnknownVolume, "unknown-volume");
TASKMESH_DEFINE_ERROR(VolumeDeleted, "volume-deleted");
TASKMESH_DEFINE_ERROR(VolumeBusy, "volume-busy");

#undef TASKMESH_DEFINE_ERROR

// Incomplete input handed to the frame decoder. `needed` is how many more
// bytes must arrive before decoding can make progress.
class NeedMoreBytes : public Error {
 public:
  explicit NeedMoreBytes(std::size_t needed)
      : Error("need-more-bytes",
              "need " + std::to_string(needed) + " more bytes"),
        needed_(needed) {}

  std::size_t needed() const noexcept { return needed_; }

 private:
  std::size_t needed_;
};

// Raised by a task body (or surfaced from a failed child) with the code that
// travels in the fail frame.
class TaskFailure : public Error {
 public:
  TaskFailure(std::string code, const std::string& message)
      : Error(std::move(code), message) {}
};

}  // namespace taskmesh
