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
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "taskmesh/document.hpp"
#include "taskmesh/fs_protocol.hpp"
#include "taskmesh/task_model.hpp"

// Framing and message vocabulary for every socket in the system.
//
// A frame is a 4-byte big-endian payload length followed by the canonical
// text of one message document. Payloads are capped at 16 MiB.
namespace taskmesh::wire {

inline constexpr std::size_t kMaxPayload = 16u * 1024u * 1024u;
inline constexpr std::size_t kPrefixSize = 4;

enum class LogStream { out, err };

std::string_view to_string(LogStream stream);

struct Hello {
  std::string task_id;
  std::optional<std::string> token;
  bool operator==(const Hello&) const = default;
};

struct Status {
  std::string task_id;
  TaskState state = TaskState::running;
  bool operator==(const Status&) const = default;
};

struct Log {
  std::string task_id;
  LogStream stream = LogStream::out;
  std::string text;
  bool operator==(const Log&) const = default;
};

struct Return {
  std::string task_id;
  Document value;
  bool operator==(const Return&) const = default;
};

struct Fail {
  std::string task_id;
  ErrorInfo error;
  bool operator==(const Fail&) const = default;
};

struct SpawnRequest {
  TaskSpec spec;
  bool operator==(const SpawnRequest&) const = default;
};

struct SpawnAck {
  std::string task_id;
  bool operator==(const SpawnAck&) const = default;
};

struct FsRequestFrame {
  std::string session;
  std::uint64_t seq = 0;
  netfs::FsRequest request;
  bool operator==(const FsRequestFrame&) const = default;
};

struct FsResponseFrame {
  std::string session;
  std::uint64_t seq = 0;
  netfs::FsResponse response;
  bool operator==(const FsResponseFrame&) const = default;
};

// Volume broker calls. Requests use call ∈ {create, publish, unpublish,
// delete}; replies use call "reply" (args carry the result) or "error"
// (args carry {code, message}).
struct VolumeRpc {
  std::string call;
  Document args = Document::object();
  bool operator==(const VolumeRpc&) const = default;
};

using Message = std::variant<Hello, Status, Log, Return, Fail, SpawnRequest,
                             SpawnAck, FsRequestFrame, FsResponseFrame,
                             VolumeRpc>;

// The "type" discriminator of a message.
std::string_view type_name(const Message& message);

Document to_document(const Message& message);
// Throws MalformedPayload for unknown types, missing or extra fields.
Message message_from_document(const Document& doc);

// Throws NonEncodable.
std::string canonicalize(const Message& message);

// Throws FrameTooLarge when the canonical payload exceeds kMaxPayload.
std::string encode_frame(const Message& message);
std::string frame_payload(std::string_view payload);

struct DecodedFrame {
  Message message;
  std::string_view rest;
};

// Throws NeedMoreBytes{n} on incomplete input, FrameTooLarge for an
// oversized length prefix, MalformedPayload for a bad payload.
DecodedFrame decode_frame(std::string_view bytes);

// Incremental decoder for a byte stream that arrives in arbitrary pieces.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  // Next complete message, or nullopt if more bytes are needed. Throws
  // MalformedPayload / FrameTooLarge; the stream is unusable afterwards.
  std::optional<Message> next();
  std::size_t buffered() const noexcept { return buffer_.size() - consumed_; }

 private:
  std::string buffer_;
  std::size_t consumed_ = 0;
};

}  // namespace taskmesh::wire
