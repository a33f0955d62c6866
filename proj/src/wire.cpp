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

#include "taskmesh/wire.hpp"

#include "doc_fields.hpp"
#include "taskmesh/error.hpp"

namespace taskmesh::wire {
namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

std::uint32_t read_prefix(std::string_view bytes) {
  auto b = [&bytes](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i]));
  };
  return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

Message decode_payload(std::string_view payload) {
  return message_from_document(parse_document(payload));
}

}  // namespace

std::string_view to_string(LogStream stream) {
  return stream == LogStream::out ? "out" : "err";
}

std::string_view type_name(const Message& message) {
  return std::visit(
      overloaded{
          [](const Hello&) { return std::string_view("hello"); },
          [](const Status&) { return std::string_view("status"); },
          [](const Log&) { return std::string_view("log"); },
          [](const Return&) { return std::string_view("return"); },
          [](const Fail&) { return std::string_view("fail"); },
          [](const SpawnRequest&) { return std::string_view("spawn_request"); },
          [](const SpawnAck&) { return std::string_view("spawn_ack"); },
          [](const FsRequestFrame&) { return std::string_view("fs_request"); },
          [](const FsResponseFrame&) { return std::string_view("fs_response"); },
          [](const VolumeRpc&) { return std::string_view("volume_rpc"); },
      },
      message);
}

Document to_document(const Message& message) {
  Document doc = Document::object();
  doc["type"] = type_name(message);
  std::visit(
      overloaded{
          [&doc](const Hello& m) {
            doc["task_id"] = m.task_id;
            if (m.token) doc["token"] = *m.token;
          },
          [&doc](const Status& m) {
            doc["task_id"] = m.task_id;
            doc["state"] = to_string(m.state);
          },
          [&doc](const Log& m) {
            doc["task_id"] = m.task_id;
            doc["stream"] = to_string(m.stream);
            doc["text"] = m.text;
          },
          [&doc](const Return& m) {
            doc["task_id"] = m.task_id;
            doc["value"] = m.value;
          },
          [&doc](const Fail& m) {
            doc["task_id"] = m.task_id;
            doc["error"] = to_document(m.error);
          },
          [&doc](const SpawnRequest& m) { doc["spec"] = to_document(m.spec); },
          [&doc](const SpawnAck& m) { doc["task_id"] = m.task_id; },
          [&doc](const FsRequestFrame& m) {
            doc["session"] = m.session;
            doc["seq"] = m.seq;
            netfs::write_request_fields(m.request, doc);
          },
          [&doc](const FsResponseFrame& m) {
            doc["session"] = m.session;
            doc["seq"] = m.seq;
            netfs::write_response_fields(m.response, doc);
          },
          [&doc](const VolumeRpc& m) {
            doc["call"] = m.call;
            doc["args"] = m.args;
          },
      },
      message);
  return doc;
}

Message message_from_document(const Document& doc) {
  fields::require_object(doc, "payload");
  const auto& type = fields::string_at(doc, "type");
  if (type == "hello") {
    fields::require_exact(doc, {"type", "task_id"}, {"token"});
    Hello m{fields::string_at(doc, "task_id"), std::nullopt};
    if (doc.contains("token")) m.token = fields::string_at(doc, "token");
    return m;
  }
  if (type == "status") {
    fields::require_exact(doc, {"type", "task_id", "state"});
    auto state = parse_task_state(fields::string_at(doc, "state"));
    if (!state) throw MalformedPayload("unknown task state");
    return Status{fields::string_at(doc, "task_id"), *state};
  }
  if (type == "log") {
    fields::require_exact(doc, {"type", "task_id", "stream", "text"});
    const auto& stream = fields::string_at(doc, "stream");
    if (stream != "out" && stream != "err") {
      throw MalformedPayload("unknown log stream");
    }
    return Log{fields::string_at(doc, "task_id"),
               stream == "out" ? LogStream::out : LogStream::err,
               fields::string_at(doc, "text")};
  }
  if (type == "return") {
    fields::require_exact(doc, {"type", "task_id", "value"});
    return Return{fields::string_at(doc, "task_id"), doc.at("value")};
  }
  if (type == "fail") {
    fields::require_exact(doc, {"type", "task_id", "error"});
    return Fail{fields::string_at(doc, "task_id"),
                error_info_from_document(doc.at("error"))};
  }
  if (type == "spawn_request") {
    fields::require_exact(doc, {"type", "spec"});
    return SpawnRequest{task_spec_from_document(doc.at("spec"))};
  }
  if (type == "spawn_ack") {
    fields::require_exact(doc, {"type", "task_id"});
    return SpawnAck{fields::string_at(doc, "task_id")};
  }
  if (type == "fs_request") {
    return FsRequestFrame{fields::string_at(doc, "session"),
                          fields::u64_at(doc, "seq"),
                          netfs::read_request_fields(doc)};
  }
  if (type == "fs_response") {
    return FsResponseFrame{fields::string_at(doc, "session"),
                           fields::u64_at(doc, "seq"),
                           netfs::read_response_fields(doc)};
  }
  if (type == "volume_rpc") {
    fields::require_exact(doc, {"type", "call", "args"});
    const auto& args = doc.at("args");
    fields::require_object(args, "args");
    return VolumeRpc{fields::string_at(doc, "call"), args};
  }
  throw MalformedPayload("unknown message type '" + type + "'");
}

std::string canonicalize(const Message& message) {
  return canonical_text(to_document(message));
}

std::string frame_payload(std::string_view payload) {
  if (payload.size() > kMaxPayload) {
    throw FrameTooLarge("payload of " + std::to_string(payload.size()) +
                        " bytes exceeds the 16 MiB frame cap");
  }
  auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(kPrefixSize + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

std::string encode_frame(const Message& message) {
  return frame_payload(canonicalize(message));
}

DecodedFrame decode_frame(std::string_view bytes) {
  if (bytes.size() < kPrefixSize) {
    throw NeedMoreBytes(kPrefixSize - bytes.size());
  }
  std::size_t length = read_prefix(bytes);
  if (length > kMaxPayload) {
    throw FrameTooLarge("frame announces " + std::to_string(length) +
                        " bytes");
  }
  if (bytes.size() < kPrefixSize + length) {
    throw NeedMoreBytes(kPrefixSize + length - bytes.size());
  }
  auto message = decode_payload(bytes.substr(kPrefixSize, length));
  return {std::move(message), bytes.substr(kPrefixSize + length)};
}

void FrameDecoder::feed(std::string_view bytes) {
  if (consumed_ > 0 && consumed_ >= buffer_.size() / 2) {
    buffer_.erase(0, consumed_);
    consumed_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<Message> FrameDecoder::next() {
  std::string_view view(buffer_);
  view.remove_prefix(consumed_);
  try {
    auto decoded = decode_frame(view);
    consumed_ = buffer_.size() - decoded.rest.size();
    return std::move(decoded.message);
  } catch (const NeedMoreBytes&) {
    return std::nullopt;
  }
}

}  // namespace taskmesh::wire
