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

#include "taskmesh/fs_protocol.hpp"

#include <array>

#include <boost/beast/core/detail/base64.hpp>

#include "doc_fields.hpp"
#include "taskmesh/error.hpp"

namespace taskmesh::netfs {
namespace {

constexpr std::array<std::string_view, 14> kOpNames = {
    "lookup", "getattr", "readdir", "open",     "read",  "write",  "create",
    "mkdir",  "unlink",  "rmdir",   "rename",   "truncate", "flush", "release"};

constexpr std::array<std::string_view, 8> kErrcNames = {
    "not-found", "exists",     "not-dir",   "is-dir",
    "not-empty", "bad-handle", "read-only", "io"};

void require_keys(const Document& doc,
                  std::initializer_list<std::string_view> op_keys) {
  fields::require_object(doc, "fs frame");
  for (auto key : op_keys) {
    if (!doc.contains(key)) {
      throw MalformedPayload("missing field '" + std::string(key) + "'");
    }
  }
  for (const auto& [key, value] : doc.items()) {
    if (key == "type" || key == "session" || key == "seq" || key == "op") {
      continue;
    }
    bool known = false;
    for (auto k : op_keys) known = known || k == key;
    if (!known) throw MalformedPayload("unexpected field '" + key + "'");
  }
}

std::uint32_t mode_at(const Document& doc, std::string_view key) {
  auto mode = fields::u64_at(doc, key);
  if (mode > 0xffff) throw MalformedPayload("mode exceeds 16 bits");
  return static_cast<std::uint32_t>(mode);
}

}  // namespace

std::string_view to_string(OpenMode mode) {
  switch (mode) {
    case OpenMode::read: return "read";
    case OpenMode::write: return "write";
    case OpenMode::read_write: return "rw";
    case OpenMode::create_truncate: return "create-truncate";
  }
  return "read";
}

std::optional<OpenMode> parse_open_mode(std::string_view text) {
  for (auto m : {OpenMode::read, OpenMode::write, OpenMode::read_write,
                 OpenMode::create_truncate}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

bool is_writable(OpenMode mode) { return mode != OpenMode::read; }
bool is_readable(OpenMode mode) { return mode != OpenMode::write; }

std::string_view to_string(FsOp op) {
  return kOpNames[static_cast<std::size_t>(op)];
}

std::optional<FsOp> parse_fs_op(std::string_view text) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == text) return static_cast<FsOp>(i);
  }
  return std::nullopt;
}

bool is_mutating(FsOp op) {
  switch (op) {
    case FsOp::create:
    case FsOp::mkdir:
    case FsOp::unlink:
    case FsOp::rmdir:
    case FsOp::rename:
    case FsOp::truncate:
    case FsOp::write:
    case FsOp::flush:
    case FsOp::release:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(FsErrc code) {
  return kErrcNames[static_cast<std::size_t>(code)];
}

std::optional<FsErrc> parse_fs_errc(std::string_view text) {
  for (std::size_t i = 0; i < kErrcNames.size(); ++i) {
    if (kErrcNames[i] == text) return static_cast<FsErrc>(i);
  }
  return std::nullopt;
}

std::size_t success_index(FsOp op) {
  switch (op) {
    case FsOp::lookup:
    case FsOp::getattr:
    case FsOp::create:
    case FsOp::mkdir:
      return 1;
    case FsOp::readdir:
      return 2;
    case FsOp::open:
      return 3;
    case FsOp::read:
      return 4;
    case FsOp::write:
      return 5;
    default:
      return 6;
  }
}

Document to_document(const FileAttr& attr) {
  return Document{
      {"kind", attr.kind == FileKind::file ? "file" : "directory"},
      {"size", attr.size},
      {"mtime", attr.mtime_ms},
      {"mode", attr.mode}};
}

FileAttr file_attr_from_document(const Document& doc) {
  fields::require_exact(doc, {"kind", "size", "mtime", "mode"});
  FileAttr attr;
  const auto& kind = fields::string_at(doc, "kind");
  if (kind == "file") {
    attr.kind = FileKind::file;
  } else if (kind == "directory") {
    attr.kind = FileKind::directory;
  } else {
    throw MalformedPayload("unknown file kind '" + kind + "'");
  }
  attr.size = fields::u64_at(doc, "size");
  attr.mtime_ms = fields::i64_at(doc, "mtime");
  attr.mode = mode_at(doc, "mode");
  return attr;
}

void write_request_fields(const FsRequest& request, Document& out) {
  out["op"] = to_string(op_of(request));
  std::visit(
      [&out](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, op::Open>) {
          out["path"] = r.path;
          out["mode"] = to_string(r.mode);
        } else if constexpr (std::is_same_v<T, op::Read>) {
          out["fh"] = r.fh;
          out["offset"] = r.offset;
          out["len"] = r.len;
        } else if constexpr (std::is_same_v<T, op::Write>) {
          out["fh"] = r.fh;
          out["offset"] = r.offset;
          out["data"] = base64_encode(r.data);
        } else if constexpr (std::is_same_v<T, op::Create>) {
          out["path"] = r.path;
          out["mode"] = r.mode;
        } else if constexpr (std::is_same_v<T, op::Rename>) {
          out["from"] = r.from;
          out["to"] = r.to;
        } else if constexpr (std::is_same_v<T, op::Truncate>) {
          out["path"] = r.path;
          out["size"] = r.size;
        } else if constexpr (std::is_same_v<T, op::Flush> ||
                             std::is_same_v<T, op::Release>) {
          out["fh"] = r.fh;
        } else {
          out["path"] = r.path;
        }
      },
      request);
}

FsRequest read_request_fields(const Document& doc) {
  auto op = parse_fs_op(fields::string_at(doc, "op"));
  if (!op) throw MalformedPayload("unknown fs op");
  auto path_only = [&doc]() {
    require_keys(doc, {"path"});
    return fields::string_at(doc, "path");
  };
  switch (*op) {
    case FsOp::lookup: return op::Lookup{path_only()};
    case FsOp::getattr: return op::GetAttr{path_only()};
    case FsOp::readdir: return op::ReadDir{path_only()};
    case FsOp::mkdir: return op::MkDir{path_only()};
    case FsOp::unlink: return op::Unlink{path_only()};
    case FsOp::rmdir: return op::RmDir{path_only()};
    case FsOp::open: {
      require_keys(doc, {"path", "mode"});
      auto mode = parse_open_mode(fields::string_at(doc, "mode"));
      if (!mode) throw MalformedPayload("unknown open mode");
      return op::Open{fields::string_at(doc, "path"), *mode};
    }
    case FsOp::read:
      require_keys(doc, {"fh", "offset", "len"});
      return op::Read{fields::u64_at(doc, "fh"), fields::u64_at(doc, "offset"),
                      fields::u64_at(doc, "len")};
    case FsOp::write:
      require_keys(doc, {"fh", "offset", "data"});
      return op::Write{fields::u64_at(doc, "fh"),
                       fields::u64_at(doc, "offset"),
                       base64_decode(fields::string_at(doc, "data"))};
    case FsOp::create:
      require_keys(doc, {"path", "mode"});
      return op::Create{fields::string_at(doc, "path"), mode_at(doc, "mode")};
    case FsOp::rename:
      require_keys(doc, {"from", "to"});
      return op::Rename{fields::string_at(doc, "from"),
                        fields::string_at(doc, "to")};
    case FsOp::truncate:
      require_keys(doc, {"path", "size"});
      return op::Truncate{fields::string_at(doc, "path"),
                          fields::u64_at(doc, "size")};
    case FsOp::flush:
      require_keys(doc, {"fh"});
      return op::Flush{fields::u64_at(doc, "fh")};
    case FsOp::release:
      require_keys(doc, {"fh"});
      return op::Release{fields::u64_at(doc, "fh")};
  }
  throw MalformedPayload("unknown fs op");
}

void write_response_fields(const FsResponse& response, Document& out) {
  out["op"] = to_string(response.op);
  std::visit(
      [&out](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, FsErrc>) {
          out["error"] = to_string(r);
        } else if constexpr (std::is_same_v<T, result::Attr>) {
          out["attr"] = to_document(r.attr);
        } else if constexpr (std::is_same_v<T, result::Entries>) {
          out["entries"] = r.names;
        } else if constexpr (std::is_same_v<T, result::Opened>) {
          out["fh"] = r.fh;
          out["attr"] = to_document(r.attr);
        } else if constexpr (std::is_same_v<T, result::Data>) {
          out["data"] = base64_encode(r.data);
          out["eof"] = r.eof;
        } else if constexpr (std::is_same_v<T, result::Written>) {
          out["written"] = r.count;
        }
      },
      response.outcome);
}

FsResponse read_response_fields(const Document& doc) {
  auto op = parse_fs_op(fields::string_at(doc, "op"));
  if (!op) throw MalformedPayload("unknown fs op");
  FsResponse response{*op, FsErrc::io};
  if (doc.contains("error")) {
    require_keys(doc, {"error"});
    auto code = parse_fs_errc(fields::string_at(doc, "error"));
    if (!code) throw MalformedPayload("unknown fs error code");
    response.outcome = *code;
    return response;
  }
  switch (success_index(*op)) {
    case 1:
      require_keys(doc, {"attr"});
      response.outcome = result::Attr{file_attr_from_document(doc.at("attr"))};
      break;
    case 2: {
      require_keys(doc, {"entries"});
      const auto& entries = doc.at("entries");
      if (!entries.is_array()) throw MalformedPayload("entries is not a list");
      result::Entries names;
      for (const auto& e : entries) {
        if (!e.is_string()) throw MalformedPayload("entry is not a string");
        names.names.push_back(e.get<std::string>());
      }
      response.outcome = std::move(names);
      break;
    }
    case 3:
      require_keys(doc, {"fh", "attr"});
      response.outcome = result::Opened{
          fields::u64_at(doc, "fh"), file_attr_from_document(doc.at("attr"))};
      break;
    case 4:
      require_keys(doc, {"data", "eof"});
      response.outcome =
          result::Data{base64_decode(fields::string_at(doc, "data")),
                       fields::bool_at(doc, "eof")};
      break;
    case 5:
      require_keys(doc, {"written"});
      response.outcome = result::Written{fields::u64_at(doc, "written")};
      break;
    default:
      require_keys(doc, {});
      response.outcome = result::Done{};
      break;
  }
  return response;
}

std::string base64_encode(const Bytes& data) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(data.size()), '\0');
  auto n = b64::encode(out.data(), data.data(), data.size());
  out.resize(n);
  return out;
}

Bytes base64_decode(std::string_view text) {
  namespace b64 = boost::beast::detail::base64;
  if (text.size() % 4 != 0) throw MalformedPayload("bad base64 length");
  std::size_t padding = 0;
  while (padding < 2 && padding < text.size() &&
         text[text.size() - 1 - padding] == '=') {
    ++padding;
  }
  auto body = text.size() - padding;
  Bytes out(b64::decoded_size(text.size()));
  auto [written, read] = b64::decode(out.data(), text.data(), body);
  if (read != body) throw MalformedPayload("bad base64 data");
  out.resize(written);
  // Reject encodings with stray low bits so each byte string has one form.
  if (base64_encode(out) != text) throw MalformedPayload("non-canonical base64");
  return out;
}

std::optional<std::vector<std::string>> normalize_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    auto part = path.substr(pos, next - pos);
    if (part == "..") {
      if (parts.empty()) return std::nullopt;
      parts.pop_back();
    } else if (!part.empty() && part != ".") {
      parts.emplace_back(part);
    }
    pos = next + 1;
  }
  return parts;
}

std::string join_path(const std::vector<std::string>& parts) {
  if (parts.empty()) return "/";
  std::string out;
  for (const auto& p : parts) {
    out += '/';
    out += p;
  }
  return out;
}

Document to_document(const MountSpec& mount) {
  return Document{{"endpoint", mount.endpoint},
                  {"token", mount.token},
                  {"mount_path", mount.mount_path}};
}

MountSpec mount_spec_from_document(const Document& doc) {
  fields::require_exact(doc, {"endpoint", "token", "mount_path"});
  return {fields::string_at(doc, "endpoint"), fields::string_at(doc, "token"),
          fields::string_at(doc, "mount_path")};
}

}  // namespace taskmesh::netfs
