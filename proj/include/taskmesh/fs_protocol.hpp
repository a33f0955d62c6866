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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taskmesh/document.hpp"

// Vocabulary of the workspace file protocol: requests, responses and file
// metadata. Shared by the export daemon, the client and the wire codec.
namespace taskmesh::netfs {

inline constexpr std::size_t kChunkSize = 64 * 1024;
inline constexpr std::uint32_t kDefaultFileMode = 0644;
inline constexpr std::uint32_t kDirectoryMode = 0755;
inline constexpr std::string_view kMountPath = "/workspace";
// Largest file a write or truncate may produce.
inline constexpr std::uint64_t kMaxFileSize = std::uint64_t{1} << 30;

using Bytes = std::vector<std::uint8_t>;

enum class FileKind { file, directory };

struct FileAttr {
  FileKind kind = FileKind::file;
  std::uint64_t size = 0;
  std::int64_t mtime_ms = 0;
  std::uint32_t mode = 0;

  bool operator==(const FileAttr&) const = default;
};

enum class OpenMode { read, write, read_write, create_truncate };

std::string_view to_string(OpenMode mode);
std::optional<OpenMode> parse_open_mode(std::string_view text);
bool is_writable(OpenMode mode);
bool is_readable(OpenMode mode);

namespace op {
struct Lookup { std::string path; bool operator==(const Lookup&) const = default; };
struct GetAttr { std::string path; bool operator==(const GetAttr&) const = default; };
struct ReadDir { std::string path; bool operator==(const ReadDir&) const = default; };
struct Open {
  std::string path;
  OpenMode mode = OpenMode::read;
  bool operator==(const Open&) const = default;
};
struct Read {
  std::uint64_t fh = 0;
  std::uint64_t offset = 0;
  std::uint64_t len = 0;
  bool operator==(const Read&) const = default;
};
struct Write {
  std::uint64_t fh = 0;
  std::uint64_t offset = 0;
  Bytes data;
  bool operator==(const Write&) const = default;
};
struct Create {
  std::string path;
  std::uint32_t mode = kDefaultFileMode;
  bool operator==(const Create&) const = default;
};
struct MkDir { std::string path; bool operator==(const MkDir&) const = default; };
struct Unlink { std::string path; bool operator==(const Unlink&) const = default; };
struct RmDir { std::string path; bool operator==(const RmDir&) const = default; };
struct Rename {
  std::string from;
  std::string to;
  bool operator==(const Rename&) const = default;
};
struct Truncate {
  std::string path;
  std::uint64_t size = 0;
  bool operator==(const Truncate&) const = default;
};
struct Flush { std::uint64_t fh = 0; bool operator==(const Flush&) const = default; };
struct Release { std::uint64_t fh = 0; bool operator==(const Release&) const = default; };
}  // namespace op

// Variant order matches FsOp.
using FsRequest =
    std::variant<op::Lookup, op::GetAttr, op::ReadDir, op::Open, op::Read,
                 op::Write, op::Create, op::MkDir, op::Unlink, op::RmDir,
                 op::Rename, op::Truncate, op::Flush, op::Release>;

enum class FsOp {
  lookup, getattr, readdir, open, read, write, create, mkdir, unlink, rmdir,
  rename, truncate, flush, release
};

inline FsOp op_of(const FsRequest& request) {
  return static_cast<FsOp>(request.index());
}
std::string_view to_string(FsOp op);
std::optional<FsOp> parse_fs_op(std::string_view text);
bool is_mutating(FsOp op);

enum class FsErrc {
  not_found, exists, not_dir, is_dir, not_empty, bad_handle, read_only, io
};

std::string_view to_string(FsErrc code);
std::optional<FsErrc> parse_fs_errc(std::string_view text);

namespace result {
struct Attr { FileAttr attr; bool operator==(const Attr&) const = default; };
struct Entries {
  std::vector<std::string> names;
  bool operator==(const Entries&) const = default;
};
struct Opened {
  std::uint64_t fh = 0;
  FileAttr attr;
  bool operator==(const Opened&) const = default;
};
struct Data {
  Bytes data;
  bool eof = false;
  bool operator==(const Data&) const = default;
};
struct Written {
  std::uint64_t count = 0;
  bool operator==(const Written&) const = default;
};
struct Done { bool operator==(const Done&) const = default; };
}  // namespace result

using FsOutcome = std::variant<FsErrc, result::Attr, result::Entries,
                               result::Opened, result::Data, result::Written,
                               result::Done>;

struct FsResponse {
  FsOp op = FsOp::lookup;
  FsOutcome outcome;

  bool ok() const noexcept { return outcome.index() != 0; }
  std::optional<FsErrc> error() const {
    if (ok()) return std::nullopt;
    return std::get<FsErrc>(outcome);
  }
  bool operator==(const FsResponse&) const = default;
};

// Which outcome alternative a successful response to `op` carries.
std::size_t success_index(FsOp op);

Document to_document(const FileAttr& attr);
FileAttr file_attr_from_document(const Document& doc);

// Request/response bodies without the frame envelope (type/session/seq).
void write_request_fields(const FsRequest& request, Document& out);
FsRequest read_request_fields(const Document& doc);
void write_response_fields(const FsResponse& response, Document& out);
FsResponse read_response_fields(const Document& doc);

std::string base64_encode(const Bytes& data);
Bytes base64_decode(std::string_view text);

// Lexical normalization: empty and "." components dropped, ".." pops.
// nullopt when ".." climbs above the root.
std::optional<std::vector<std::string>> normalize_path(std::string_view path);
std::string join_path(const std::vector<std::string>& parts);

// Where a task's fs sessions point once its workspace volume is published.
struct MountSpec {
  std::string endpoint;
  std::string token;
  std::string mount_path{kMountPath};

  bool operator==(const MountSpec&) const = default;
};

Document to_document(const MountSpec& mount);
MountSpec mount_spec_from_document(const Document& doc);

}  // namespace taskmesh::netfs
