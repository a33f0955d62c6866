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
#include "support/memory_fs.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <type_traits>

namespace taskmesh::testing {

using netfs::Bytes;
using netfs::FileAttr;
using netfs::FileKind;
using netfs::FsErrc;
using netfs::FsOutcome;
using netfs::FsRequest;
using netfs::FsResponse;
namespace op = netfs::op;
namespace result = netfs::result;

namespace {

constexpr std::uint64_t kChunk = 64 * 1024;
constexpr std::uint64_t kLimit = std::uint64_t{1} << 30;

bool changes_content(const FsRequest& request) {
  if (const auto* open = std::get_if<op::Open>(&request)) {
    return open->mode != netfs::OpenMode::read;
  }
  return std::holds_alternative<op::Write>(request) ||
         std::holds_alternative<op::Create>(request) ||
         std::holds_alternative<op::MkDir>(request) ||
         std::holds_alternative<op::Unlink>(request) ||
         std::holds_alternative<op::RmDir>(request) ||
         std::holds_alternative<op::Rename>(request) ||
         std::holds_alternative<op::Truncate>(request);
}

template <typename Parts>
Parts parent_parts(const Parts& parts) {
  return Parts(parts.begin(), parts.end() - 1);
}

}  // namespace

MemoryFs::MemoryFs(bool read_only)
    : root_(std::make_shared<Node>()), read_only_(read_only) {
  root_->dir = true;
  root_->mode = netfs::kDirectoryMode;
}

std::optional<MemoryFs::Parts> MemoryFs::split(const std::string& path) {
  if (path.find('\0') != std::string::npos) return std::nullopt;
  Parts parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string::npos) end = path.size();
    auto piece = path.substr(start, end - start);
    if (piece == "..") {
      if (parts.empty()) return std::nullopt;
      parts.pop_back();
    } else if (!piece.empty() && piece != ".") {
      parts.push_back(piece);
    }
    start = end + 1;
  }
  return parts;
}

MemoryFs::Found MemoryFs::walk(const Parts& parts) const {
  auto node = root_;
  for (const auto& name : parts) {
    if (!node->dir) return FsErrc::not_dir;
    auto it = node->children.find(name);
    if (it == node->children.end()) return FsErrc::not_found;
    node = it->second;
  }
  return node;
}

FileAttr MemoryFs::attr(const Node& node) {
  FileAttr a;
  a.kind = node.dir ? FileKind::directory : FileKind::file;
  a.size = node.dir ? 0 : node.data.size();
  a.mode = node.mode;
  return a;
}

FsResponse MemoryFs::apply(std::uint64_t session, std::uint64_t seq,
                           const FsRequest& request) {
  FsResponse response;
  response.op = netfs::op_of(request);
  if (read_only_ && changes_content(request)) {
    response.outcome = FsErrc::read_only;
  } else {
    response.outcome = run(session, seq, request);
  }
  return response;
}

FsOutcome MemoryFs::run(std::uint64_t session, std::uint64_t seq,
                        const FsRequest& request) {
  // A lookup that also insists on a directory at the end.
  auto walk_dir = [&](const Parts& parts) -> Found {
    auto found = walk(parts);
    if (auto* node = std::get_if<std::shared_ptr<Node>>(&found)) {
      if (!(*node)->dir) return FsErrc::not_dir;
    }
    return found;
  };
  auto error_of = [](const Found& found) -> std::optional<FsErrc> {
    if (const auto* e = std::get_if<FsErrc>(&found)) return *e;
    return std::nullopt;
  };
  auto node_of = [](const Found& found) {
    return std::get<std::shared_ptr<Node>>(found);
  };

  return std::visit(
      [&](const auto& req) -> FsOutcome {
        using T = std::decay_t<decltype(req)>;
        if constexpr (std::is_same_v<T, op::Lookup> ||
                      std::is_same_v<T, op::GetAttr>) {
          auto parts = split(req.path);
          if (!parts) return FsErrc::not_found;
          auto found = walk(*parts);
          if (auto e = error_of(found)) return *e;
          return result::Attr{attr(*node_of(found))};
        } else if constexpr (std::is_same_v<T, op::ReadDir>) {
          auto parts = split(req.path);
          if (!parts) return FsErrc::not_found;
          auto found = walk_dir(*parts);
          if (auto e = error_of(found)) return *e;
          result::Entries entries;
          for (const auto& [name, child] : node_of(found)->children) {
            entries.names.push_back(name);
          }
          return entries;
        } else if constexpr (std::is_same_v<T, op::Open>) {
          auto parts = split(req.path);
          if (!parts) return FsErrc::not_found;
          std::shared_ptr<Node> node;
          if (req.mode == netfs::OpenMode::create_truncate) {
            if (parts->empty()) return FsErrc::is_dir;
            auto parent = walk_dir(parent_parts(*parts));
            if (auto e = error_of(parent)) return *e;
            auto& slot = node_of(parent)->children[parts->back()];
            if (slot && slot->dir) return FsErrc::is_dir;
            if (!slot) {
              slot = std::make_shared<Node>();
              slot->mode = netfs::kDefaultFileMode;
            }
            slot->data.clear();
            node = slot;
          } else {
            auto found = walk(*parts);
            if (auto e = error_of(found)) return *e;
            node = node_of(found);
            if (node->dir) return FsErrc::is_dir;
          }
          OpenFile file;
          file.node = node;
          file.readable = netfs::is_readable(req.mode);
          file.writable = netfs::is_writable(req.mode);
          open_[{session, seq}] = std::move(file);
          return result::Opened{seq, attr(*node)};
        } else if constexpr (std::is_same_v<T, op::Read>) {
          auto it = open_.find({session, req.fh});
          if (it == open_.end() || !it->second.readable) return FsErrc::bad_handle;
          if (req.len > kChunk) return FsErrc::io;
          // The file as this handle sees it: stored bytes overlaid with its
          // own unflushed writes.
          Bytes view = it->second.node->data;
          for (const auto& [offset, data] : it->second.pending) {
            if (view.size() < offset + data.size()) view.resize(offset + data.size());
            std::copy(data.begin(), data.end(), view.begin() + offset);
          }
          result::Data out;
          if (req.offset >= view.size()) {
            out.eof = true;
            return out;
          }
          auto end = std::min<std::uint64_t>(view.size(), req.offset + req.len);
          out.data.assign(view.begin() + req.offset, view.begin() + end);
          out.eof = end == view.size();
          return out;
        } else if constexpr (std::is_same_v<T, op::Write>) {
          auto it = open_.find({session, req.fh});
          if (it == open_.end() || !it->second.writable) return FsErrc::bad_handle;
          if (req.data.size() > kChunk) return FsErrc::io;
          if (req.offset > kLimit || req.data.size() > kLimit - req.offset) {
            return FsErrc::io;
          }
          if (!req.data.empty()) it->second.pending.emplace_back(req.offset, req.data);
          return result::Written{req.data.size()};
        } else if constexpr (std::is_same_v<T, op::Flush> ||
                             std::is_same_v<T, op::Release>) {
          auto it = open_.find({session, req.fh});
          if (it == open_.end()) return FsErrc::bad_handle;
          auto& data = it->second.node->data;
          for (const auto& [offset, bytes] : it->second.pending) {
            if (data.size() < offset + bytes.size()) data.resize(offset + bytes.size());
            std::copy(bytes.begin(), bytes.end(), data.begin() + offset);
          }
          it->second.pending.clear();
          if constexpr (std::is_same_v<T, op::Release>) open_.erase(it);
          return result::Done{};
        } else if constexpr (std::is_same_v<T, op::Create> ||
                             std::is_same_v<T, op::MkDir>) {
          auto parts = split(req.path);
          if (!parts) return FsErrc::not_found;
          if (parts->empty()) return FsErrc::exists;
          auto parent = walk_dir(parent_parts(*parts));
          if (auto e = error_of(parent)) return *e;
          auto& children = node_of(parent)->children;
          if (children.count(parts->back()) != 0) return FsErrc::exists;
          auto node = std::make_shared<Node>();
          if constexpr (std::is_same_v<T, op::Create>) {
            node->mode = req.mode & 07777;
          } else {
            node->dir = true;
            node->mode = netfs::kDirectoryMode;
          }
          children[parts->back()] = node;
          return result::Attr{attr(*node)};
        } else if constexpr (std::is_same_v<T, op::Unlink>) {
          auto parts = split(req.path);
          if (!parts) return FsErrc::not_found;
          if (parts->empty()) return FsErrc::is_dir;
          auto found = walk(*parts);
          if (auto e = error_of(found)) return *e;
          if (node_of(found)->dir) return FsErrc::is_dir;
          node_of(walk(parent_parts(*parts)))->children.erase(parts->back());
          return result::Done{};
        } else if constexpr (std::is_same_v<T, op::RmDir>) {
          auto parts = split(req.path);
          if (!parts) return FsErrc::not_found;
          if (parts->empty()) return FsErrc::io;
          auto found = walk_dir(*parts);
          if (auto e = error_of(found)) return *e;
          if (!node_of(found)->children.empty()) return FsErrc::not_empty;
          node_of(walk(parent_parts(*parts)))->children.erase(parts->back());
          return result::Done{};
        } else if constexpr (std::is_same_v<T, op::Rename>) {
          auto from = split(req.from);
          auto to = split(req.to);
          if (!from || !to) return FsErrc::not_found;
          if (from->empty() || to->empty()) return FsErrc::io;
          auto source = walk(*from);
          if (auto e = error_of(source)) return *e;
          auto target_dir = walk_dir(parent_parts(*to));
          if (auto e = error_of(target_dir)) return *e;
          if (*from == *to) return result::Done{};
          if (to->size() > from->size() &&
              std::equal(from->begin(), from->end(), to->begin())) {
            return FsErrc::io;
          }
          auto moving = node_of(source);
          auto& siblings = node_of(target_dir)->children;
          auto existing = siblings.find(to->back());
          if (existing != siblings.end()) {
            const auto& there = *existing->second;
            if (!moving->dir && there.dir) return FsErrc::is_dir;
            if (moving->dir && !there.dir) return FsErrc::not_dir;
            if (there.dir && !there.children.empty()) return FsErrc::not_empty;
          }
          node_of(walk(parent_parts(*from)))->children.erase(from->back());
          node_of(walk(parent_parts(*to)))->children[to->back()] = moving;
          return result::Done{};
        } else if constexpr (std::is_same_v<T, op::Truncate>) {
          auto parts = split(req.path);
          if (!parts) return FsErrc::not_found;
          auto found = walk(*parts);
          if (auto e = error_of(found)) return *e;
          auto node = node_of(found);
          if (node->dir) return FsErrc::is_dir;
          if (req.size > kLimit) return FsErrc::io;
          node->data.resize(req.size);
          return result::Done{};
        }
      },
      request);
}

void MemoryFs::drop_session(std::uint64_t session) {
  std::erase_if(open_, [&](const auto& entry) { return entry.first.first == session; });
}

void MemoryFs::put_dir(const std::string& path) {
  auto node = root_;
  for (const auto& name : *split(path)) {
    auto& slot = node->children[name];
    if (!slot) {
      slot = std::make_shared<Node>();
      slot->dir = true;
      slot->mode = netfs::kDirectoryMode;
    }
    node = slot;
  }
}

void MemoryFs::put_file(const std::string& path, const Bytes& data,
                        std::uint32_t mode) {
  auto parts = *split(path);
  auto node = root_;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    auto& slot = node->children[parts[i]];
    if (!slot) {
      slot = std::make_shared<Node>();
      slot->dir = true;
      slot->mode = netfs::kDirectoryMode;
    }
    node = slot;
  }
  auto file = std::make_shared<Node>();
  file->mode = mode;
  file->data = data;
  node->children[parts.back()] = file;
}

std::map<std::string, MemoryFs::Entry> MemoryFs::snapshot() const {
  std::map<std::string, Entry> out;
  std::vector<std::pair<std::string, std::shared_ptr<Node>>> stack{{"", root_}};
  while (!stack.empty()) {
    auto [prefix, node] = stack.back();
    stack.pop_back();
    for (const auto& [name, child] : node->children) {
      auto path = prefix + "/" + name;
      out[path] = Entry{child->dir ? FileKind::directory : FileKind::file,
                        child->mode, child->dir ? Bytes{} : child->data};
      if (child->dir) stack.emplace_back(path, child);
    }
  }
  return out;
}

std::map<std::string, MemoryFs::Entry> snapshot_directory(
    const std::filesystem::path& root) {
  std::map<std::string, MemoryFs::Entry> out;
  for (const auto& item : std::filesystem::recursive_directory_iterator(root)) {
    auto rel = "/" + std::filesystem::relative(item.path(), root).string();
    struct stat st {};
    ::lstat(item.path().c_str(), &st);
    MemoryFs::Entry entry;
    entry.mode = st.st_mode & 07777;
    if (S_ISDIR(st.st_mode)) {
      entry.kind = FileKind::directory;
    } else {
      std::ifstream in(item.path(), std::ios::binary);
      entry.data.assign(std::istreambuf_iterator<char>(in),
                        std::istreambuf_iterator<char>());
    }
    out[rel] = std::move(entry);
  }
  return out;
}

FsResponse without_mtime(FsResponse response) {
  if (auto* a = std::get_if<result::Attr>(&response.outcome)) a->attr.mtime_ms = 0;
  if (auto* o = std::get_if<result::Opened>(&response.outcome)) o->attr.mtime_ms = 0;
  return response;
}

}  // namespace taskmesh::testing
