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

#include "taskmesh/fs_server.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>

#include "taskmesh/error.hpp"

namespace taskmesh::netfs {

struct DirectoryStore::Handle {
  int fd = -1;
  bool readable = false;
  bool writable = false;
  std::vector<std::pair<std::uint64_t, Bytes>> pending;

  ~Handle() {
    if (fd >= 0) ::close(fd);
  }
};

struct DirectoryStore::Resolved {
  std::string host;
  struct stat st {};
  bool exists = false;

  bool is_dir() const { return S_ISDIR(st.st_mode); }
};

namespace {

FileAttr attr_of(const struct stat& st) {
  FileAttr attr;
  attr.kind = S_ISDIR(st.st_mode) ? FileKind::directory : FileKind::file;
  attr.size = attr.kind == FileKind::directory
                  ? 0
                  : static_cast<std::uint64_t>(st.st_size);
  attr.mtime_ms = static_cast<std::int64_t>(st.st_mtim.tv_sec) * 1000 +
                  st.st_mtim.tv_nsec / 1000000;
  attr.mode = st.st_mode & 07777;
  return attr;
}

bool servable(const struct stat& st) {
  return S_ISREG(st.st_mode) || S_ISDIR(st.st_mode);
}

std::optional<std::vector<std::string>> parse_path(const std::string& path) {
  auto parts = normalize_path(path);
  if (!parts) return std::nullopt;
  for (const auto& p : *parts) {
    if (p.find('\0') != std::string::npos) return std::nullopt;
  }
  return parts;
}

bool dir_empty(const std::string& host) {
  DIR* d = ::opendir(host.c_str());
  if (d == nullptr) return false;
  bool empty = true;
  while (auto* ent = ::readdir(d)) {
    std::string_view name = ent->d_name;
    if (name != "." && name != "..") {
      empty = false;
      break;
    }
  }
  ::closedir(d);
  return empty;
}

bool is_prefix(const std::vector<std::string>& prefix,
               const std::vector<std::string>& of) {
  return prefix.size() <= of.size() &&
         std::equal(prefix.begin(), prefix.end(), of.begin());
}

std::vector<std::string> parent_of(const std::vector<std::string>& parts) {
  return {parts.begin(), parts.end() - 1};
}

bool changes_content(const FsRequest& request) {
  switch (op_of(request)) {
    case FsOp::write:
    case FsOp::create:
    case FsOp::mkdir:
    case FsOp::unlink:
    case FsOp::rmdir:
    case FsOp::rename:
    case FsOp::truncate:
      return true;
    case FsOp::open:
      return is_writable(std::get<op::Open>(request).mode);
    default:
      return false;
  }
}

}  // namespace

DirectoryStore::DirectoryStore(std::filesystem::path root, bool read_only)
    : root_(std::move(root)), read_only_(read_only) {
  root_text_ = root_.string();
  while (root_text_.size() > 1 && root_text_.back() == '/') root_text_.pop_back();
}

DirectoryStore::~DirectoryStore() = default;

std::string DirectoryStore::host_path(const std::vector<std::string>& parts) const {
  std::string out = root_text_;
  for (const auto& p : parts) {
    out += '/';
    out += p;
  }
  return out;
}

std::variant<FsErrc, DirectoryStore::Resolved> DirectoryStore::resolve(
    const std::vector<std::string>& parts) const {
  Resolved r;
  r.host = root_text_;
  if (::lstat(r.host.c_str(), &r.st) != 0) return FsErrc::io;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!S_ISDIR(r.st.st_mode)) return FsErrc::not_dir;
    r.host += '/';
    r.host += parts[i];
    if (::lstat(r.host.c_str(), &r.st) != 0) {
      return errno == ENOENT ? FsErrc::not_found : FsErrc::io;
    }
    if (!servable(r.st)) return FsErrc::not_found;
  }
  r.exists = true;
  return r;
}

DirectoryStore::Handle* DirectoryStore::find_handle(std::uint64_t session,
                                                    std::uint64_t fh) {
  auto it = handles_.find({session, fh});
  return it == handles_.end() ? nullptr : it->second.get();
}

void DirectoryStore::close_session(std::uint64_t session) {
  auto it = handles_.lower_bound({session, 0});
  while (it != handles_.end() && it->first.first == session) {
    it = handles_.erase(it);
  }
}

FsResponse DirectoryStore::handle(std::uint64_t session, std::uint64_t seq,
                                  const FsRequest& request) {
  FsResponse response;
  response.op = op_of(request);
  if (read_only_ && changes_content(request)) {
    response.outcome = FsErrc::read_only;
    return response;
  }
  response.outcome = std::visit(
      [&](const auto& req) -> FsOutcome {
        using T = std::decay_t<decltype(req)>;
        if constexpr (std::is_same_v<T, op::Lookup> ||
                      std::is_same_v<T, op::GetAttr>) {
          return do_lookup(req.path);
        } else if constexpr (std::is_same_v<T, op::ReadDir>) {
          return do_readdir(req.path);
        } else if constexpr (std::is_same_v<T, op::Open>) {
          return do_open(session, seq, req);
        } else if constexpr (std::is_same_v<T, op::Read>) {
          return do_read(session, req);
        } else if constexpr (std::is_same_v<T, op::Write>) {
          return do_write(session, req);
        } else if constexpr (std::is_same_v<T, op::Create>) {
          return do_create(req);
        } else if constexpr (std::is_same_v<T, op::MkDir>) {
          return do_mkdir(req);
        } else if constexpr (std::is_same_v<T, op::Unlink>) {
          return do_unlink(req);
        } else if constexpr (std::is_same_v<T, op::RmDir>) {
          return do_rmdir(req);
        } else if constexpr (std::is_same_v<T, op::Rename>) {
          return do_rename(req);
        } else if constexpr (std::is_same_v<T, op::Truncate>) {
          return do_truncate(req);
        } else if constexpr (std::is_same_v<T, op::Flush>) {
          return do_flush(session, req.fh, false);
        } else {
          return do_flush(session, req.fh, true);
        }
      },
      request);
  return response;
}

FsOutcome DirectoryStore::do_lookup(const std::string& path) const {
  auto parts = parse_path(path);
  if (!parts) return FsErrc::not_found;
  auto r = resolve(*parts);
  if (auto* e = std::get_if<FsErrc>(&r)) return *e;
  return result::Attr{attr_of(std::get<Resolved>(r).st)};
}

FsOutcome DirectoryStore::do_readdir(const std::string& path) const {
  auto parts = parse_path(path);
  if (!parts) return FsErrc::not_found;
  auto r = resolve(*parts);
  if (auto* e = std::get_if<FsErrc>(&r)) return *e;
  const auto& dir = std::get<Resolved>(r);
  if (!dir.is_dir()) return FsErrc::not_dir;
  DIR* d = ::opendir(dir.host.c_str());
  if (d == nullptr) return FsErrc::io;
  result::Entries entries;
  while (auto* ent = ::readdir(d)) {
    std::string name = ent->d_name;
    if (name == "." || name == "..") continue;
    struct stat st {};
    if (::lstat((dir.host + "/" + name).c_str(), &st) != 0 || !servable(st)) {
      continue;
    }
    entries.names.push_back(std::move(name));
  }
  ::closedir(d);
  std::sort(entries.names.begin(), entries.names.end());
  return entries;
}

FsOutcome DirectoryStore::do_open(std::uint64_t session, std::uint64_t seq,
                                  const op::Open& req) {
  auto parts = parse_path(req.path);
  if (!parts) return FsErrc::not_found;
  int fd = -1;
  if (req.mode == OpenMode::create_truncate) {
    if (parts->empty()) return FsErrc::is_dir;
    auto parent = resolve(parent_of(*parts));
    if (auto* e = std::get_if<FsErrc>(&parent)) return *e;
    if (!std::get<Resolved>(parent).is_dir()) return FsErrc::not_dir;
    auto target = resolve(*parts);
    if (std::holds_alternative<Resolved>(target)) {
      const auto& existing = std::get<Resolved>(target);
      if (existing.is_dir()) return FsErrc::is_dir;
      fd = ::open(existing.host.c_str(), O_RDWR | O_TRUNC | O_NOFOLLOW | O_CLOEXEC);
    } else {
      auto host = host_path(*parts);
      fd = ::open(host.c_str(), O_RDWR | O_CREAT | O_EXCL | O_NOFOLLOW | O_CLOEXEC,
                  kDefaultFileMode);
      if (fd >= 0) ::fchmod(fd, kDefaultFileMode);
    }
  } else {
    auto target = resolve(*parts);
    if (auto* e = std::get_if<FsErrc>(&target)) return *e;
    const auto& file = std::get<Resolved>(target);
    if (file.is_dir()) return FsErrc::is_dir;
    int flags = is_writable(req.mode) ? O_RDWR : O_RDONLY;
    fd = ::open(file.host.c_str(), flags | O_NOFOLLOW | O_CLOEXEC);
  }
  if (fd < 0) return FsErrc::io;
  struct stat st {};
  ::fstat(fd, &st);
  auto h = std::make_unique<Handle>();
  h->fd = fd;
  h->readable = is_readable(req.mode);
  h->writable = is_writable(req.mode);
  handles_[{session, seq}] = std::move(h);
  return result::Opened{seq, attr_of(st)};
}

FsOutcome DirectoryStore::do_read(std::uint64_t session, const op::Read& req) {
  auto* h = find_handle(session, req.fh);
  if (h == nullptr || !h->readable) return FsErrc::bad_handle;
  if (req.len > kChunkSize) return FsErrc::io;
  struct stat st {};
  if (::fstat(h->fd, &st) != 0) return FsErrc::io;
  auto file_size = static_cast<std::uint64_t>(st.st_size);
  auto logical = file_size;
  for (const auto& [off, data] : h->pending) {
    logical = std::max<std::uint64_t>(logical, off + data.size());
  }
  result::Data out;
  if (req.offset >= logical) {
    out.eof = true;
    return out;
  }
  auto n = std::min<std::uint64_t>(req.len, logical - req.offset);
  out.data.assign(n, 0);
  if (req.offset < file_size) {
    auto want = std::min<std::uint64_t>(n, file_size - req.offset);
    std::uint64_t got = 0;
    while (got < want) {
      auto rc = ::pread(h->fd, out.data.data() + got, want - got,
                        static_cast<off_t>(req.offset + got));
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) return FsErrc::io;
      if (rc == 0) break;
      got += static_cast<std::uint64_t>(rc);
    }
  }
  auto lo = req.offset;
  auto hi = req.offset + n;
  for (const auto& [off, data] : h->pending) {
    auto from = std::max<std::uint64_t>(off, lo);
    auto to = std::min<std::uint64_t>(off + data.size(), hi);
    if (from >= to) continue;
    std::copy(data.begin() + static_cast<std::ptrdiff_t>(from - off),
              data.begin() + static_cast<std::ptrdiff_t>(to - off),
              out.data.begin() + static_cast<std::ptrdiff_t>(from - lo));
  }
  out.eof = hi >= logical;
  return out;
}

FsOutcome DirectoryStore::do_write(std::uint64_t session, const op::Write& req) {
  auto* h = find_handle(session, req.fh);
  if (h == nullptr || !h->writable) return FsErrc::bad_handle;
  if (req.data.size() > kChunkSize) return FsErrc::io;
  if (req.offset > kMaxFileSize || req.data.size() > kMaxFileSize - req.offset) {
    return FsErrc::io;
  }
  if (!req.data.empty()) h->pending.emplace_back(req.offset, req.data);
  return result::Written{req.data.size()};
}

FsOutcome DirectoryStore::do_flush(std::uint64_t session, std::uint64_t fh,
                                   bool release) {
  auto* h = find_handle(session, fh);
  if (h == nullptr) return FsErrc::bad_handle;
  bool failed = false;
  for (const auto& [off, data] : h->pending) {
    std::size_t done = 0;
    while (done < data.size()) {
      auto rc = ::pwrite(h->fd, data.data() + done, data.size() - done,
                         static_cast<off_t>(off + done));
      if (rc < 0 && errno == EINTR) continue;
      if (rc <= 0) {
        failed = true;
        break;
      }
      done += static_cast<std::size_t>(rc);
    }
  }
  h->pending.clear();
  if (release) handles_.erase({session, fh});
  if (failed) return FsErrc::io;
  return result::Done{};
}

FsOutcome DirectoryStore::do_create(const op::Create& req) {
  auto parts = parse_path(req.path);
  if (!parts) return FsErrc::not_found;
  if (parts->empty()) return FsErrc::exists;
  auto parent = resolve(parent_of(*parts));
  if (auto* e = std::get_if<FsErrc>(&parent)) return *e;
  if (!std::get<Resolved>(parent).is_dir()) return FsErrc::not_dir;
  auto host = host_path(*parts);
  struct stat st {};
  if (::lstat(host.c_str(), &st) == 0) return FsErrc::exists;
  auto mode = req.mode & 07777;
  int fd = ::open(host.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_NOFOLLOW | O_CLOEXEC,
                  mode);
  if (fd < 0) return errno == EEXIST ? FsErrc::exists : FsErrc::io;
  ::fchmod(fd, mode);
  ::fstat(fd, &st);
  ::close(fd);
  return result::Attr{attr_of(st)};
}

FsOutcome DirectoryStore::do_mkdir(const op::MkDir& req) {
  auto parts = parse_path(req.path);
  if (!parts) return FsErrc::not_found;
  if (parts->empty()) return FsErrc::exists;
  auto parent = resolve(parent_of(*parts));
  if (auto* e = std::get_if<FsErrc>(&parent)) return *e;
  if (!std::get<Resolved>(parent).is_dir()) return FsErrc::not_dir;
  auto host = host_path(*parts);
  struct stat st {};
  if (::lstat(host.c_str(), &st) == 0) return FsErrc::exists;
  if (::mkdir(host.c_str(), kDirectoryMode) != 0) {
    return errno == EEXIST ? FsErrc::exists : FsErrc::io;
  }
  ::chmod(host.c_str(), kDirectoryMode);
  ::lstat(host.c_str(), &st);
  return result::Attr{attr_of(st)};
}

FsOutcome DirectoryStore::do_unlink(const op::Unlink& req) {
  auto parts = parse_path(req.path);
  if (!parts) return FsErrc::not_found;
  if (parts->empty()) return FsErrc::is_dir;
  auto target = resolve(*parts);
  if (auto* e = std::get_if<FsErrc>(&target)) return *e;
  const auto& file = std::get<Resolved>(target);
  if (file.is_dir()) return FsErrc::is_dir;
  if (::unlink(file.host.c_str()) != 0) return FsErrc::io;
  return result::Done{};
}

FsOutcome DirectoryStore::do_rmdir(const op::RmDir& req) {
  auto parts = parse_path(req.path);
  if (!parts) return FsErrc::not_found;
  if (parts->empty()) return FsErrc::io;
  auto target = resolve(*parts);
  if (auto* e = std::get_if<FsErrc>(&target)) return *e;
  const auto& dir = std::get<Resolved>(target);
  if (!dir.is_dir()) return FsErrc::not_dir;
  if (::rmdir(dir.host.c_str()) != 0) {
    return errno == ENOTEMPTY || errno == EEXIST ? FsErrc::not_empty : FsErrc::io;
  }
  return result::Done{};
}

FsOutcome DirectoryStore::do_rename(const op::Rename& req) {
  auto from = parse_path(req.from);
  auto to = parse_path(req.to);
  if (!from || !to) return FsErrc::not_found;
  if (from->empty() || to->empty()) return FsErrc::io;
  auto source = resolve(*from);
  if (auto* e = std::get_if<FsErrc>(&source)) return *e;
  auto dest_parent = resolve(parent_of(*to));
  if (auto* e = std::get_if<FsErrc>(&dest_parent)) return *e;
  if (!std::get<Resolved>(dest_parent).is_dir()) return FsErrc::not_dir;
  if (*from == *to) return result::Done{};
  if (is_prefix(*from, *to)) return FsErrc::io;
  const auto& src = std::get<Resolved>(source);
  auto dest = resolve(*to);
  if (auto* existing = std::get_if<Resolved>(&dest)) {
    if (!src.is_dir() && existing->is_dir()) return FsErrc::is_dir;
    if (src.is_dir() && !existing->is_dir()) return FsErrc::not_dir;
    if (existing->is_dir() && !dir_empty(existing->host)) return FsErrc::not_empty;
  }
  if (::rename(src.host.c_str(), host_path(*to).c_str()) != 0) {
    return errno == ENOTEMPTY || errno == EEXIST ? FsErrc::not_empty : FsErrc::io;
  }
  return result::Done{};
}

FsOutcome DirectoryStore::do_truncate(const op::Truncate& req) {
  auto parts = parse_path(req.path);
  if (!parts) return FsErrc::not_found;
  auto target = resolve(*parts);
  if (auto* e = std::get_if<FsErrc>(&target)) return *e;
  const auto& file = std::get<Resolved>(target);
  if (file.is_dir()) return FsErrc::is_dir;
  if (req.size > kMaxFileSize) return FsErrc::io;
  if (::truncate(file.host.c_str(), static_cast<off_t>(req.size)) != 0) {
    return FsErrc::io;
  }
  return result::Done{};
}

void validate(const ExportConfig& config) {
  std::error_code ec;
  if (!std::filesystem::is_directory(config.root, ec)) {
    throw InvalidConfig("export root " + config.root.string() +
                        " is not a directory");
  }
  if (config.token.empty()) throw InvalidConfig("export token is empty");
}

namespace {
const ExportConfig& checked(const ExportConfig& config) {
  validate(config);
  return config;
}
}  // namespace

ExportServer::ExportServer(ExportConfig config, Transport& transport,
                           const std::string& bind)
    : config_(checked(config)),
      listener_(transport.listen(bind)),
      store_(config_.root, config_.read_only) {}

ExportServer::~ExportServer() = default;

const std::string& ExportServer::address() const { return listener_->address(); }

void ExportServer::drop(ConnId conn) {
  store_.close_session(conn);
  sessions_.erase(conn);
}

bool ExportServer::poll(std::optional<Nanos> timeout) {
  auto event = listener_->next(timeout);
  if (!event) return false;
  auto conn = event->conn;
  if (!event->message) {
    drop(conn);
    return true;
  }
  auto& session = sessions_[conn];
  const auto& message = *event->message;
  if (!session.authenticated) {
    auto* hello = std::get_if<wire::Hello>(&message);
    if (hello == nullptr || hello->token != config_.token) {
      listener_->close(conn);
      drop(conn);
      return true;
    }
    session.authenticated = true;
    session.name = hello->task_id;
    return true;
  }
  if (auto* req = std::get_if<wire::FsRequestFrame>(&message)) {
    if (req->seq <= session.last_seq) {
      listener_->close(conn);
      drop(conn);
      return true;
    }
    session.last_seq = req->seq;
    auto response = store_.handle(conn, req->seq, req->request);
    ++served_;
    listener_->send(conn, wire::FsResponseFrame{req->session, req->seq,
                                                std::move(response)});
    return true;
  }
  if (auto* rpc = std::get_if<wire::VolumeRpc>(&message)) {
    if (volume_handler_) {
      listener_->send(conn, volume_handler_(*rpc));
    } else {
      listener_->send(conn, wire::VolumeRpc{
                                "error", Document{{"code", "unsupported"},
                                                  {"message", "no volume broker"}}});
    }
    return true;
  }
  listener_->close(conn);
  drop(conn);
  return true;
}

void ExportServer::serve(std::stop_token stop, Nanos slice) {
  while (!stop.stop_requested()) poll(slice);
}

void ExportServer::serve_forever() {
  for (;;) poll(std::nullopt);
}

}  // namespace taskmesh::netfs
