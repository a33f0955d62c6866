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

#include "taskmesh/fs_client.hpp"

#include <algorithm>

namespace taskmesh::netfs {

namespace {

std::optional<std::string> cache_key(const FsRequest& request) {
  const std::string* path = nullptr;
  if (auto* r = std::get_if<op::GetAttr>(&request)) path = &r->path;
  if (auto* r = std::get_if<op::Lookup>(&request)) path = &r->path;
  if (path == nullptr) return std::nullopt;
  auto parts = normalize_path(*path);
  if (!parts) return std::nullopt;
  return join_path(*parts);
}

bool invalidates_cache(const FsRequest& request) {
  auto op = op_of(request);
  if (op == FsOp::open) return is_writable(std::get<op::Open>(request).mode);
  return is_mutating(op);
}

std::uint64_t chunks_for(std::uint64_t bytes) {
  return (bytes + kChunkSize - 1) / kChunkSize;
}

}  // namespace

void expect_ok(const FsResponse& response, const std::string& context) {
  if (auto error = response.error()) throw FsFailure(*error, context);
}

FsSession::FsSession(std::unique_ptr<Connection> connection, std::string session,
                     const std::string& token, const Transport& clock,
                     Nanos attr_ttl)
    : connection_(std::move(connection)),
      session_(std::move(session)),
      clock_(clock),
      attr_ttl_(attr_ttl) {
  connection_->send(wire::Hello{session_, token});
}

std::unique_ptr<FsSession> FsSession::connect(Transport& transport,
                                              const std::string& endpoint,
                                              const std::string& token,
                                              std::string session,
                                              Nanos attr_ttl) {
  return std::make_unique<FsSession>(transport.connect(endpoint),
                                     std::move(session), token, transport,
                                     attr_ttl);
}

std::optional<FsResponse> FsSession::cached(const FsRequest& request) const {
  auto key = cache_key(request);
  if (!key) return std::nullopt;
  auto it = attr_cache_.find(*key);
  if (it == attr_cache_.end() || clock_.now() >= it->second.expires) {
    return std::nullopt;
  }
  return FsResponse{op_of(request), result::Attr{it->second.attr}};
}

void FsSession::observe(const FsRequest& request, const FsResponse& response) {
  if (invalidates_cache(request)) {
    attr_cache_.clear();
    return;
  }
  auto key = cache_key(request);
  if (!key || !response.ok()) return;
  attr_cache_[*key] = {std::get<result::Attr>(response.outcome).attr,
                       clock_.now() + attr_ttl_};
}

FsResponse FsSession::receive_for(std::uint64_t seq) {
  auto message = connection_->receive(std::nullopt);
  auto* frame = message ? std::get_if<wire::FsResponseFrame>(&*message) : nullptr;
  if (frame == nullptr || frame->seq != seq) {
    connection_->close();
    throw ConnectionLost("export answered out of order");
  }
  return std::move(frame->response);
}

FsResponse FsSession::call(const FsRequest& request) {
  if (auto hit = cached(request)) {
    ++stats_.cache_hits;
    return *hit;
  }
  auto seq = next_seq_++;
  connection_->send(wire::FsRequestFrame{session_, seq, request});
  ++stats_.sent[op_of(request)];
  ++stats_.batches;
  auto response = receive_for(seq);
  observe(request, response);
  return response;
}

std::vector<FsResponse> FsSession::call_pipelined(
    std::span<const FsRequest> requests) {
  std::vector<FsResponse> out;
  if (requests.empty()) return out;
  auto first = next_seq_;
  for (const auto& request : requests) {
    connection_->send(wire::FsRequestFrame{session_, next_seq_++, request});
    ++stats_.sent[op_of(request)];
  }
  ++stats_.batches;
  out.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    out.push_back(receive_for(first + i));
    observe(requests[i], out.back());
  }
  return out;
}

FileRead FsSession::read_whole(const std::string& path, std::size_t window) {
  window = std::max<std::size_t>(window, 1);
  auto started = clock_.now();
  auto fh = next_seq_;

  // The open and the first window travel together; reads name the handle
  // the open is about to create.
  std::vector<FsRequest> batch;
  batch.push_back(op::Open{path, OpenMode::read});
  for (std::size_t i = 0; i < window; ++i) {
    batch.push_back(op::Read{fh, i * kChunkSize, kChunkSize});
  }
  auto responses = call_pipelined(batch);
  expect_ok(responses.front(), "open " + path);
  auto size = std::get<result::Opened>(responses.front().outcome).attr.size;

  FileRead out;
  out.data.reserve(size);
  std::uint64_t offset = 0;
  bool done = false;
  auto absorb = [&](std::span<const FsResponse> reads) {
    for (const auto& r : reads) {
      expect_ok(r, "read " + path);
      const auto& chunk = std::get<result::Data>(r.outcome);
      out.data.insert(out.data.end(), chunk.data.begin(), chunk.data.end());
      offset += chunk.data.size();
      if (chunk.eof || chunk.data.empty()) {
        done = true;
        return;
      }
    }
  };
  absorb(std::span(responses).subspan(1));
  while (!done) {
    auto remaining = size > offset ? chunks_for(size - offset) : 1;
    auto count = std::min<std::uint64_t>(window, std::max<std::uint64_t>(remaining, 1));
    batch.clear();
    for (std::uint64_t i = 0; i < count; ++i) {
      batch.push_back(op::Read{fh, offset + i * kChunkSize, kChunkSize});
    }
    absorb(call_pipelined(batch));
  }
  out.access_time = clock_.now() - started;
  expect_ok(call(op::Release{fh}), "release " + path);
  return out;
}

Bytes FsSession::read_file(const std::string& path, std::size_t window) {
  return read_whole(path, window).data;
}

void FsSession::write_file(const std::string& path,
                           std::span<const std::uint8_t> data) {
  auto opened = call(op::Open{path, OpenMode::create_truncate});
  expect_ok(opened, "open " + path);
  auto fh = std::get<result::Opened>(opened.outcome).fh;
  std::vector<FsRequest> batch;
  for (std::size_t off = 0; off < data.size(); off += kChunkSize) {
    auto n = std::min(kChunkSize, data.size() - off);
    batch.push_back(op::Write{fh, off, Bytes(data.begin() + off, data.begin() + off + n)});
    if (batch.size() == kDefaultReadWindow) {
      for (const auto& r : call_pipelined(batch)) expect_ok(r, "write " + path);
      batch.clear();
    }
  }
  batch.push_back(op::Flush{fh});
  batch.push_back(op::Release{fh});
  for (const auto& r : call_pipelined(batch)) expect_ok(r, "write " + path);
}

FileAttr FsSession::stat(const std::string& path) {
  auto response = call(op::GetAttr{path});
  expect_ok(response, "getattr " + path);
  return std::get<result::Attr>(response.outcome).attr;
}

std::vector<std::string> FsSession::list(const std::string& path) {
  auto response = call(op::ReadDir{path});
  expect_ok(response, "readdir " + path);
  return std::get<result::Entries>(response.outcome).names;
}

void FsSession::close() { connection_->close(); }

Workspace::Workspace(std::unique_ptr<FsSession> session, std::string mount_path)
    : session_(std::move(session)), mount_path_(std::move(mount_path)) {}

std::string Workspace::export_path(const std::string& path) const {
  auto full = path.starts_with('/') ? path : mount_path_ + "/" + path;
  auto parts = normalize_path(full);
  auto mount = normalize_path(mount_path_);
  if (!parts || !mount || parts->size() < mount->size() ||
      !std::equal(mount->begin(), mount->end(), parts->begin())) {
    throw FsFailure(FsErrc::not_found, path + " is outside " + mount_path_);
  }
  return join_path({parts->begin() + static_cast<std::ptrdiff_t>(mount->size()),
                    parts->end()});
}

Bytes Workspace::read_file(const std::string& path, std::size_t window) {
  return session_->read_file(export_path(path), window);
}

FileRead Workspace::read_whole(const std::string& path, std::size_t window) {
  return session_->read_whole(export_path(path), window);
}

void Workspace::write_file(const std::string& path,
                           std::span<const std::uint8_t> data) {
  session_->write_file(export_path(path), data);
}

std::vector<std::string> Workspace::list(const std::string& path) {
  return session_->list(export_path(path));
}

}  // namespace taskmesh::netfs
