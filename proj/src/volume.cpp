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

#include "taskmesh/volume.hpp"

#include "doc_fields.hpp"
#include "taskmesh/error.hpp"
#include "taskmesh/fs_client.hpp"

namespace taskmesh::volume {

namespace {

[[noreturn]] void raise(const std::string& code, const std::string& message) {
  if (code == "unknown-volume") throw UnknownVolume(message);
  if (code == "volume-deleted") throw VolumeDeleted(message);
  if (code == "volume-busy") throw VolumeBusy(message);
  if (code == "endpoint-unreachable") throw EndpointUnreachable(message);
  if (code == "auth-rejected") throw AuthRejected(message);
  if (code == "malformed-payload") throw MalformedPayload(message);
  throw Error(code, message);
}

}  // namespace

std::string_view to_string(VolumeState state) {
  switch (state) {
    case VolumeState::created:
      return "created";
    case VolumeState::published:
      return "published";
    case VolumeState::deleted:
      return "deleted";
  }
  return "?";
}

void probe_export(Transport& transport, const std::string& endpoint,
                  const std::string& token) {
  std::unique_ptr<netfs::FsSession> session;
  try {
    session = netfs::FsSession::connect(transport, endpoint, token, "volume-probe");
  } catch (const Unreachable& e) {
    throw EndpointUnreachable(e.what());
  } catch (const ConnectionLost& e) {
    throw EndpointUnreachable(e.what());
  }
  try {
    session->call(netfs::op::GetAttr{"/"});
  } catch (const ConnectionLost&) {
    throw AuthRejected("export at " + endpoint + " refused the token");
  }
  session->close();
}

VolumeBroker::VolumeBroker(ExportProber prober) : prober_(std::move(prober)) {}

VolumeRecord& VolumeBroker::at(const std::string& volume) {
  auto it = volumes_.find(volume);
  if (it == volumes_.end()) throw UnknownVolume("no volume " + volume);
  return it->second;
}

std::string VolumeBroker::create_volume(const std::string& endpoint,
                                        const std::string& token) {
  prober_(endpoint, token);
  std::lock_guard lock(mutex_);
  VolumeRecord record;
  record.id = "vol-" + std::to_string(++next_);
  record.endpoint = endpoint;
  record.token = token;
  auto id = record.id;
  volumes_.emplace(id, std::move(record));
  return id;
}

netfs::MountSpec VolumeBroker::publish_volume(const std::string& volume,
                                              const TaskId& task) {
  std::lock_guard lock(mutex_);
  auto& record = at(volume);
  if (record.state == VolumeState::deleted) {
    throw VolumeDeleted("volume " + volume + " was deleted");
  }
  record.published_to.insert(task);
  record.state = VolumeState::published;
  return netfs::MountSpec{record.endpoint, record.token,
                          std::string(netfs::kMountPath)};
}

void VolumeBroker::unpublish_volume(const std::string& volume, const TaskId& task) {
  std::lock_guard lock(mutex_);
  auto& record = at(volume);
  record.published_to.erase(task);
  if (record.state == VolumeState::published && record.published_to.empty()) {
    record.state = VolumeState::created;
  }
}

void VolumeBroker::delete_volume(const std::string& volume) {
  std::lock_guard lock(mutex_);
  auto& record = at(volume);
  if (!record.published_to.empty()) {
    throw VolumeBusy("volume " + volume + " is published to " +
                     std::to_string(record.published_to.size()) + " task(s)");
  }
  record.state = VolumeState::deleted;
}

std::optional<VolumeRecord> VolumeBroker::find(const std::string& volume) const {
  std::lock_guard lock(mutex_);
  auto it = volumes_.find(volume);
  if (it == volumes_.end()) return std::nullopt;
  return it->second;
}

std::vector<VolumeRecord> VolumeBroker::records() const {
  std::lock_guard lock(mutex_);
  std::vector<VolumeRecord> out;
  for (const auto& [id, record] : volumes_) out.push_back(record);
  return out;
}

wire::VolumeRpc handle_volume_rpc(VolumeBroker& broker,
                                  const wire::VolumeRpc& request) {
  using fields::string_at;
  try {
    const auto& args = request.args;
    fields::require_object(args, "volume_rpc args");
    if (request.call == "create") {
      fields::require_exact(args, {"endpoint", "token"}, {});
      auto id = broker.create_volume(string_at(args, "endpoint"),
                                     string_at(args, "token"));
      return {"reply", Document{{"volume", id}}};
    }
    if (request.call == "publish" || request.call == "unpublish") {
      fields::require_exact(args, {"volume", "task"}, {});
      auto task = TaskId::try_parse(string_at(args, "task"));
      if (!task) throw MalformedPayload("task is not a task id");
      auto volume = string_at(args, "volume");
      if (request.call == "publish") {
        return {"reply", to_document(broker.publish_volume(volume, *task))};
      }
      broker.unpublish_volume(volume, *task);
      return {"reply", Document::object()};
    }
    if (request.call == "delete") {
      fields::require_exact(args, {"volume"}, {});
      broker.delete_volume(string_at(args, "volume"));
      return {"reply", Document::object()};
    }
    throw MalformedPayload("unknown volume call '" + request.call + "'");
  } catch (const Error& e) {
    return {"error", Document{{"code", e.code()}, {"message", e.what()}}};
  }
}

VolumeClient::VolumeClient(Transport& transport, const std::string& endpoint,
                           const std::string& token) {
  try {
    connection_ = transport.connect(endpoint);
  } catch (const Unreachable& e) {
    throw EndpointUnreachable(e.what());
  }
  connection_->send(wire::Hello{"volume-client", token});
}

Document VolumeClient::call(const std::string& name, Document args) {
  std::optional<wire::Message> reply;
  try {
    connection_->send(wire::VolumeRpc{name, std::move(args)});
    reply = connection_->receive(std::nullopt);
  } catch (const ConnectionLost&) {
    throw AuthRejected("export closed the connection; wrong token?");
  }
  auto* rpc = reply ? std::get_if<wire::VolumeRpc>(&*reply) : nullptr;
  if (rpc == nullptr) throw MalformedPayload("expected a volume_rpc reply");
  if (rpc->call == "error") {
    if (!rpc->args.is_object()) throw MalformedPayload("bad volume_rpc error");
    raise(rpc->args.value("code", "io"), rpc->args.value("message", ""));
  }
  return rpc->args;
}

std::string VolumeClient::create_volume(const std::string& endpoint,
                                        const std::string& token) {
  auto reply = call("create", Document{{"endpoint", endpoint}, {"token", token}});
  return fields::string_at(reply, "volume");
}

netfs::MountSpec VolumeClient::publish_volume(const std::string& volume,
                                              const TaskId& task) {
  return netfs::mount_spec_from_document(
      call("publish", Document{{"volume", volume}, {"task", task.str()}}));
}

void VolumeClient::unpublish_volume(const std::string& volume, const TaskId& task) {
  call("unpublish", Document{{"volume", volume}, {"task", task.str()}});
}

void VolumeClient::delete_volume(const std::string& volume) {
  call("delete", Document{{"volume", volume}});
}

}  // namespace taskmesh::volume
