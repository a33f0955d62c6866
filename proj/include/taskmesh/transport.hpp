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
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "taskmesh/wire.hpp"

// Ordered, reliable message streams. Two implementations: TCP sockets
// (tcp.hpp) and the simulated network on a virtual clock (sim.hpp).
namespace taskmesh {

using Nanos = std::chrono::nanoseconds;
using ConnId = std::uint64_t;

// Dialing side of a stream.
class Connection {
 public:
  virtual ~Connection() = default;

  // Throws ConnectionLost once either side has closed.
  virtual void send(const wire::Message& message) = 0;
  // nullopt on timeout (nullopt timeout waits forever). Throws
  // ConnectionLost when the peer closed and nothing is left to read.
  virtual std::optional<wire::Message> receive(std::optional<Nanos> timeout) = 0;
  virtual void close() = 0;
};

// One event off a listener: a message on a connection, or (message empty)
// that connection closing.
struct ListenerEvent {
  ConnId conn = 0;
  std::optional<wire::Message> message;
};

// Accepting side. Connections are multiplexed into a single event stream
// so one thread can serve all of them.
class Listener {
 public:
  virtual ~Listener() = default;

  virtual const std::string& address() const = 0;
  // nullopt on timeout.
  virtual std::optional<ListenerEvent> next(std::optional<Nanos> timeout) = 0;
  // Sending on a closed connection is a no-op.
  virtual void send(ConnId conn, const wire::Message& message) = 0;
  virtual void close(ConnId conn) = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;

  // Monotonic; virtual time under simulation.
  virtual Nanos now() const = 0;
  virtual void sleep_for(Nanos duration) = 0;
  // Throws BindFailure.
  virtual std::unique_ptr<Listener> listen(const std::string& bind) = 0;
  // Throws Unreachable.
  virtual std::unique_ptr<Connection> connect(const std::string& address) = 0;
  // Label of the machine this transport runs on.
  virtual std::string node() const = 0;
};

}  // namespace taskmesh
