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

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "taskmesh/transport.hpp"

namespace taskmesh {

// "host:port" -> (host, port). Throws InvalidConfig.
std::pair<std::string, std::uint16_t> split_host_port(std::string_view address);

// Real sockets on the local machine. Listeners and connections are not
// internally synchronized beyond one reader plus concurrent writers on a
// Connection; a Listener belongs to one thread at a time.
class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(std::string node = "localhost");

  Nanos now() const override;
  void sleep_for(Nanos duration) override;
  // `bind` is "host:port"; empty means 127.0.0.1 on an ephemeral port.
  std::unique_ptr<Listener> listen(const std::string& bind) override;
  std::unique_ptr<Connection> connect(const std::string& address) override;
  std::string node() const override { return node_; }

 private:
  std::string node_;
};

}  // namespace taskmesh
