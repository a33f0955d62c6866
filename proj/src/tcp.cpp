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

#include "taskmesh/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "taskmesh/error.hpp"

namespace taskmesh {
namespace {

constexpr std::size_t kReadBuffer = 256 * 1024;

using Clock = std::chrono::steady_clock;

int poll_timeout_ms(std::optional<Clock::time_point> deadline) {
  if (!deadline) return -1;
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      *deadline - Clock::now());
  if (left.count() <= 0) return 0;
  return static_cast<int>(left.count()) + 1;
}

std::optional<Clock::time_point> deadline_after(std::optional<Nanos> timeout) {
  if (!timeout) return std::nullopt;
  return Clock::now() + *timeout;
}

bool write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    auto n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &found) != 0 || !found) {
    throw Unreachable("cannot resolve host '" + host + "'");
  }
  sockaddr_in addr{};
  std::memcpy(&addr, found->ai_addr, sizeof(addr));
  ::freeaddrinfo(found);
  addr.sin_port = htons(port);
  return addr;
}

class TcpConnection final : public Connection {
 public:
  TcpConnection(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)) {}
  ~TcpConnection() override { close(); }

  void send(const wire::Message& message) override {
    auto frame = wire::encode_frame(message);
    std::lock_guard lock(write_mutex_);
    if (fd_ < 0 || !write_all(fd_, frame)) {
      throw ConnectionLost("connection to " + peer_ + " lost");
    }
  }

  std::optional<wire::Message> receive(std::optional<Nanos> timeout) override {
    auto deadline = deadline_after(timeout);
    std::vector<char> buf(kReadBuffer);
    for (;;) {
      try {
        if (auto m = decoder_.next()) return m;
      } catch (const Error& e) {
        throw ConnectionLost("malformed stream from " + peer_ + ": " +
                             e.what());
      }
      if (fd_ < 0 || eof_) {
        throw ConnectionLost("connection to " + peer_ + " closed");
      }
      pollfd pfd{fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, poll_timeout_ms(deadline));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ConnectionLost(std::strerror(errno));
      }
      if (rc == 0) {
        if (deadline && Clock::now() >= *deadline) return std::nullopt;
        continue;
      }
      auto n = ::recv(fd_, buf.data(), buf.size(), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        eof_ = true;
        continue;
      }
      decoder_.feed(std::string_view(buf.data(), static_cast<std::size_t>(n)));
    }
  }

  void close() override {
    std::lock_guard lock(write_mutex_);
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::string peer_;
  bool eof_ = false;
  wire::FrameDecoder decoder_;
  std::mutex write_mutex_;
};

class TcpListener final : public Listener {
 public:
  TcpListener(int fd, std::string address)
      : fd_(fd), address_(std::move(address)) {}

  ~TcpListener() override {
    for (auto& [id, conn] : conns_) ::close(conn.fd);
    ::close(fd_);
  }

  const std::string& address() const override { return address_; }

  std::optional<ListenerEvent> next(std::optional<Nanos> timeout) override {
    auto deadline = deadline_after(timeout);
    std::vector<char> buf(kReadBuffer);
    for (;;) {
      if (!pending_.empty()) {
        auto ev = std::move(pending_.front());
        pending_.pop_front();
        return ev;
      }
      std::vector<pollfd> fds;
      std::vector<ConnId> ids;
      fds.push_back({fd_, POLLIN, 0});
      for (auto& [id, conn] : conns_) {
        fds.push_back({conn.fd, POLLIN, 0});
        ids.push_back(id);
      }
      int rc = ::poll(fds.data(), fds.size(), poll_timeout_ms(deadline));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ConnectionLost(std::strerror(errno));
      }
      if (rc == 0) {
        if (deadline && Clock::now() >= *deadline) return std::nullopt;
        continue;
      }
      if (fds[0].revents & POLLIN) accept_one();
      for (std::size_t i = 1; i < fds.size(); ++i) {
        if (fds[i].revents == 0) continue;
        read_from(ids[i - 1], buf);
      }
    }
  }

  void send(ConnId conn, const wire::Message& message) override {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    auto frame = wire::encode_frame(message);
    write_all(it->second.fd, frame);
  }

  void close(ConnId conn) override {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    ::shutdown(it->second.fd, SHUT_RDWR);
    ::close(it->second.fd);
    conns_.erase(it);
  }

 private:
  struct Conn {
    int fd = -1;
    wire::FrameDecoder decoder;
  };

  void accept_one() {
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) return;
    set_nodelay(cfd);
    auto id = ++next_id_;
    conns_[id].fd = cfd;
  }

  void drop(ConnId id) {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    ::close(it->second.fd);
    conns_.erase(it);
    pending_.push_back({id, std::nullopt});
  }

  void read_from(ConnId id, std::vector<char>& buf) {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    auto n = ::recv(it->second.fd, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) return;
    if (n <= 0) {
      drop(id);
      return;
    }
    auto& decoder = it->second.decoder;
    decoder.feed(std::string_view(buf.data(), static_cast<std::size_t>(n)));
    try {
      while (auto m = decoder.next()) pending_.push_back({id, std::move(m)});
    } catch (const Error&) {
      drop(id);
    }
  }

  int fd_;
  std::string address_;
  std::map<ConnId, Conn> conns_;
  std::deque<ListenerEvent> pending_;
  ConnId next_id_ = 0;
};

}  // namespace

std::pair<std::string, std::uint16_t> split_host_port(std::string_view address) {
  auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw InvalidConfig("address '" + std::string(address) +
                        "' is not host:port");
  }
  auto port_text = address.substr(colon + 1);
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(std::string(port_text), &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw InvalidConfig("bad port in '" + std::string(address) + "'");
  }
  if (port > 65535) {
    throw InvalidConfig("bad port in '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)),
          static_cast<std::uint16_t>(port)};
}

TcpTransport::TcpTransport(std::string node) : node_(std::move(node)) {}

Nanos TcpTransport::now() const {
  return std::chrono::duration_cast<Nanos>(Clock::now().time_since_epoch());
}

void TcpTransport::sleep_for(Nanos duration) {
  std::this_thread::sleep_for(duration);
}

std::unique_ptr<Listener> TcpTransport::listen(const std::string& bind) {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  if (!bind.empty()) {
    try {
      std::tie(host, port) = split_host_port(bind);
    } catch (const InvalidConfig& e) {
      throw BindFailure(e.what());
    }
  }
  sockaddr_in addr{};
  try {
    addr = resolve(host, port);
  } catch (const Unreachable& e) {
    throw BindFailure(e.what());
  }
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw BindFailure(std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd, 128) != 0) {
    std::string why = std::strerror(errno);
    ::close(fd);
    throw BindFailure("cannot listen on " + host + ":" +
                      std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  char text[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, text, sizeof(text));
  return std::make_unique<TcpListener>(
      fd, std::string(text) + ":" + std::to_string(ntohs(addr.sin_port)));
}

std::unique_ptr<Connection> TcpTransport::connect(const std::string& address) {
  std::string host;
  std::uint16_t port = 0;
  try {
    std::tie(host, port) = split_host_port(address);
  } catch (const InvalidConfig& e) {
    throw Unreachable(e.what());
  }
  auto addr = resolve(host, port);
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Unreachable(std::strerror(errno));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    std::string why = std::strerror(errno);
    ::close(fd);
    throw Unreachable("cannot connect to " + address + ": " + why);
  }
  set_nodelay(fd);
  return std::make_unique<TcpConnection>(fd, address);
}

}  // namespace taskmesh
