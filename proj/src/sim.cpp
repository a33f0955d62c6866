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

#include "taskmesh/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "taskmesh/error.hpp"

namespace taskmesh::sim {
namespace {

thread_local Kernel* tl_kernel = nullptr;
thread_local ActorId tl_actor = 0;

Nanos from_ms(double ms) { return Nanos(std::llround(ms * 1e6)); }

}  // namespace

struct Kernel::Actor {
  ActorId id = 0;
  std::string name;
  std::function<void()> body;
  std::thread thread;
  std::condition_variable cv;
  bool waiting = false;
  bool woken = false;
  std::uint64_t wait_gen = 0;
  bool kill_requested = false;
  bool done = false;
};

Kernel::Kernel(std::uint64_t seed) : rng_(seed) {}

Kernel::~Kernel() { shutdown_all(); }

ActorId Kernel::current() const noexcept {
  return tl_kernel == this ? tl_actor : 0;
}

ActorId Kernel::spawn(std::string name, std::function<void()> body) {
  auto id = ++next_actor_;
  auto actor = std::make_unique<Actor>();
  actor->id = id;
  actor->name = std::move(name);
  actor->body = std::move(body);
  auto& ref = *actor;
  actors_.emplace(id, std::move(actor));
  ref.thread = std::thread([this, &ref] { actor_main(ref); });
  schedule_at(now_, [this, id] { resume(id); });
  return id;
}

void Kernel::schedule_at(Nanos at, std::function<void()> fn) {
  events_.push(Event{std::max(at, now_), next_seq_++, std::move(fn)});
}

void Kernel::actor_main(Actor& actor) {
  tl_kernel = this;
  tl_actor = actor.id;
  {
    std::unique_lock lock(mutex_);
    actor.cv.wait(lock, [&] { return running_ == actor.id; });
  }
  try {
    if (!actor.kill_requested) actor.body();
  } catch (const Shutdown&) {
  } catch (...) {
    std::lock_guard lock(mutex_);
    if (!failure_) failure_ = std::current_exception();
  }
  actor.body = nullptr;
  {
    std::lock_guard lock(mutex_);
    actor.done = true;
    running_ = 0;
  }
  kernel_cv_.notify_one();
}

void Kernel::resume(ActorId id) {
  auto it = actors_.find(id);
  if (it == actors_.end() || it->second->done) return;
  auto& actor = *it->second;
  std::unique_lock lock(mutex_);
  running_ = id;
  actor.cv.notify_one();
  kernel_cv_.wait(lock, [&] { return running_ == 0; });
}

bool Kernel::suspend(std::optional<Nanos> deadline) {
  auto id = current();
  if (id == 0) throw std::logic_error("suspend outside a simulated actor");
  auto& actor = *actors_.at(id);
  if (actor.kill_requested) throw Shutdown{};
  actor.waiting = true;
  actor.woken = false;
  auto gen = ++actor.wait_gen;
  if (deadline) {
    schedule_at(*deadline, [this, id, gen] {
      auto it = actors_.find(id);
      if (it == actors_.end()) return;
      auto& a = *it->second;
      if (!a.waiting || a.wait_gen != gen) return;
      a.waiting = false;
      a.woken = false;
      resume(id);
    });
  }
  {
    std::unique_lock lock(mutex_);
    running_ = 0;
    kernel_cv_.notify_one();
    actor.cv.wait(lock, [&] { return running_ == id; });
  }
  if (actor.kill_requested) throw Shutdown{};
  return actor.woken;
}

void Kernel::sleep_for(Nanos duration) {
  auto until = now_ + duration;
  while (now_ < until) suspend(until);
}

void Kernel::wake(ActorId id) {
  auto it = actors_.find(id);
  if (it == actors_.end()) return;
  auto& actor = *it->second;
  if (!actor.waiting) return;
  actor.waiting = false;
  actor.woken = true;
  schedule_at(now_, [this, id] { resume(id); });
}

void Kernel::kill(ActorId id) {
  auto it = actors_.find(id);
  if (it == actors_.end() || it->second->done) return;
  auto& actor = *it->second;
  actor.kill_requested = true;
  if (actor.waiting) {
    actor.waiting = false;
    schedule_at(now_, [this, id] { resume(id); });
  }
}

bool Kernel::alive(ActorId id) const {
  auto it = actors_.find(id);
  return it != actors_.end() && !it->second->done &&
         !it->second->kill_requested;
}

void Kernel::run() {
  if (current() != 0) throw std::logic_error("Kernel::run inside an actor");
  while (!events_.empty()) {
    auto event = std::move(const_cast<Event&>(events_.top()));
    events_.pop();
    now_ = std::max(now_, event.time);
    event.fn();
  }
  shutdown_all();
  if (failure_) {
    auto failure = failure_;
    failure_ = nullptr;
    std::rethrow_exception(failure);
  }
}

void Kernel::shutdown_all() {
  for (;;) {
    std::vector<ActorId> live;
    for (auto& [id, actor] : actors_) {
      if (!actor->done) live.push_back(id);
    }
    if (live.empty()) break;
    for (auto id : live) {
      auto& actor = *actors_.at(id);
      actor.kill_requested = true;
      actor.waiting = false;
      resume(id);
    }
  }
  while (!events_.empty()) events_.pop();
  for (auto& [id, actor] : actors_) {
    if (actor->thread.joinable()) actor->thread.join();
  }
}

std::size_t payload_bytes(const wire::Message& message) {
  if (auto* req = std::get_if<wire::FsRequestFrame>(&message)) {
    if (auto* w = std::get_if<netfs::op::Write>(&req->request)) {
      return w->data.size();
    }
    return 0;
  }
  if (auto* resp = std::get_if<wire::FsResponseFrame>(&message)) {
    if (auto* d = std::get_if<netfs::result::Data>(&resp->response.outcome)) {
      return d->data.size();
    }
  }
  return 0;
}

struct Network::Link {
  Nanos free{0};
  Nanos last_arrival{0};
};

struct Network::ListenerState {
  std::string address;
  std::deque<ListenerEvent> inbox;
  std::optional<ActorId> waiter;
  std::map<ConnId, std::shared_ptr<ConnState>> conns;
  bool closed = false;
};

struct Network::ConnState {
  ConnId id = 0;
  std::weak_ptr<ListenerState> listener;
  Link up;
  Link down;
  std::deque<wire::Message> client_inbox;
  std::optional<ActorId> client_waiter;
  bool client_closed = false;
  bool server_closed = false;
  bool client_saw_close = false;
};

Network::Network(Kernel& kernel, NetworkProfile profile)
    : kernel_(kernel), profile_(profile) {
  if (profile_.bandwidth <= 0 || profile_.rtt_ms < 0 || profile_.jitter_ms < 0) {
    throw InvalidConfig("network profile needs rtt >= 0, bandwidth > 0, "
                        "jitter >= 0");
  }
}

Network::~Network() = default;

Nanos Network::deliver_at(Link& link, std::size_t bytes) {
  auto now = kernel_.now();
  auto depart = std::max(now, link.free);
  Nanos transmit{0};
  if (bytes > 0) {
    transmit = Nanos(std::llround(static_cast<double>(bytes) * 1e9 /
                                  profile_.bandwidth));
  }
  link.free = depart + transmit;
  Nanos jitter{0};
  if (profile_.jitter_ms > 0) {
    double u = static_cast<double>(kernel_.rng()() >> 11) * 0x1.0p-53;
    jitter = from_ms(u * profile_.jitter_ms);
  }
  auto arrival = link.free + from_ms(profile_.rtt_ms / 2.0) + jitter;
  arrival = std::max(arrival, link.last_arrival);
  link.last_arrival = arrival;
  return arrival;
}

void Network::close_connection(const std::shared_ptr<ConnState>& conn,
                               bool from_client) {
  if (from_client) {
    if (conn->client_closed) return;
    conn->client_closed = true;
    auto at = deliver_at(conn->up, 0);
    std::weak_ptr<ConnState> weak = conn;
    kernel_.schedule_at(at, [this, weak] {
      auto c = weak.lock();
      if (!c) return;
      auto l = c->listener.lock();
      if (!l || l->closed || c->server_closed) return;
      l->conns.erase(c->id);
      l->inbox.push_back({c->id, std::nullopt});
      if (l->waiter) kernel_.wake(*l->waiter);
    });
    return;
  }
  if (conn->server_closed) return;
  conn->server_closed = true;
  auto at = deliver_at(conn->down, 0);
  std::weak_ptr<ConnState> weak = conn;
  kernel_.schedule_at(at, [this, weak] {
    auto c = weak.lock();
    if (!c) return;
    c->client_saw_close = true;
    if (c->client_waiter) kernel_.wake(*c->client_waiter);
  });
}

class SimConnection final : public Connection {
 public:
  SimConnection(Network& net, std::shared_ptr<Network::ConnState> state)
      : net_(net), state_(std::move(state)) {}
  ~SimConnection() override { close(); }

  void send(const wire::Message& message) override {
    if (state_->client_closed || state_->client_saw_close) {
      throw ConnectionLost("simulated connection closed");
    }
    auto at = net_.deliver_at(state_->up, payload_bytes(message));
    std::weak_ptr<Network::ConnState> weak = state_;
    net_.kernel_.schedule_at(at, [net = &net_, weak, message] {
      auto c = weak.lock();
      if (!c) return;
      auto l = c->listener.lock();
      if (!l || l->closed || c->server_closed) return;
      l->inbox.push_back({c->id, message});
      ++net->frames_delivered_;
      if (l->waiter) net->kernel_.wake(*l->waiter);
    });
  }

  std::optional<wire::Message> receive(std::optional<Nanos> timeout) override {
    auto& kernel = net_.kernel_;
    std::optional<Nanos> deadline;
    if (timeout) deadline = kernel.now() + *timeout;
    for (;;) {
      if (!state_->client_inbox.empty()) {
        auto m = std::move(state_->client_inbox.front());
        state_->client_inbox.pop_front();
        return m;
      }
      if (state_->client_saw_close || state_->client_closed) {
        throw ConnectionLost("simulated connection closed by peer");
      }
      if (deadline && kernel.now() >= *deadline) return std::nullopt;
      state_->client_waiter = kernel.current();
      kernel.suspend(deadline);
      state_->client_waiter.reset();
    }
  }

  void close() override { net_.close_connection(state_, true); }

 private:
  Network& net_;
  std::shared_ptr<Network::ConnState> state_;
};

class SimListener final : public Listener {
 public:
  SimListener(Network& net, std::shared_ptr<Network::ListenerState> state)
      : net_(net), state_(std::move(state)) {}

  ~SimListener() override {
    auto conns = state_->conns;
    for (auto& [id, conn] : conns) net_.close_connection(conn, false);
    state_->conns.clear();
    state_->closed = true;
    net_.listeners_.erase(state_->address);
  }

  const std::string& address() const override { return state_->address; }

  std::optional<ListenerEvent> next(std::optional<Nanos> timeout) override {
    auto& kernel = net_.kernel_;
    std::optional<Nanos> deadline;
    if (timeout) deadline = kernel.now() + *timeout;
    for (;;) {
      if (!state_->inbox.empty()) {
        auto ev = std::move(state_->inbox.front());
        state_->inbox.pop_front();
        return ev;
      }
      if (deadline && kernel.now() >= *deadline) return std::nullopt;
      state_->waiter = kernel.current();
      kernel.suspend(deadline);
      state_->waiter.reset();
    }
  }

  void send(ConnId id, const wire::Message& message) override {
    auto it = state_->conns.find(id);
    if (it == state_->conns.end()) return;
    auto conn = it->second;
    if (conn->server_closed || conn->client_closed) return;
    auto at = net_.deliver_at(conn->down, payload_bytes(message));
    std::weak_ptr<Network::ConnState> weak = conn;
    net_.kernel_.schedule_at(at, [net = &net_, weak, message] {
      auto c = weak.lock();
      if (!c || c->client_closed) return;
      c->client_inbox.push_back(message);
      ++net->frames_delivered_;
      if (c->client_waiter) net->kernel_.wake(*c->client_waiter);
    });
  }

  void close(ConnId id) override {
    auto it = state_->conns.find(id);
    if (it == state_->conns.end()) return;
    auto conn = it->second;
    state_->conns.erase(it);
    net_.close_connection(conn, false);
  }

 private:
  Network& net_;
  std::shared_ptr<Network::ListenerState> state_;
};

class SimHost final : public Transport {
 public:
  SimHost(Network& net, std::string node) : net_(net), node_(std::move(node)) {}

  Nanos now() const override { return net_.kernel_.now(); }
  void sleep_for(Nanos duration) override { net_.kernel_.sleep_for(duration); }

  std::unique_ptr<Listener> listen(const std::string& bind) override {
    auto name = bind.empty() ? std::to_string(++net_.next_listener_) : bind;
    auto address = "sim://" + node_ + "/" + name;
    auto existing = net_.listeners_.find(address);
    if (existing != net_.listeners_.end() && !existing->second.expired()) {
      throw BindFailure("address " + address + " already in use");
    }
    auto state = std::make_shared<Network::ListenerState>();
    state->address = address;
    net_.listeners_[address] = state;
    return std::make_unique<SimListener>(net_, std::move(state));
  }

  std::unique_ptr<Connection> connect(const std::string& address) override {
    auto it = net_.listeners_.find(address);
    auto listener = it == net_.listeners_.end() ? nullptr : it->second.lock();
    if (!listener || listener->closed) {
      throw Unreachable("no simulated listener at " + address);
    }
    auto conn = std::make_shared<Network::ConnState>();
    conn->id = ++net_.next_conn_;
    conn->listener = listener;
    listener->conns[conn->id] = conn;
    return std::make_unique<SimConnection>(net_, std::move(conn));
  }

  std::string node() const override { return node_; }

 private:
  Network& net_;
  std::string node_;
};

std::unique_ptr<Transport> Network::host(std::string node) {
  return std::make_unique<SimHost>(*this, std::move(node));
}

}  // namespace taskmesh::sim
