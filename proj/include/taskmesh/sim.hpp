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

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "taskmesh/transport.hpp"

namespace taskmesh::sim {

using ActorId = std::uint64_t;

// Thrown inside an actor that is being killed or shut down. Deliberately
// not a std::exception so task-level catch blocks let it through.
struct Shutdown {};

// Discrete-event kernel with a virtual clock.
//
// Actors are ordinary blocking functions, each on its own thread, but only
// one of them (or the kernel) runs at any moment. Blocking calls suspend
// the actor and hand control back to the kernel, which advances time to the
// next event. Event order is (time, insertion sequence), so a run is fully
// determined by the seed and the actor code.
class Kernel {
 public:
  explicit Kernel(std::uint64_t seed = 1);
  ~Kernel();

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  Nanos now() const noexcept { return now_; }
  std::mt19937_64& rng() noexcept { return rng_; }

  ActorId spawn(std::string name, std::function<void()> body);
  void schedule_at(Nanos at, std::function<void()> fn);

  // Runs until no events remain, then kills every actor still blocked.
  // Rethrows the first exception that escaped an actor body.
  void run();

  // The calling actor, or 0 on a non-actor thread.
  ActorId current() const noexcept;

  // Actor context only. Returns true when woken, false at the deadline.
  bool suspend(std::optional<Nanos> deadline);
  void sleep_for(Nanos duration);

  // Resumes a suspended actor at the current time. No-op otherwise.
  void wake(ActorId actor);
  // The actor unwinds with Shutdown the next time it runs.
  void kill(ActorId actor);
  bool alive(ActorId actor) const;

 private:
  struct Actor;
  struct Event {
    Nanos time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void resume(ActorId actor);
  void actor_main(Actor& actor);
  void shutdown_all();

  Nanos now_{0};
  std::uint64_t next_seq_ = 0;
  ActorId next_actor_ = 0;
  std::mt19937_64 rng_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::map<ActorId, std::unique_ptr<Actor>> actors_;

  mutable std::mutex mutex_;
  std::condition_variable kernel_cv_;
  ActorId running_ = 0;
  std::exception_ptr failure_;
};

// Link characteristics applied to every simulated connection.
struct NetworkProfile {
  double rtt_ms = 0.0;
  double bandwidth = 12.5e6;  // bytes per second
  double jitter_ms = 0.0;     // uniform in [0, jitter_ms] per frame

  bool operator==(const NetworkProfile&) const = default;
};

// Bytes a message costs on a simulated link: the file data it carries
// (read results and write payloads). Control fields ride free.
std::size_t payload_bytes(const wire::Message& message);

// In-memory network between named nodes. Each connection direction is a
// FIFO link: a frame departs when the link is free, occupies it for
// bytes/bandwidth, and arrives rtt/2 (+ jitter) later, never overtaking an
// earlier frame.
class Network {
 public:
  Network(Kernel& kernel, NetworkProfile profile);
  ~Network();

  Kernel& kernel() noexcept { return kernel_; }
  const NetworkProfile& profile() const noexcept { return profile_; }

  std::unique_ptr<Transport> host(std::string node);

  std::uint64_t frames_delivered() const noexcept { return frames_delivered_; }

  struct ListenerState;
  struct ConnState;
  struct Link;

 private:
  friend class SimHost;
  friend class SimListener;
  friend class SimConnection;

  Nanos deliver_at(Link& link, std::size_t bytes);
  void close_connection(const std::shared_ptr<ConnState>& conn, bool from_client);

  Kernel& kernel_;
  NetworkProfile profile_;
  std::map<std::string, std::weak_ptr<ListenerState>> listeners_;
  std::uint64_t next_listener_ = 0;
  std::uint64_t next_conn_ = 0;
  std::uint64_t frames_delivered_ = 0;
};

}  // namespace taskmesh::sim
