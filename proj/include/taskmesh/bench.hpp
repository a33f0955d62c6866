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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskmesh/fs_protocol.hpp"
#include "taskmesh/sim.hpp"

// File-access latency study: how long a remote task needs to open and read
// workspace files under various network conditions, on the virtual clock.
namespace taskmesh::bench {

inline constexpr Nanos kDefaultThreshold = std::chrono::milliseconds(1000);
inline constexpr double kDefaultBandwidth = 12.5e6;  // 100 Mbit/s in bytes/s

struct BenchCell {
  std::size_t count = 1;
  std::uint64_t size = 1;
  sim::NetworkProfile profile;

  bool operator==(const BenchCell&) const = default;
};

struct BenchMatrix {
  std::vector<std::size_t> file_counts;
  std::vector<std::uint64_t> file_sizes;
  std::vector<sim::NetworkProfile> profiles;
  Nanos threshold = kDefaultThreshold;
};

// counts {1,10,100} x sizes {1 KiB, 100 KiB, 1 MiB, 10 MiB} x rtt
// {0, 20, 100} ms at 100 Mbit/s.
BenchMatrix default_matrix();
// Throws InvalidConfig when a list is empty or a size is zero.
std::vector<BenchCell> expand(const BenchMatrix& matrix);

struct BenchResult {
  BenchCell cell;
  Nanos access_time{0};     // slowest single file: open + full read
  Nanos aggregate_time{0};  // all files
  bool pass = false;        // access_time < threshold
  std::optional<std::string> error;
};

struct BenchOptions {
  // Where export directories are provisioned; a temp dir when empty.
  std::filesystem::path work_dir;
  std::size_t window = 16;
  std::uint64_t seed = 1;
  Nanos threshold = kDefaultThreshold;
};

// Cells run one after another, each on a fresh simulated network. A cell
// that fails records its error and the matrix moves on.
std::vector<BenchResult> run_cells(const std::vector<BenchCell>& cells,
                                   const BenchOptions& options);
std::vector<BenchResult> run_matrix(const BenchMatrix& matrix,
                                    BenchOptions options);

// rounds * rtt + size / bandwidth, with rounds = ceil(ceil(size/chunk)/window)
// (at least one). Jitter is ignored.
Nanos simulate_transfer_time(const sim::NetworkProfile& profile, std::uint64_t size,
                             std::uint64_t chunk = netfs::kChunkSize,
                             std::size_t window = 16);

// The cells the 1-second claim is made for.
struct Envelope {
  std::uint64_t max_size = 1024 * 1024;
  double max_rtt_ms = 100.0;

  bool contains(const BenchCell& cell) const {
    return cell.size <= max_size && cell.profile.rtt_ms <= max_rtt_ms;
  }
};

struct ThresholdReport {
  std::size_t pass_count = 0;
  std::size_t fail_count = 0;
  std::size_t envelope_failures = 0;
  std::optional<BenchResult> worst_cell;
  std::vector<BenchResult> exempt_failures;  // failing cells outside the envelope

  // The exit contract: every cell inside the envelope passes.
  bool ok() const noexcept { return envelope_failures == 0; }
};

// Expects a non-empty list. The worst cell is the slowest failure inside
// the envelope, else the slowest failure, else the slowest cell.
ThresholdReport check_threshold(const std::vector<BenchResult>& results,
                                Nanos threshold = kDefaultThreshold,
                                const Envelope& envelope = {});

// count,size,rtt_ms,bandwidth_bps,access_ms,aggregate_ms,pass
// bandwidth_bps is in bits per second.
std::string to_csv(const std::vector<BenchResult>& results);
std::string summary(const std::vector<BenchResult>& results,
                    const ThresholdReport& report, Nanos threshold);

// Matrix file: header "count,size,rtt_ms,bandwidth_bps" (optionally
// ",jitter_ms"), then one cell per row. Throws InvalidConfig.
std::vector<BenchCell> parse_matrix_csv(std::string_view text);

}  // namespace taskmesh::bench
