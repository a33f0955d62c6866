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

#include "taskmesh/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "taskmesh/builtin_tasks.hpp"
#include "taskmesh/engine.hpp"

namespace taskmesh::bench {

namespace {

constexpr char kBenchToken[] = "bench";

std::string file_name(std::size_t index) {
  auto digits = std::to_string(index);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "f" + digits;
}

void provision(const std::filesystem::path& dir, std::size_t count,
               std::uint64_t size, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<char> block;
  for (std::size_t i = 0; i < count; ++i) {
    auto path = dir / file_name(i);
    std::error_code ec;
    if (std::filesystem::file_size(path, ec) == size && !ec) continue;
    std::mt19937_64 rng(seed ^ (size * 0x9e3779b97f4a7c15ULL) ^ i);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    std::uint64_t left = size;
    while (left > 0) {
      auto n = std::min<std::uint64_t>(left, 1 << 20);
      block.resize(n);
      for (std::uint64_t j = 0; j < n; j += 8) {
        auto word = rng();
        std::memcpy(block.data() + j, &word, std::min<std::uint64_t>(8, n - j));
      }
      out.write(block.data(), static_cast<std::streamsize>(n));
      left -= n;
    }
    if (!out) throw Error("io", "cannot write bench file " + path.string());
  }
}

double to_ms(Nanos n) { return static_cast<double>(n.count()) / 1e6; }

std::string ms_text(Nanos n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ms", to_ms(n));
  return buf;
}

std::string human_size(std::uint64_t size) {
  if (size >= (1u << 20) && size % (1u << 20) == 0) {
    return std::to_string(size >> 20) + " MiB";
  }
  if (size >= 1024 && size % 1024 == 0) return std::to_string(size >> 10) + " KiB";
  return std::to_string(size) + " B";
}

std::string describe(const BenchCell& cell) {
  std::ostringstream out;
  out << cell.count << " x " << human_size(cell.size) << " @ rtt "
      << cell.profile.rtt_ms << " ms, "
      << cell.profile.bandwidth * 8 / 1e6 << " Mbit/s";
  return out.str();
}

BenchResult run_cell(const BenchCell& cell, const std::filesystem::path& dir,
                     const BenchOptions& options) {
  BenchResult result;
  result.cell = cell;
  try {
    Document paths = Document::array();
    for (std::size_t i = 0; i < cell.count; ++i) {
      paths.push_back(std::string(netfs::kMountPath) + "/" + file_name(i));
    }
    auto spec = top_level_spec(
        "bench-read", {{"paths", paths}, {"window", options.window}});
    spec.placement = "node-a";
    SimRunOptions sim;
    sim.seed = options.seed;
    sim.profile = cell.profile;
    sim.export_config = netfs::ExportConfig{dir, true, kBenchToken};
    auto run = run_workflow_sim(builtin_registry(), spec, sim);
    if (!run.result.ok()) {
      throw Error(run.result.error().code, run.result.error().message);
    }
    const auto& value = run.result.value();
    for (const auto& size : value.at("sizes")) {
      if (size.get<std::uint64_t>() != cell.size) {
        throw Error("io", "short read in bench cell");
      }
    }
    for (const auto& ns : value.at("access_ns")) {
      Nanos t(ns.get<std::int64_t>());
      result.access_time = std::max(result.access_time, t);
      result.aggregate_time += t;
    }
    result.pass = result.access_time < options.threshold;
  } catch (const std::exception& e) {
    result.error = e.what();
    result.pass = false;
  }
  return result;
}

}  // namespace

BenchMatrix default_matrix() {
  BenchMatrix m;
  m.file_counts = {1, 10, 100};
  m.file_sizes = {1024, 100 * 1024, 1024 * 1024, 10 * 1024 * 1024};
  for (double rtt : {0.0, 20.0, 100.0}) {
    m.profiles.push_back(sim::NetworkProfile{rtt, kDefaultBandwidth, 0.0});
  }
  return m;
}

std::vector<BenchCell> expand(const BenchMatrix& matrix) {
  if (matrix.file_counts.empty() || matrix.file_sizes.empty() ||
      matrix.profiles.empty()) {
    throw InvalidConfig("bench matrix lists must be non-empty");
  }
  std::vector<BenchCell> cells;
  for (auto count : matrix.file_counts) {
    for (auto size : matrix.file_sizes) {
      if (size == 0) throw InvalidConfig("bench file sizes must be > 0");
      for (const auto& profile : matrix.profiles) {
        cells.push_back({count, size, profile});
      }
    }
  }
  return cells;
}

std::vector<BenchResult> run_cells(const std::vector<BenchCell>& cells,
                                   const BenchOptions& options) {
  auto work = options.work_dir;
  bool temporary = work.empty();
  if (temporary) {
    std::random_device rd;
    work = std::filesystem::temp_directory_path() /
           ("taskmesh-bench-" + std::to_string(::getpid()) + "-" +
            std::to_string(rd()));
  }
  // One directory per size holding as many files as the largest count.
  std::map<std::uint64_t, std::size_t> needed;
  for (const auto& cell : cells) {
    needed[cell.size] = std::max(needed[cell.size], cell.count);
  }
  std::map<std::uint64_t, std::filesystem::path> dirs;
  for (const auto& [size, count] : needed) {
    dirs[size] = work / ("size-" + std::to_string(size));
    provision(dirs[size], count, size, options.seed);
  }
  std::vector<BenchResult> results;
  results.reserve(cells.size());
  for (const auto& cell : cells) {
    results.push_back(run_cell(cell, dirs.at(cell.size), options));
  }
  if (temporary) {
    std::error_code ec;
    std::filesystem::remove_all(work, ec);
  }
  return results;
}

std::vector<BenchResult> run_matrix(const BenchMatrix& matrix,
                                    BenchOptions options) {
  options.threshold = matrix.threshold;
  return run_cells(expand(matrix), options);
}

Nanos simulate_transfer_time(const sim::NetworkProfile& profile,
                             std::uint64_t size, std::uint64_t chunk,
                             std::size_t window) {
  window = std::max<std::size_t>(window, 1);
  chunk = std::max<std::uint64_t>(chunk, 1);
  auto chunks = (size + chunk - 1) / chunk;
  auto rounds = std::max<std::uint64_t>((chunks + window - 1) / window, 1);
  double seconds = static_cast<double>(rounds) * profile.rtt_ms / 1e3 +
                   static_cast<double>(size) / profile.bandwidth;
  return Nanos(std::llround(seconds * 1e9));
}

ThresholdReport check_threshold(const std::vector<BenchResult>& results,
                                Nanos threshold, const Envelope& envelope) {
  ThresholdReport report;
  auto slower = [](const BenchResult& a, const BenchResult& b) {
    // Errored cells count as slowest.
    if (a.error.has_value() != b.error.has_value()) return b.error.has_value();
    return a.access_time < b.access_time;
  };
  const BenchResult* worst_inside = nullptr;
  const BenchResult* worst_failure = nullptr;
  const BenchResult* slowest = nullptr;
  for (const auto& r : results) {
    bool pass = !r.error && r.access_time < threshold;
    if (!slowest || slower(*slowest, r)) slowest = &r;
    if (pass) {
      ++report.pass_count;
      continue;
    }
    ++report.fail_count;
    if (!worst_failure || slower(*worst_failure, r)) worst_failure = &r;
    if (envelope.contains(r.cell)) {
      ++report.envelope_failures;
      if (!worst_inside || slower(*worst_inside, r)) worst_inside = &r;
    } else {
      report.exempt_failures.push_back(r);
    }
  }
  const BenchResult* worst =
      worst_inside ? worst_inside : worst_failure ? worst_failure : slowest;
  if (worst) {
    report.worst_cell = *worst;
    report.worst_cell->pass = !worst->error && worst->access_time < threshold;
  }
  return report;
}

std::string to_csv(const std::vector<BenchResult>& results) {
  std::string out = "count,size,rtt_ms,bandwidth_bps,access_ms,aggregate_ms,pass\n";
  char line[256];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%zu,%llu,%g,%.0f,%.3f,%.3f,%s\n",
                  r.cell.count, static_cast<unsigned long long>(r.cell.size),
                  r.cell.profile.rtt_ms, r.cell.profile.bandwidth * 8.0,
                  to_ms(r.access_time), to_ms(r.aggregate_time),
                  r.pass ? "true" : "false");
    out += line;
  }
  return out;
}

std::string summary(const std::vector<BenchResult>& results,
                    const ThresholdReport& report, Nanos threshold) {
  std::ostringstream out;
  Envelope envelope;
  out << results.size() << " cells, " << report.pass_count << " within "
      << ms_text(threshold) << ", " << report.fail_count << " over\n";
  out << "envelope (size <= " << human_size(envelope.max_size) << ", rtt <= "
      << envelope.max_rtt_ms << " ms): "
      << (report.ok() ? std::string("all cells pass")
                      : std::to_string(report.envelope_failures) + " failing")
      << "\n";
  if (report.worst_cell) {
    out << "worst cell: " << describe(report.worst_cell->cell) << " -> ";
    if (report.worst_cell->error) {
      out << "error: " << *report.worst_cell->error;
    } else {
      out << ms_text(report.worst_cell->access_time);
    }
    out << "\n";
  }
  for (const auto& r : report.exempt_failures) {
    out << "outside envelope, over threshold: " << describe(r.cell) << " -> "
        << (r.error ? "error: " + *r.error : ms_text(r.access_time))
        << "\n";
  }
  return out.str();
}

std::vector<BenchCell> parse_matrix_csv(std::string_view text) {
  std::vector<BenchCell> cells;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  bool jitter = false;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    return InvalidConfig("matrix line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line.erase(std::remove(line.begin(), line.end(), ' '), line.end());
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::istringstream row(line);
    std::string col;
    while (std::getline(row, col, ',')) cols.push_back(col);
    if (!header) {
      if (line == "count,size,rtt_ms,bandwidth_bps") {
        header = true;
      } else if (line == "count,size,rtt_ms,bandwidth_bps,jitter_ms") {
        header = jitter = true;
      } else {
        throw bad("expected header count,size,rtt_ms,bandwidth_bps");
      }
      continue;
    }
    if (cols.size() != (jitter ? 5u : 4u)) throw bad("wrong number of columns");
    BenchCell cell;
    try {
      std::size_t used = 0;
      auto whole = [&](const std::string& s) {
        auto v = std::stoull(s, &used);
        if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
        return v;
      };
      auto real = [&](const std::string& s) {
        auto v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
      };
      cell.count = whole(cols[0]);
      cell.size = whole(cols[1]);
      cell.profile.rtt_ms = real(cols[2]);
      cell.profile.bandwidth = real(cols[3]) / 8.0;
      if (jitter) cell.profile.jitter_ms = real(cols[4]);
    } catch (const std::logic_error&) {
      throw bad("not a number");
    }
    if (cell.count == 0 || cell.size == 0) throw bad("count and size must be > 0");
    if (cell.profile.rtt_ms < 0 || cell.profile.bandwidth <= 0 ||
        cell.profile.jitter_ms < 0) {
      throw bad("rtt and jitter must be >= 0, bandwidth > 0");
    }
    cells.push_back(cell);
  }
  if (!header) throw InvalidConfig("matrix file has no header");
  if (cells.empty()) throw InvalidConfig("matrix file has no cells");
  return cells;
}

}  // namespace taskmesh::bench
