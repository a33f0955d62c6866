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
#include <gtest/gtest.h>

#include <cmath>

#include "support/temp_dir.hpp"
#include "taskmesh/bench.hpp"
#include "taskmesh/error.hpp"

namespace taskmesh::bench {
namespace {

using std::chrono::milliseconds;

constexpr double kMiB = 1048576.0;

double ms(Nanos n) { return static_cast<double>(n.count()) / 1e6; }

sim::NetworkProfile link(double rtt_ms, double bandwidth = 12.5e6) {
  return {rtt_ms, bandwidth, 0.0};
}

BenchResult result(std::uint64_t size, double rtt_ms, double access_ms) {
  BenchResult r;
  r.cell = {1, size, link(rtt_ms)};
  r.access_time = Nanos(std::llround(access_ms * 1e6));
  r.aggregate_time = r.access_time;
  r.pass = r.access_time < kDefaultThreshold;
  return r;
}

TEST(SimulateTransferTime, LatencyFreeLinkIsPureTransfer) {
  EXPECT_NEAR(ms(simulate_transfer_time(link(0), 1000000)), 80.0, 1e-6);
  EXPECT_NEAR(ms(simulate_transfer_time(link(0, 1e9), 1024)), 1024 / 1e9 * 1e3, 1e-6);
}

TEST(SimulateTransferTime, OneMebibyteAtHundredMillisecondRtt) {
  // 1,048,576 bytes * 8 / 100e6 bit/s = 83.886 ms of transfer.
  double transfer = kMiB * 8 / 100e6 * 1e3;
  EXPECT_NEAR(ms(simulate_transfer_time(link(100), 1048576, 65536, 1)),
              16 * 100.0 + transfer, 1e-6);
  EXPECT_NEAR(ms(simulate_transfer_time(link(100), 1048576, 65536, 16)),
              100.0 + transfer, 1e-6);
  EXPECT_NEAR(100.0 + transfer, 183.886, 1e-3);
  EXPECT_NEAR(1600.0 + transfer, 1683.886, 1e-3);
}

TEST(SimulateTransferTime, AtLeastOneRound) {
  EXPECT_NEAR(ms(simulate_transfer_time(link(20), 1, 65536, 16)), 20.0 + 8e-5, 1e-6);
  EXPECT_NEAR(ms(simulate_transfer_time(link(20), 65537, 65536, 1)),
              40.0 + 65537 / 12.5e6 * 1e3, 1e-6);
}

TEST(CheckThreshold, AllPassing) {
  auto report = check_threshold({result(1024, 0, 1), result(1024, 20, 21)});
  EXPECT_EQ(report.pass_count, 2u);
  EXPECT_EQ(report.fail_count, 0u);
  EXPECT_TRUE(report.ok());
  ASSERT_TRUE(report.worst_cell);
  EXPECT_EQ(report.worst_cell->cell.profile.rtt_ms, 20.0);
}

TEST(CheckThreshold, FailureInsideTheEnvelopeBreaksTheContract) {
  auto report = check_threshold(
      {result(1024, 0, 1), result(1048576, 100, 1683.9), result(10485760, 100, 1500)});
  EXPECT_EQ(report.fail_count, 2u);
  EXPECT_EQ(report.envelope_failures, 1u);
  EXPECT_FALSE(report.ok());
  ASSERT_TRUE(report.worst_cell);
  EXPECT_EQ(report.worst_cell->cell.size, 1048576u);
}

TEST(CheckThreshold, FailureOutsideTheEnvelopeIsExempt) {
  auto report = check_threshold({result(1024, 0, 1), result(10485760, 100, 939.0),
                                 result(10485760, 100, 2000.0)});
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.fail_count, 1u);
  ASSERT_EQ(report.exempt_failures.size(), 1u);
  EXPECT_EQ(report.worst_cell->cell.size, 10485760u);
  EXPECT_NE(summary({}, report, kDefaultThreshold).find("outside envelope"), std::string::npos);
}

TEST(CheckThreshold, ExactlyAtTheThresholdFails) {
  auto report = check_threshold({result(1024, 0, 1000.0)});
  EXPECT_EQ(report.fail_count, 1u);
}

TEST(CheckThreshold, ErroredCellsFail) {
  auto r = result(1024, 0, 1);
  r.error = "boom";
  auto report = check_threshold({r});
  EXPECT_EQ(report.fail_count, 1u);
  EXPECT_FALSE(report.ok());
}

TEST(Csv, HeaderAndRows) {
  auto r = result(1024, 20, 20.5);
  r.aggregate_time = milliseconds(41);
  EXPECT_EQ(to_csv({r}),
            "count,size,rtt_ms,bandwidth_bps,access_ms,aggregate_ms,pass\n"
            "1,1024,20,100000000,20.500,41.000,true\n");
}

TEST(MatrixCsv, ParsesCellsWithAndWithoutJitter) {
  auto cells = parse_matrix_csv(
      "count,size,rtt_ms,bandwidth_bps\n# comment\n1,1024,20,100000000\n\n10,2048,0.5,8000000\n");
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0], (BenchCell{1, 1024, link(20)}));
  EXPECT_EQ(cells[1], (BenchCell{10, 2048, link(0.5, 1e6)}));
  auto jittered = parse_matrix_csv("count,size,rtt_ms,bandwidth_bps,jitter_ms\n1,1,0,8,3\n");
  ASSERT_EQ(jittered.size(), 1u);
  EXPECT_EQ(jittered[0].profile.jitter_ms, 3.0);
}

TEST(MatrixCsv, RejectsBadInput) {
  for (const char* text : {
           "1,1024,20,100000000\n",
           "count,size,rtt_ms,bandwidth_bps\n1,1024,20\n",
           "count,size,rtt_ms,bandwidth_bps\n1,abc,20,100\n",
           "count,size,rtt_ms,bandwidth_bps\n-1,1024,20,100\n",
           "count,size,rtt_ms,bandwidth_bps\n1,1024,nan,100\n",
       }) {
    EXPECT_THROW(parse_matrix_csv(text), InvalidConfig) << text;
  }
}

TEST(Matrix, DefaultMatrixHasThirtySixCells) {
  auto cells = expand(default_matrix());
  EXPECT_EQ(cells.size(), 36u);
  BenchMatrix empty = default_matrix();
  empty.file_sizes.clear();
  EXPECT_THROW(expand(empty), InvalidConfig);
  BenchMatrix zero = default_matrix();
  zero.file_sizes = {0};
  EXPECT_THROW(expand(zero), InvalidConfig);
}

TEST(RunCells, MeasuredTimesTrackTheAnalyticModel) {
  testing::TempDir dir;
  std::vector<BenchCell> cells = {
      {1, 1024, link(0, 1e9)},
      {2, 100 * 1024, link(20)},
      {1, 1048576, link(100)},
  };
  BenchOptions options;
  options.work_dir = dir.path();
  auto results = run_cells(cells, options);
  ASSERT_EQ(results.size(), cells.size());
  for (const auto& r : results) {
    ASSERT_FALSE(r.error) << *r.error;
    // rounds * rtt + size / bandwidth, with 16 chunks of 64 KiB per round.
    auto chunks = (r.cell.size + 65535) / 65536;
    auto rounds = std::max<std::uint64_t>((chunks + 15) / 16, 1);
    double expected = static_cast<double>(rounds) * r.cell.profile.rtt_ms +
                      static_cast<double>(r.cell.size) / r.cell.profile.bandwidth * 1e3;
    EXPECT_NEAR(ms(r.access_time), expected, std::max(0.05 * expected, 0.01))
        << r.cell.size;
    EXPECT_TRUE(r.pass);
    EXPECT_GE(r.aggregate_time, r.access_time);
  }
}

TEST(RunCells, SequentialReadsMissTheBudgetAtHundredMilliseconds) {
  testing::TempDir dir;
  BenchOptions options;
  options.work_dir = dir.path();
  options.window = 1;
  auto results = run_cells({{1, 1048576, link(100)}}, options);
  ASSERT_FALSE(results[0].error);
  EXPECT_NEAR(ms(results[0].access_time), 1683.886, 0.05 * 1683.886);
  EXPECT_FALSE(results[0].pass);
}

TEST(RunCells, AccessTimeIsMonotoneInRttAndSize) {
  testing::TempDir dir;
  std::vector<std::uint64_t> sizes = {1, 1024, 65536, 65537, 300000, 1048577};
  std::vector<double> rtts = {0, 5, 30, 100};
  std::vector<BenchCell> cells;
  for (auto size : sizes) {
    for (auto rtt : rtts) cells.push_back({1, size, link(rtt)});
  }
  BenchOptions options;
  options.work_dir = dir.path();
  auto results = run_cells(cells, options);
  auto at = [&](std::size_t si, std::size_t ri) {
    const auto& r = results[si * rtts.size() + ri];
    EXPECT_FALSE(r.error);
    return r.access_time;
  };
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    for (std::size_t ri = 0; ri < rtts.size(); ++ri) {
      if (ri > 0) {
        EXPECT_LE(at(si, ri - 1), at(si, ri));
      }
      if (si > 0) {
        EXPECT_LE(at(si - 1, ri), at(si, ri));
      }
    }
  }
}

TEST(RunCells, UnwritableWorkDirThrows) {
  BenchOptions options;
  options.work_dir = "/proc/taskmesh-cannot-write-here";
  EXPECT_ANY_THROW(run_cells({{1, 1024, link(0)}}, options));
}

}  // namespace
}  // namespace taskmesh::bench
