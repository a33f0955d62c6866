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

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "support/temp_dir.hpp"
#include "taskmesh/error.hpp"
#include "taskmesh/tcp.hpp"

extern char** environ;

namespace taskmesh::cli {
namespace {

using std::chrono::milliseconds;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = parse_and_dispatch(args, out, err, TASKMESH_CLI_PATH);
  return {code, out.str(), err.str()};
}

TEST(Cli, RunAddOnTheSimulator) {
  auto r = run_cli({"run", "add", "--input", "a=1", "--input", "b=2", "--backend", "sim"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "3\n");
}

TEST(Cli, RunOutputIsStableAcrossInvocations) {
  std::vector<std::string> args = {"run", "diamond", "--input", "x=6", "--input", "y=8",
                                   "--backend", "sim", "--rtt-ms", "7", "--jitter-ms", "3",
                                   "--seed", "5"};
  auto first = run_cli(args);
  auto second = run_cli(args);
  EXPECT_EQ(first.code, kExitOk) << first.err;
  EXPECT_EQ(first.out, second.out);
  EXPECT_EQ(first.out, "100\n");
}

TEST(Cli, UnknownEntrypointIsADomainError) {
  auto r = run_cli({"run", "nope", "--backend", "sim"});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("unknown-entrypoint"), std::string::npos) << r.err;
}

TEST(Cli, FailingTaskIsADomainError) {
  auto r = run_cli({"run", "fail", "--input", "message=boom", "--backend", "sim"});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("boom"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"frobnicate"},
           {"run"},
           {"run", "add", "--bogus"},
           {"run", "add", "--backend", "cloud"},
           {"run", "add", "--input", "novalue"},
           {"run", "add", "--input", "a=1", "--input", "a=2"},
           {"run", "add", "--rtt-ms", "-5"},
           {"export", "--root", "/nonexistent-dir", "--listen", "127.0.0.1:0", "--token", "t"},
           {"volume", "create", "--token", "t"},
           {"bench", "--matrix", "/nonexistent/matrix.csv"},
       }) {
    auto r = run_cli(args);
    EXPECT_EQ(r.code, kExitUsage) << ::testing::PrintToString(args) << r.err;
  }
}

TEST(Cli, HelpExitsZero) {
  auto r = run_cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("run"), std::string::npos);
}

TEST(Cli, RunWithAnExportedWorkspace) {
  testing::TempDir dir;
  std::ofstream(dir / "notes.txt") << "hello";
  auto r = run_cli({"run", "cat", "--input", "path=/workspace/notes.txt", "--backend", "sim",
                    "--export-root", dir.path().string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "\"hello\"\n");
}

TEST(Cli, RunOnTheProcessBackend) {
  auto r = run_cli({"run", "add", "--input", "a=20", "--input", "b=22", "--backend", "process"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "42\n");
}

TEST(Cli, BenchExitContract) {
  testing::TempDir dir;
  std::ofstream(dir / "ok.csv") << "count,size,rtt_ms,bandwidth_bps\n1,1024,20,100000000\n";
  auto passing = run_cli({"bench", "--matrix", (dir / "ok.csv").string(), "--work-dir",
                          (dir / "work").string()});
  EXPECT_EQ(passing.code, kExitOk) << passing.err;
  EXPECT_NE(passing.out.find("count,size,rtt_ms,bandwidth_bps,access_ms,aggregate_ms,pass"),
            std::string::npos);
  std::ofstream(dir / "slow.csv") << "count,size,rtt_ms,bandwidth_bps\n1,1048576,100,100000000\n";
  auto failing = run_cli({"bench", "--matrix", (dir / "slow.csv").string(), "--window", "1",
                          "--work-dir", (dir / "work").string(), "--csv",
                          (dir / "out.csv").string()});
  EXPECT_EQ(failing.code, kExitDomain);
  std::ifstream csv(dir / "out.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "count,size,rtt_ms,bandwidth_bps,access_ms,aggregate_ms,pass");
}

// The export command blocks, so it runs as a child process.
class ExportProcess {
 public:
  ExportProcess(const std::filesystem::path& root, const std::string& listen) {
    std::vector<std::string> args = {TASKMESH_CLI_PATH, "export", "--root", root.string(),
                                     "--listen", listen, "--token", "t"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    if (::posix_spawn(&pid_, argv[0], nullptr, nullptr, argv.data(), environ) != 0) {
      pid_ = -1;
    }
  }
  ~ExportProcess() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }
  pid_t pid() const { return pid_; }
  int stop() {
    int status = 0;
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

 private:
  pid_t pid_ = -1;
};

std::string free_address() {
  TcpTransport transport;
  return transport.listen("127.0.0.1:0")->address();
}

TEST(Cli, ExportAndVolumeLifecycle) {
  testing::TempDir dir;
  auto address = free_address();
  ExportProcess daemon(dir.path(), address);
  ASSERT_GT(daemon.pid(), 0);
  Outcome created{};
  for (int attempt = 0; attempt < 200; ++attempt) {
    created = run_cli({"volume", "create", "--endpoint", address, "--token", "t"});
    if (created.code == kExitOk) break;
    std::this_thread::sleep_for(milliseconds(25));
  }
  ASSERT_EQ(created.code, kExitOk) << created.err;
  EXPECT_EQ(created.out, "vol-1\n");
  std::string task(32, 'a');
  auto published = run_cli({"volume", "publish", "--endpoint", address, "--token", "t",
                            "--volume", "vol-1", "--task", task});
  EXPECT_EQ(published.code, kExitOk) << published.err;
  EXPECT_NE(published.out.find("\"mount_path\":\"/workspace\""), std::string::npos);
  auto busy = run_cli({"volume", "delete", "--endpoint", address, "--token", "t",
                       "--volume", "vol-1"});
  EXPECT_EQ(busy.code, kExitDomain);
  EXPECT_NE(busy.err.find("volume-busy"), std::string::npos);
  EXPECT_EQ(run_cli({"volume", "unpublish", "--endpoint", address, "--token", "t",
                     "--volume", "vol-1", "--task", task})
                .code,
            kExitOk);
  EXPECT_EQ(run_cli({"volume", "delete", "--endpoint", address, "--token", "t",
                     "--volume", "vol-1"})
                .code,
            kExitOk);
  EXPECT_EQ(run_cli({"volume", "publish", "--endpoint", address, "--token", "t",
                     "--volume", "vol-1", "--task", "short"})
                .code,
            kExitUsage);
  auto wrong = run_cli({"volume", "create", "--endpoint", address, "--token", "nope"});
  EXPECT_EQ(wrong.code, kExitDomain);
  EXPECT_EQ(daemon.stop(), kExitOk);
}

TEST(Cli, NotebookPrintsAUrl) {
  auto r = run_cli({"notebook", "--backend", "sim", "--hold-seconds", "0.1"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("notebook url: http://127.0.0.1:", 0), 0u) << r.out;
}

}  // namespace
}  // namespace taskmesh::cli
