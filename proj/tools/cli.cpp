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

#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "taskmesh/bench.hpp"
#include "taskmesh/builtin_tasks.hpp"
#include "taskmesh/document.hpp"
#include "taskmesh/engine.hpp"
#include "taskmesh/fs_server.hpp"
#include "taskmesh/tcp.hpp"
#include "taskmesh/volume.hpp"

extern char** environ;

namespace taskmesh::cli {

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

void trap_signals() {
  g_interrupted = 0;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

// Waits until interrupted or, when hold_seconds > 0, that long.
void wait_for_interrupt(double hold_seconds) {
  auto until = std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(hold_seconds));
  while (!g_interrupted) {
    if (hold_seconds > 0 && std::chrono::steady_clock::now() >= until) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Env current_env() {
  Env env;
  for (char** e = environ; *e != nullptr; ++e) {
    std::string_view entry = *e;
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return env;
}

Inputs parse_inputs(const std::vector<std::string>& items) {
  Inputs inputs;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--input expects key=value, got '" + item + "'");
    }
    auto key = item.substr(0, eq);
    if (inputs.contains(key)) throw UsageError("input '" + key + "' given twice");
    inputs[key] = parse_loose_value(item.substr(eq + 1));
  }
  return inputs;
}

void print_failure(std::ostream& err, const std::string& code,
                   const std::string& message) {
  err << "error: " << code << ": " << message << "\n";
}

void print_logs(std::ostream& err, const std::vector<LogLine>& logs) {
  for (const auto& line : logs) {
    err << "[" << wire::to_string(line.stream) << "] " << line.text << "\n";
  }
}

// Serves an export on a background thread of this process, with a broker
// for its volumes. Used by `run --export-root` under the process backend.
class LocalExport {
 public:
  LocalExport(const std::filesystem::path& root, TcpTransport& transport)
      : server_(netfs::ExportConfig{root, false, "local-export"}, transport, ""),
        broker_([this](const std::string& endpoint, const std::string& token) {
          if (endpoint != server_.address()) throw EndpointUnreachable(endpoint);
          if (token != server_.config().token) throw AuthRejected(endpoint);
        }),
        thread_([this](std::stop_token stop) { server_.serve(stop); }) {}

  volume::VolumeBroker& broker() { return broker_; }
  std::string create_volume() {
    return broker_.create_volume(server_.address(), server_.config().token);
  }

 private:
  netfs::ExportServer server_;
  volume::VolumeBroker broker_;
  std::jthread thread_;
};

struct RunArgs {
  std::string entrypoint;
  std::vector<std::string> inputs;
  std::string backend = "sim";
  std::uint64_t seed = 1;
  std::string placement;
  double rtt_ms = 0;
  double bandwidth_bps = bench::kDefaultBandwidth * 8;
  double jitter_ms = 0;
  double timeout_ms = 0;
  std::string export_root;
  std::string volume;
  std::string broker;
  std::string token;
  bool show_logs = false;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err,
            const std::string& self_exe) {
  auto spec = top_level_spec(a.entrypoint, parse_inputs(a.inputs));
  if (!a.placement.empty()) spec.placement = a.placement;
  std::optional<Nanos> timeout;
  if (a.timeout_ms > 0) timeout = Nanos(static_cast<std::int64_t>(a.timeout_ms * 1e6));
  if (!a.volume.empty() && (a.broker.empty() || a.token.empty())) {
    throw UsageError("--volume needs --broker and --token");
  }

  WorkflowRun run;
  if (a.backend == "sim") {
    if (!a.volume.empty()) {
      throw UsageError("--volume needs the process backend; use --export-root");
    }
    SimRunOptions options;
    options.seed = a.seed;
    options.profile = {a.rtt_ms, a.bandwidth_bps / 8.0, a.jitter_ms};
    options.timeout = timeout;
    if (!a.export_root.empty()) {
      options.export_config = netfs::ExportConfig{a.export_root, false, "local-export"};
    }
    run = run_workflow_sim(builtin_registry(), spec, options);
  } else {
    TcpTransport transport("local");
    std::unique_ptr<LocalExport> local;
    ProcessRunOptions options;
    options.executable = self_exe;
    options.timeout = timeout;
    if (!a.export_root.empty()) {
      netfs::validate({a.export_root, false, "local-export"});
      local = std::make_unique<LocalExport>(a.export_root, transport);
      spec.workspace = local->create_volume();
      options.publish_workspace = [&](const std::string& vol, const TaskId& task) {
        return local->broker().publish_volume(vol, task);
      };
    } else if (!a.volume.empty()) {
      spec.workspace = a.volume;
      options.publish_workspace = [&](const std::string& vol, const TaskId& task) {
        volume::VolumeClient client(transport, a.broker, a.token);
        return client.publish_volume(vol, task);
      };
    }
    run = run_workflow_process(spec, options);
    if (!a.volume.empty()) {
      volume::VolumeClient client(transport, a.broker, a.token);
      client.unpublish_volume(a.volume, spec.id);
    }
  }
  if (a.show_logs) print_logs(err, run.logs);
  if (!run.result.ok()) {
    print_failure(err, run.result.error().code, run.result.error().message);
    return kExitDomain;
  }
  out << canonical_text(run.result.value()) << "\n";
  return kExitOk;
}

int cmd_serve_task(const std::string& self_exe) {
  auto config = serve_config_from_env(current_env());
  TcpTransport transport("local");
  ProcessBackendOptions backend_options;
  backend_options.executable = self_exe;
  std::unique_ptr<JsonlTrace> trace;
  if (config.trace_dir) {
    backend_options.trace_dir = *config.trace_dir;
    trace = std::make_unique<JsonlTrace>(std::filesystem::path(*config.trace_dir) /
                                         (config.spec.id.str() + ".jsonl"));
  }
  ProcessBackend backend(backend_options);
  ServeOptions options;
  options.liveness_poll = std::chrono::milliseconds(100);
  return serve_task(builtin_registry(), config, transport, backend, trace.get(),
                    options);
}

struct ExportArgs {
  std::string root;
  bool read_only = false;
  std::string listen;
  std::string token;
  int attr_ttl_ms = 500;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  netfs::ExportConfig config{a.root, a.read_only, a.token,
                             std::chrono::milliseconds(a.attr_ttl_ms)};
  TcpTransport transport("local");
  netfs::ExportServer server(config, transport, a.listen);
  // A second transport for probes so the prober never touches the
  // listener the server is pumping.
  TcpTransport probe_transport("local");
  volume::VolumeBroker broker([&](const std::string& endpoint, const std::string& token) {
    if (endpoint == server.address()) {
      if (token != config.token) throw AuthRejected("token rejected by " + endpoint);
      return;
    }
    volume::probe_export(probe_transport, endpoint, token);
  });
  server.set_volume_handler(
      [&](const wire::VolumeRpc& rpc) { return volume::handle_volume_rpc(broker, rpc); });
  trap_signals();
  out << "exporting " << a.root << (a.read_only ? " (read-only)" : "") << " at "
      << server.address() << "\n"
      << std::flush;
  while (!g_interrupted) server.poll(std::chrono::milliseconds(50));
  return kExitOk;
}

struct VolumeArgs {
  std::string endpoint;
  std::string token;
  std::string volume;
  std::string task;
  std::string target;  // create: export to register, defaults to endpoint
  std::string target_token;
};

int cmd_volume(const std::string& action, const VolumeArgs& a, std::ostream& out) {
  TcpTransport transport("local");
  volume::VolumeClient client(transport, a.endpoint, a.token);
  auto task_id = [&] {
    auto id = TaskId::try_parse(a.task);
    if (!id) throw UsageError("--task must be 32 lowercase hex characters");
    return *id;
  };
  if (action == "create") {
    auto target = a.target.empty() ? a.endpoint : a.target;
    auto token = a.target_token.empty() ? a.token : a.target_token;
    out << client.create_volume(target, token) << "\n";
  } else if (action == "publish") {
    out << canonical_text(to_document(client.publish_volume(a.volume, task_id())))
        << "\n";
  } else if (action == "unpublish") {
    client.unpublish_volume(a.volume, task_id());
    out << "ok\n";
  } else {
    client.delete_volume(a.volume);
    out << "ok\n";
  }
  return kExitOk;
}

struct BenchArgs {
  std::string matrix;
  std::size_t window = 16;
  double threshold_ms = 1000;
  std::string csv;
  std::string work_dir;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  std::vector<bench::BenchCell> cells;
  if (a.matrix.empty()) {
    cells = bench::expand(bench::default_matrix());
  } else {
    std::ifstream in(a.matrix);
    if (!in) throw UsageError("cannot read matrix file " + a.matrix);
    std::stringstream text;
    text << in.rdbuf();
    cells = bench::parse_matrix_csv(text.str());
  }
  bench::BenchOptions options;
  options.window = a.window;
  options.seed = a.seed;
  options.work_dir = a.work_dir;
  options.threshold = Nanos(static_cast<std::int64_t>(a.threshold_ms * 1e6));
  auto results = bench::run_cells(cells, options);
  auto report = bench::check_threshold(results, options.threshold);
  auto csv = bench::to_csv(results);
  if (a.csv.empty()) {
    out << csv << "\n";
  } else {
    std::ofstream file(a.csv);
    file << csv;
    if (!file) throw Error("io", "cannot write " + a.csv);
  }
  out << bench::summary(results, report, options.threshold);
  return report.ok() ? kExitOk : kExitDomain;
}

struct NotebookArgs {
  std::string backend = "process";
  std::string host = "127.0.0.1";
  double hold_seconds = 0;
};

int cmd_notebook(const NotebookArgs& a, std::ostream& out, std::ostream& err,
                 const std::string& self_exe) {
  auto spec = top_level_spec("notebook", {{"host", a.host}});
  constexpr auto kUrlWait = std::chrono::seconds(10);
  trap_signals();

  // Shared by both backends once the task is up.
  auto host_session = [&](Runtime& runtime, const TaskHandle& handle) {
    auto line = runtime.next_log(handle, kUrlWait);
    if (!line) {
      auto result = runtime.await_result(handle, Nanos::zero());
      throw Error(result.error().code, result.error().message);
    }
    out << line->text << "\n" << std::flush;
    wait_for_interrupt(a.hold_seconds);
    runtime.cancel(handle);
    auto result = runtime.await_result(handle, kUrlWait);
    err << "notebook task " << to_string(handle.state()) << "\n";
    (void)result;
  };

  if (a.backend == "process") {
    TcpTransport transport("local");
    ProcessBackend backend({self_exe, std::nullopt});
    RuntimeOptions options;
    options.liveness_poll = std::chrono::milliseconds(100);
    Runtime runtime(driver_id(), transport, backend, nullptr, options);
    host_session(runtime, runtime.spawn(spec));
    return kExitOk;
  }

  auto registry = builtin_registry();
  sim::Kernel kernel(1);
  sim::Network network(kernel, {});
  SimBackend backend(network, registry);
  std::exception_ptr failure;
  kernel.spawn("driver", [&] {
    try {
      auto host = network.host("local");
      Runtime runtime(driver_id(), *host, backend);
      host_session(runtime, runtime.spawn(spec));
    } catch (const std::exception&) {
      failure = std::current_exception();
    }
  });
  kernel.run();
  if (failure) std::rethrow_exception(failure);
  return kExitOk;
}

}  // namespace

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err, const std::string& self_exe) {
  CLI::App app{"taskmesh: decentralized task workflows and workspace exports"};
  app.name("taskmesh");
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one task and print its result");
  run_cmd->add_option("entrypoint", run.entrypoint, "Registered task name")->required();
  run_cmd->add_option("--input", run.inputs, "key=value (value parsed as a document if possible)");
  run_cmd->add_option("--backend", run.backend)->check(CLI::IsMember({"sim", "process"}));
  run_cmd->add_option("--seed", run.seed, "Simulation seed");
  run_cmd->add_option("--placement", run.placement, "Node label for the task");
  run_cmd->add_option("--rtt-ms", run.rtt_ms)->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--bandwidth-bps", run.bandwidth_bps, "Link bandwidth in bits/s")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--jitter-ms", run.jitter_ms)->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--timeout-ms", run.timeout_ms)->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--export-root", run.export_root, "Serve this directory as the task's workspace");
  run_cmd->add_option("--volume", run.volume, "Published volume to use as the workspace");
  run_cmd->add_option("--broker", run.broker, "Export daemon holding --volume");
  run_cmd->add_option("--token", run.token, "Token for --broker");
  run_cmd->add_flag("--show-logs", run.show_logs, "Echo task log lines to stderr");

  app.add_subcommand("serve-task", "Serve one task from TASKMESH_* variables (internal)");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export", "Serve a directory over the file protocol");
  export_cmd->add_option("--root", exp.root)->required()->check(CLI::ExistingDirectory);
  export_cmd->add_flag("--read-only", exp.read_only);
  export_cmd->add_option("--listen", exp.listen, "host:port")->required();
  export_cmd->add_option("--token", exp.token)->required();
  export_cmd->add_option("--attr-ttl-ms", exp.attr_ttl_ms)->check(CLI::NonNegativeNumber);

  VolumeArgs vol;
  auto* volume_cmd = app.add_subcommand("volume", "Manage workspace volumes on an export daemon");
  volume_cmd->require_subcommand(1);
  std::string volume_action;
  for (const char* action : {"create", "publish", "unpublish", "delete"}) {
    auto* sub = volume_cmd->add_subcommand(action);
    sub->add_option("--endpoint", vol.endpoint, "Export daemon address")->required();
    sub->add_option("--token", vol.token)->required();
    if (std::string_view(action) == "create") {
      sub->add_option("--target", vol.target, "Export to register (default: --endpoint)");
      sub->add_option("--target-token", vol.target_token);
    } else {
      sub->add_option("--volume", vol.volume)->required();
    }
    if (std::string_view(action) == "publish" || std::string_view(action) == "unpublish") {
      sub->add_option("--task", vol.task)->required();
    }
    sub->callback([&volume_action, action] { volume_action = action; });
  }

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "File-access latency matrix on the simulator");
  bench_cmd->add_option("--matrix", bench_args.matrix, "CSV: count,size,rtt_ms,bandwidth_bps");
  bench_cmd->add_option("--window", bench_args.window, "Reads in flight per file")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threshold-ms", bench_args.threshold_ms)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--csv", bench_args.csv, "Write the results table here");
  bench_cmd->add_option("--work-dir", bench_args.work_dir, "Where test files are provisioned");
  bench_cmd->add_option("--seed", bench_args.seed);

  NotebookArgs nb;
  auto* notebook_cmd = app.add_subcommand("notebook", "Host a placeholder notebook task");
  notebook_cmd->add_option("--backend", nb.backend)->check(CLI::IsMember({"sim", "process"}));
  notebook_cmd->add_option("--host", nb.host, "Interface the page binds to");
  notebook_cmd->add_option("--hold-seconds", nb.hold_seconds, "Stop after this long (0: until interrupted)")
      ->check(CLI::NonNegativeNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run, out, err, self_exe);
    if (app.got_subcommand("serve-task")) return cmd_serve_task(self_exe);
    if (export_cmd->parsed()) return cmd_export(exp, out);
    if (volume_cmd->parsed()) return cmd_volume(volume_action, vol, out);
    if (bench_cmd->parsed()) return cmd_bench(bench_args, out);
    if (notebook_cmd->parsed()) return cmd_notebook(nb, out, err, self_exe);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidConfig& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionViolation& e) {
    for (const auto& v : e.violations()) print_failure(err, v.code, v.detail);
    return kExitDomain;
  } catch (const Error& e) {
    print_failure(err, e.code(), e.what());
    return kExitDomain;
  } catch (const std::exception& e) {
    print_failure(err, "internal", e.what());
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace taskmesh::cli
