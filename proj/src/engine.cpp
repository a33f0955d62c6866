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

#include "taskmesh/engine.hpp"

#include <unistd.h>

#include <algorithm>
#include <random>

#include "taskmesh/tcp.hpp"
#include "taskmesh/volume.hpp"

namespace taskmesh {

TaskId driver_id() { return TaskId::from_seed(0); }

TaskSpec top_level_spec(std::string entrypoint, Inputs inputs) {
  TaskSpec spec;
  spec.id = TaskId::derive(driver_id(), 0);
  spec.name = entrypoint;
  spec.entrypoint = std::move(entrypoint);
  spec.inputs = std::move(inputs);
  spec.parent = driver_id();
  return spec;
}

WorkflowRun run_workflow_sim(const TaskRegistry& registry, const TaskSpec& spec,
                             const SimRunOptions& options) {
  sim::Kernel kernel(options.seed);
  sim::Network network(kernel, options.profile);
  MemoryTrace trace;
  SimBackend backend(network, registry, &trace, options.backend);

  WorkflowRun run;
  std::exception_ptr failure;
  std::optional<sim::ActorId> export_actor;
  kernel.spawn("driver", [&] {
    try {
      auto host = network.host(options.local_node);
      auto top = spec;
      RuntimeOptions rt_options;
      rt_options.token_seed = options.seed;

      std::unique_ptr<netfs::ExportServer> server;
      std::unique_ptr<volume::VolumeBroker> broker;
      if (options.export_config) {
        server = std::make_unique<netfs::ExportServer>(*options.export_config,
                                                       *host);
        auto* srv = server.get();
        export_actor = kernel.spawn("export", [srv] { srv->serve_forever(); });
        broker = std::make_unique<volume::VolumeBroker>(
            [&](const std::string& endpoint, const std::string& token) {
              volume::probe_export(*host, endpoint, token);
            });
        top.workspace = broker->create_volume(server->address(),
                                              options.export_config->token);
        rt_options.publish_workspace = [&](const std::string& volume,
                                           const TaskId& task) {
          return broker->publish_volume(volume, task);
        };
      }

      Runtime runtime(driver_id(), *host, backend, &trace, std::move(rt_options));
      auto started = host->now();
      auto handle = runtime.spawn(top);
      run.result = runtime.await_result(handle, options.timeout);
      run.elapsed = host->now() - started;
      run.logs = handle.logs();
      if (broker && top.workspace) {
        broker->unpublish_volume(*top.workspace, top.id);
        broker->delete_volume(*top.workspace);
      }
      if (export_actor) kernel.kill(*export_actor);
    } catch (const std::exception&) {
      failure = std::current_exception();
      if (export_actor) kernel.kill(*export_actor);
    }
  });
  kernel.run();
  if (failure) std::rethrow_exception(failure);
  run.trace = trace.events();
  return run;
}

WorkflowRun run_workflow_process(const TaskSpec& spec,
                                 const ProcessRunOptions& options) {
  std::filesystem::path trace_dir;
  bool temporary = !options.trace_dir;
  if (temporary) {
    std::random_device rd;
    trace_dir = std::filesystem::temp_directory_path() /
                ("taskmesh-trace-" + std::to_string(::getpid()) + "-" +
                 std::to_string(rd()));
  } else {
    trace_dir = *options.trace_dir;
  }
  std::filesystem::create_directories(trace_dir);

  MemoryTrace trace;
  TcpTransport transport("local");
  WorkflowRun run;
  {
    ProcessBackend backend({options.executable, trace_dir});
    RuntimeOptions rt_options;
    rt_options.liveness_poll = std::chrono::milliseconds(100);
    rt_options.publish_workspace = options.publish_workspace;
    rt_options.on_log = options.on_log;
    Runtime runtime(driver_id(), transport, backend, &trace, std::move(rt_options));
    auto started = transport.now();
    auto handle = runtime.spawn(spec);
    run.result = runtime.await_result(handle, options.timeout);
    run.elapsed = transport.now() - started;
    run.logs = handle.logs();
  }
  run.trace = trace.events();
  auto children = read_trace_dir(trace_dir);
  run.trace.insert(run.trace.end(), children.begin(), children.end());
  std::stable_sort(run.trace.begin(), run.trace.end(),
                   [](const TraceEvent& a, const TraceEvent& b) {
                     return a.time < b.time;
                   });
  if (temporary) {
    std::error_code ec;
    std::filesystem::remove_all(trace_dir, ec);
  }
  return run;
}

}  // namespace taskmesh
