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

#include "taskmesh/builtin_tasks.hpp"

#include <httplib.h>

#include <stdexcept>
#include <thread>

namespace taskmesh {

namespace {

Document number_sum(const Document& a, const Document& b) {
  if (!a.is_number() || !b.is_number()) {
    throw TaskFailure("bad-input", "add expects two numbers");
  }
  if (a.is_number_integer() && b.is_number_integer()) {
    return a.get<std::int64_t>() + b.get<std::int64_t>();
  }
  return a.get<double>() + b.get<double>();
}

Document number_square(const Document& x) {
  if (!x.is_number()) throw TaskFailure("bad-input", "square expects a number");
  if (x.is_number_integer()) {
    auto v = x.get<std::int64_t>();
    return v * v;
  }
  auto v = x.get<double>();
  return v * v;
}

const std::string& string_input(TaskContext& ctx, const std::string& key) {
  const auto& v = ctx.input(key);
  if (!v.is_string()) throw TaskFailure("bad-input", key + " must be a string");
  return v.get_ref<const std::string&>();
}

std::int64_t int_input(TaskContext& ctx, const std::string& key) {
  const auto& v = ctx.input(key);
  if (!v.is_number_integer()) {
    throw TaskFailure("bad-input", key + " must be an integer");
  }
  return v.get<std::int64_t>();
}

std::int64_t mod(std::int64_t v) {
  v %= kTreeModulus;
  return v < 0 ? v + kTreeModulus : v;
}

Document tree(TaskContext& ctx) {
  const auto& op = string_input(ctx, "op");
  auto value = int_input(ctx, "value");
  if (op == "fail") {
    throw TaskFailure("tree-failed", "tree node " + std::to_string(value) + " failed");
  }
  if (op != "add" && op != "mul" && op != "sub") {
    throw TaskFailure("bad-input", "unknown tree op " + op);
  }
  auto& rt = ctx.runtime();
  std::vector<TaskHandle> children;
  if (const auto* kids = ctx.find_input("children")) {
    if (!kids->is_array()) throw TaskFailure("bad-input", "children must be a list");
    for (const auto& kid : *kids) {
      if (!kid.is_object()) throw TaskFailure("bad-input", "child must be a map");
      Inputs inputs;
      for (const auto& [k, v] : kid.items()) inputs[k] = v;
      children.push_back(rt.spawn(rt.child_spec("tree", std::move(inputs))));
    }
  }
  auto acc = mod(value);
  for (const auto& child : children) {
    auto result = rt.await_result(child);
    if (!result.ok()) throw TaskFailure(result.error().code, result.error().message);
    if (!result.value().is_number_integer()) {
      throw TaskFailure("bad-result", "tree child returned a non-integer");
    }
    auto v = mod(result.value().get<std::int64_t>());
    if (op == "add") {
      acc = mod(acc + v);
    } else if (op == "mul") {
      acc = mod(acc * v);
    } else {
      acc = mod(acc - v);
    }
  }
  return acc;
}

Document diamond(TaskContext& ctx) {
  auto* x = ctx.find_input("x");
  auto* y = ctx.find_input("y");
  auto& rt = ctx.runtime();
  auto left = rt.spawn(rt.child_spec("mapper", {{"x", x ? *x : Document(3)}}));
  auto right = rt.spawn(rt.child_spec("mapper", {{"x", y ? *y : Document(4)}}));
  auto a = rt.await_result(left);
  auto b = rt.await_result(right);
  for (const auto* r : {&a, &b}) {
    if (!r->ok()) throw TaskFailure(r->error().code, r->error().message);
  }
  return ctx.call("joiner", {{"a", a.value()}, {"b", b.value()}});
}

Document bench_read(TaskContext& ctx) {
  const auto& paths = ctx.input("paths");
  if (!paths.is_array()) throw TaskFailure("bad-input", "paths must be a list");
  std::size_t window = netfs::kDefaultReadWindow;
  if (const auto* w = ctx.find_input("window")) {
    if (!w->is_number_unsigned() || w->get<std::uint64_t>() == 0) {
      throw TaskFailure("bad-input", "window must be a positive integer");
    }
    window = w->get<std::size_t>();
  }
  Document access = Document::array();
  Document sizes = Document::array();
  for (const auto& path : paths) {
    if (!path.is_string()) throw TaskFailure("bad-input", "path must be a string");
    auto read = ctx.workspace().read_whole(path.get<std::string>(), window);
    access.push_back(read.access_time.count());
    sizes.push_back(read.data.size());
  }
  return Document{{"access_ns", access}, {"sizes", sizes}};
}

Document notebook(TaskContext& ctx) {
  std::string host = "127.0.0.1";
  if (const auto* h = ctx.find_input("host"); h && h->is_string()) {
    host = h->get<std::string>();
  }
  httplib::Server server;
  auto page = "<!doctype html><title>notebook</title><p>notebook task " +
              ctx.id().str() + "</p>\n";
  server.Get("/", [page](const httplib::Request&, httplib::Response& res) {
    res.set_content(page, "text/html");
  });
  int port = server.bind_to_any_port(host);
  if (port < 0) throw TaskFailure("bind-failure", "cannot bind " + host);
  std::thread loop([&server] { server.listen_after_bind(); });
  struct Stop {
    httplib::Server& server;
    std::thread& loop;
    ~Stop() {
      server.stop();
      loop.join();
    }
  } stop{server, loop};
  ctx.log("notebook url: http://" + host + ":" + std::to_string(port) + "/");
  ctx.hold();
  return nullptr;
}

}  // namespace

TaskRegistry builtin_registry() {
  TaskRegistry r;
  r.add("echo", [](TaskContext& ctx) { return ctx.input("x"); });
  r.add("add", [](TaskContext& ctx) {
    return number_sum(ctx.input("a"), ctx.input("b"));
  });
  r.add("square", [](TaskContext& ctx) { return number_square(ctx.input("x")); });
  r.add("mapper", [](TaskContext& ctx) {
    return ctx.call("square", {{"x", ctx.input("x")}});
  });
  r.add("joiner", [](TaskContext& ctx) {
    return ctx.call("add", {{"a", ctx.input("a")}, {"b", ctx.input("b")}});
  });
  r.add("diamond", diamond);
  r.add("tree", tree);
  r.add("fail", [](TaskContext& ctx) -> Document {
    std::string message = "task failed on request";
    if (const auto* m = ctx.find_input("message"); m && m->is_string()) {
      message = m->get<std::string>();
    }
    throw std::runtime_error(message);
  });
  r.add("say", [](TaskContext& ctx) {
    const auto& lines = ctx.input("lines");
    std::vector<std::string> texts;
    if (lines.is_string()) {
      texts.push_back(lines.get<std::string>());
    } else if (lines.is_array()) {
      for (const auto& l : lines) {
        if (!l.is_string()) throw TaskFailure("bad-input", "lines must be strings");
        texts.push_back(l.get<std::string>());
      }
    } else {
      throw TaskFailure("bad-input", "lines must be a string or a list");
    }
    for (const auto& t : texts) ctx.log(t);
    return Document(texts.size());
  });
  r.add("cat", [](TaskContext& ctx) {
    auto bytes = ctx.workspace().read_file(string_input(ctx, "path"));
    return Document(std::string(bytes.begin(), bytes.end()));
  });
  r.add("write", [](TaskContext& ctx) {
    const auto& text = string_input(ctx, "text");
    ctx.workspace().write_file(
        string_input(ctx, "path"),
        std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    return Document(text.size());
  });
  r.add("bench-read", bench_read);
  r.add("sleep", [](TaskContext& ctx) {
    ctx.sleep_for(std::chrono::milliseconds(int_input(ctx, "ms")));
    return Document(nullptr);
  });
  r.add("notebook", notebook);
  return r;
}

}  // namespace taskmesh
