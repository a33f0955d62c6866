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
#include "support/generators.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "taskmesh/builtin_tasks.hpp"

namespace taskmesh::testing {

namespace op = netfs::op;
namespace result = netfs::result;

std::uint64_t pick(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::uint32_t random_codepoint(Rng& rng) {
  switch (pick(rng, 0, 9)) {
    case 0:
      return static_cast<std::uint32_t>(pick(rng, 0, 0x1F));
    case 1: {
      static constexpr char kMeta[] = "\"\\/{}[]:,";
      return static_cast<unsigned char>(kMeta[pick(rng, 0, sizeof(kMeta) - 2)]);
    }
    case 2:
      return static_cast<std::uint32_t>(pick(rng, 0x80, 0x7FF));
    case 3: {
      auto cp = static_cast<std::uint32_t>(pick(rng, 0x800, 0xFFFF - 0x800));
      return cp >= 0xD800 ? cp + 0x800 : cp;
    }
    case 4:
      return static_cast<std::uint32_t>(pick(rng, 0x10000, 0x10FFFF));
    default:
      return static_cast<std::uint32_t>(pick(rng, 0x20, 0x7E));
  }
}

double random_double(Rng& rng) {
  switch (pick(rng, 0, 3)) {
    case 0:
      return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    case 1:
      return static_cast<double>(pick(rng, 0, 1000)) / 8.0;
    default: {
      for (;;) {
        auto bits = rng();
        double d;
        std::memcpy(&d, &bits, sizeof d);
        if (std::isfinite(d)) return d;
      }
    }
  }
}

std::string random_name(Rng& rng) {
  auto text = random_utf8(rng, 12);
  return text.empty() ? "n" : text;
}

netfs::FileAttr random_attr(Rng& rng) {
  netfs::FileAttr attr;
  attr.kind = chance(rng, 0.5) ? netfs::FileKind::file : netfs::FileKind::directory;
  attr.size = chance(rng, 0.2) ? rng() : pick(rng, 0, 1 << 20);
  attr.mtime_ms = static_cast<std::int64_t>(pick(rng, 0, 4'000'000'000'000ULL)) -
                  1'000'000'000'000LL;
  attr.mode = static_cast<std::uint32_t>(pick(rng, 0, 07777));
  return attr;
}

netfs::OpenMode random_open_mode(Rng& rng) {
  return static_cast<netfs::OpenMode>(pick(rng, 0, 3));
}

}  // namespace

std::string random_utf8(Rng& rng, std::size_t max_codepoints) {
  std::string out;
  auto n = pick(rng, 0, max_codepoints);
  for (std::uint64_t i = 0; i < n; ++i) append_utf8(out, random_codepoint(rng));
  return out;
}

netfs::Bytes random_bytes(Rng& rng, std::size_t size) {
  netfs::Bytes out(size);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

Document random_document(Rng& rng, int depth) {
  auto kind = pick(rng, 0, depth > 0 ? 7 : 5);
  switch (kind) {
    case 0:
      return nullptr;
    case 1:
      return chance(rng, 0.5);
    case 2:
      return static_cast<std::int64_t>(rng());
    case 3:
      return chance(rng, 0.5) ? Document(rng()) : Document(random_double(rng));
    case 4:
    case 5:
      return random_utf8(rng, 16);
    case 6: {
      auto doc = Document::array();
      auto n = pick(rng, 0, 4);
      for (std::uint64_t i = 0; i < n; ++i) doc.push_back(random_document(rng, depth - 1));
      return doc;
    }
    default: {
      auto doc = Document::object();
      auto n = pick(rng, 0, 4);
      for (std::uint64_t i = 0; i < n; ++i) {
        doc[random_utf8(rng, 8)] = random_document(rng, depth - 1);
      }
      return doc;
    }
  }
}

TaskSpec random_spec(Rng& rng) {
  TaskSpec spec;
  spec.id = TaskId::random(rng);
  spec.name = random_name(rng);
  spec.entrypoint = random_name(rng);
  auto n = pick(rng, 0, 3);
  for (std::uint64_t i = 0; i < n; ++i) {
    spec.inputs[random_utf8(rng, 6)] = random_document(rng, 2);
  }
  if (chance(rng, 0.5)) spec.parent = TaskId::random(rng);
  if (chance(rng, 0.3)) spec.placement = random_name(rng);
  if (chance(rng, 0.3)) spec.workspace = random_name(rng);
  return spec;
}

netfs::FsRequest random_fs_request(Rng& rng) {
  auto path = [&] { return random_utf8(rng, 10); };
  switch (pick(rng, 0, 13)) {
    case 0: return op::Lookup{path()};
    case 1: return op::GetAttr{path()};
    case 2: return op::ReadDir{path()};
    case 3: return op::Open{path(), random_open_mode(rng)};
    case 4: return op::Read{rng(), rng(), pick(rng, 0, 1 << 17)};
    case 5: return op::Write{rng(), rng(), random_bytes(rng, pick(rng, 0, 64))};
    case 6: return op::Create{path(), static_cast<std::uint32_t>(pick(rng, 0, 07777))};
    case 7: return op::MkDir{path()};
    case 8: return op::Unlink{path()};
    case 9: return op::RmDir{path()};
    case 10: return op::Rename{path(), path()};
    case 11: return op::Truncate{path(), rng()};
    case 12: return op::Flush{rng()};
    default: return op::Release{rng()};
  }
}

netfs::FsResponse random_fs_response(Rng& rng) {
  netfs::FsResponse response;
  response.op = static_cast<netfs::FsOp>(pick(rng, 0, 13));
  if (chance(rng, 0.3)) {
    response.outcome = static_cast<netfs::FsErrc>(pick(rng, 0, 7));
    return response;
  }
  switch (netfs::success_index(response.op)) {
    case 1:
      response.outcome = result::Attr{random_attr(rng)};
      break;
    case 2: {
      result::Entries entries;
      auto n = pick(rng, 0, 5);
      for (std::uint64_t i = 0; i < n; ++i) entries.names.push_back(random_name(rng));
      response.outcome = entries;
      break;
    }
    case 3:
      response.outcome = result::Opened{rng(), random_attr(rng)};
      break;
    case 4:
      response.outcome = result::Data{random_bytes(rng, pick(rng, 0, 200)), chance(rng, 0.5)};
      break;
    case 5:
      response.outcome = result::Written{rng()};
      break;
    default:
      response.outcome = result::Done{};
  }
  return response;
}

wire::Message random_message(Rng& rng) {
  auto id = [&] { return TaskId::random(rng).str(); };
  switch (pick(rng, 0, 9)) {
    case 0: {
      wire::Hello hello{id(), std::nullopt};
      if (chance(rng, 0.5)) hello.token = random_utf8(rng, 20);
      return hello;
    }
    case 1:
      return wire::Status{id(), static_cast<TaskState>(pick(rng, 0, 5))};
    case 2:
      return wire::Log{id(), chance(rng, 0.5) ? wire::LogStream::out : wire::LogStream::err,
                       random_utf8(rng, 40)};
    case 3:
      return wire::Return{id(), random_document(rng)};
    case 4:
      return wire::Fail{id(), ErrorInfo{random_name(rng), random_utf8(rng, 30)}};
    case 5:
      return wire::SpawnRequest{random_spec(rng)};
    case 6:
      return wire::SpawnAck{id()};
    case 7:
      return wire::FsRequestFrame{random_name(rng), pick(rng, 1, ~0ULL),
                                  random_fs_request(rng)};
    case 8:
      return wire::FsResponseFrame{random_name(rng), pick(rng, 1, ~0ULL),
                                   random_fs_response(rng)};
    default: {
      auto args = Document::object();
      auto n = pick(rng, 0, 3);
      for (std::uint64_t i = 0; i < n; ++i) args[random_utf8(rng, 6)] = random_document(rng, 2);
      return wire::VolumeRpc{random_name(rng), args};
    }
  }
}

std::vector<std::string> adversarial_paths() {
  return {"..",
          "/..",
          "../outside",
          "/../outside/secret",
          "a/../../outside/secret",
          "a/b/../../../outside",
          "./../outside",
          "//..//outside//secret",
          "a/./../..",
          "/a/../b/../../outside/new",
          "../root/a",
          "../../../../etc/passwd",
          "a/..\u0000/x"};
}

namespace {

std::string random_fs_path(Rng& rng, const FsScriptOptions& options) {
  if (chance(rng, options.adversarial)) {
    auto pool = adversarial_paths();
    return pool[pick(rng, 0, pool.size() - 1)];
  }
  static constexpr const char* kNames[] = {"a", "b", "c"};
  std::string path;
  auto depth = pick(rng, 0, 3);
  for (std::uint64_t i = 0; i < depth; ++i) {
    if (chance(rng, 0.08)) path += chance(rng, 0.5) ? "/." : "/";
    path += "/";
    path += kNames[pick(rng, 0, 2)];
  }
  if (path.empty()) return chance(rng, 0.5) ? "/" : "";
  if (chance(rng, 0.05)) path += "/";
  if (chance(rng, 0.2)) path = path.substr(1);
  return path;
}

}  // namespace

std::vector<FsStep> random_fs_script(Rng& rng, const FsScriptOptions& options) {
  std::vector<std::uint64_t> next_seq(options.sessions, 1);
  std::vector<std::vector<std::uint64_t>> opened(options.sessions);
  std::vector<FsStep> script;
  auto count = pick(rng, 1, options.max_ops);
  for (std::uint64_t i = 0; i < count; ++i) {
    FsStep step;
    step.session = static_cast<int>(pick(rng, 0, options.sessions - 1));
    auto& seq = next_seq[step.session];
    auto& handles = opened[step.session];
    auto path = [&] { return random_fs_path(rng, options); };
    auto handle = [&]() -> std::uint64_t {
      if (handles.empty() || chance(rng, 0.1)) return pick(rng, 0, seq + 2);
      return handles[pick(rng, 0, handles.size() - 1)];
    };
    auto offset = [&]() -> std::uint64_t {
      return chance(rng, 0.03) ? (std::uint64_t{1} << 30) - pick(rng, 0, 4)
                               : pick(rng, 0, 300);
    };
    auto roll = pick(rng, 0, 99);
    if (roll < 10) {
      step.request = op::Create{path(), chance(rng, 0.7)
                                            ? netfs::kDefaultFileMode
                                            : static_cast<std::uint32_t>(
                                                  pick(rng, 0, 1) ? 0600 : 0755)};
    } else if (roll < 18) {
      step.request = op::MkDir{path()};
    } else if (roll < 32) {
      step.request = op::Open{path(), random_open_mode(rng)};
      handles.push_back(seq);
    } else if (roll < 44) {
      auto len = chance(rng, 0.05) ? netfs::kChunkSize + pick(rng, 1, 10)
                                   : pick(rng, 0, 400);
      step.request = op::Read{handle(), pick(rng, 0, 400), len};
    } else if (roll < 58) {
      auto o = offset();
      // Near the size limit every write must overshoot it, so no test ever
      // materializes a gigabyte file.
      auto size = o > 1000 ? pick(rng, 5, 8) : pick(rng, 0, 200);
      if (chance(rng, 0.02)) size = netfs::kChunkSize + 1;
      step.request = op::Write{handle(), o, random_bytes(rng, size)};
    } else if (roll < 63) {
      step.request = op::Flush{handle()};
    } else if (roll < 70) {
      step.request = op::Release{handle()};
    } else if (roll < 75) {
      step.request = op::GetAttr{path()};
    } else if (roll < 78) {
      step.request = op::Lookup{path()};
    } else if (roll < 83) {
      step.request = op::ReadDir{path()};
    } else if (roll < 87) {
      step.request = op::Unlink{path()};
    } else if (roll < 91) {
      step.request = op::RmDir{path()};
    } else if (roll < 97) {
      step.request = op::Rename{path(), path()};
    } else {
      auto size = chance(rng, 0.1) ? (std::uint64_t{1} << 30) + 1 : pick(rng, 0, 300);
      step.request = op::Truncate{path(), size};
    }
    ++seq;
    script.push_back(std::move(step));
  }
  return script;
}

TreeNode random_tree(Rng& rng, int max_depth, int max_fanout, double fail_rate) {
  TreeNode node;
  static constexpr const char* kOps[] = {"add", "mul", "sub"};
  node.op = chance(rng, fail_rate) ? "fail" : kOps[pick(rng, 0, 2)];
  node.value = static_cast<std::int64_t>(pick(rng, 0, 2'000'000)) - 500'000;
  if (max_depth > 0 && node.op != "fail") {
    auto fanout = pick(rng, 0, static_cast<std::uint64_t>(max_fanout));
    for (std::uint64_t i = 0; i < fanout; ++i) {
      node.children.push_back(random_tree(rng, max_depth - 1, max_fanout, fail_rate));
    }
  }
  return node;
}

namespace {

Document tree_document(const TreeNode& node) {
  Document doc = {{"op", node.op}, {"value", node.value}};
  if (!node.children.empty()) {
    auto kids = Document::array();
    for (const auto& child : node.children) kids.push_back(tree_document(child));
    doc["children"] = kids;
  }
  return doc;
}

std::int64_t positive_mod(std::int64_t v) {
  auto r = v % kTreeModulus;
  return r < 0 ? r + kTreeModulus : r;
}

}  // namespace

Inputs tree_inputs(const TreeNode& node) {
  Inputs inputs;
  auto doc = tree_document(node);
  for (const auto& [key, value] : doc.items()) inputs[key] = value;
  return inputs;
}

std::size_t tree_size(const TreeNode& node) {
  std::size_t n = 1;
  for (const auto& child : node.children) n += tree_size(child);
  return n;
}

std::variant<std::int64_t, ErrorInfo> evaluate_tree(const TreeNode& node) {
  if (node.op == "fail") {
    return ErrorInfo{"tree-failed", "tree node " + std::to_string(node.value) + " failed"};
  }
  // Products of two residues stay below 2^41, so plain int64 is enough.
  std::int64_t acc = positive_mod(node.value);
  for (const auto& child : node.children) {
    auto sub = evaluate_tree(child);
    if (auto* error = std::get_if<ErrorInfo>(&sub)) return *error;
    auto v = std::get<std::int64_t>(sub);
    if (node.op == "add") acc = positive_mod(acc + v);
    if (node.op == "mul") acc = positive_mod(acc * v);
    if (node.op == "sub") acc = positive_mod(acc - v);
  }
  return acc;
}

}  // namespace taskmesh::testing
