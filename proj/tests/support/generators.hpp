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
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "taskmesh/document.hpp"
#include "taskmesh/fs_protocol.hpp"
#include "taskmesh/task_model.hpp"
#include "taskmesh/wire.hpp"

// Hand-rolled generators for property tests. Everything is driven by an
// explicit mt19937_64 so a failing case can be replayed from its seed.
namespace taskmesh::testing {

using Rng = std::mt19937_64;

std::uint64_t pick(Rng& rng, std::uint64_t lo, std::uint64_t hi);
bool chance(Rng& rng, double p);

// Valid UTF-8 drawn from every encoding length, control characters and
// JSON metacharacters included.
std::string random_utf8(Rng& rng, std::size_t max_codepoints);
netfs::Bytes random_bytes(Rng& rng, std::size_t size);
Document random_document(Rng& rng, int depth = 3);
TaskSpec random_spec(Rng& rng);
netfs::FsRequest random_fs_request(Rng& rng);
netfs::FsResponse random_fs_response(Rng& rng);
wire::Message random_message(Rng& rng);

// One step of a file-protocol session script. `session` picks one of the
// scripted client sessions; handles are predicted from that session's
// sequence numbers, which start at 1 and grow by one per request.
struct FsStep {
  int session = 0;
  netfs::FsRequest request;
};

struct FsScriptOptions {
  int sessions = 2;
  std::size_t max_ops = 50;
  // Share of path arguments drawn from the ".."-heavy adversarial pool.
  double adversarial = 0.15;
};

std::vector<FsStep> random_fs_script(Rng& rng, const FsScriptOptions& options = {});

// Paths that try to climb out of an export root in various spellings.
std::vector<std::string> adversarial_paths();

// Arithmetic workflow: each node folds its children's results into its own
// value, in child order, modulo kTreeModulus.
struct TreeNode {
  std::string op;  // add, mul, sub or fail
  std::int64_t value = 0;
  std::vector<TreeNode> children;
};

// `max_depth` counts spawn levels below the root.
TreeNode random_tree(Rng& rng, int max_depth = 3, int max_fanout = 3,
                     double fail_rate = 0.04);
Inputs tree_inputs(const TreeNode& node);
std::size_t tree_size(const TreeNode& node);
// Expected outcome: the folded value, or the error of the first failing
// subtree in child order.
std::variant<std::int64_t, ErrorInfo> evaluate_tree(const TreeNode& node);

}  // namespace taskmesh::testing
